"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class SingularityError(ArithmeticError):
    """A quantity is evaluated at (or an integral runs into) a singular point."""


class NumericError(ArithmeticError):
    """A numerical routine failed to converge."""


class AssumptionError(ValueError):
    """A time change fails the admissibility checks required for simulation."""


class DegenerateFilterError(RuntimeError):
    """Particle weights collapsed; carries diagnostics of the offending step."""

    def __init__(self, message, *, step=None, time=None, ess=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.ess = ess


class ConfigError(ValueError):
    """Invalid run configuration."""

    def __init__(self, message, *, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
