"""Deterministic time changes V(t) = int_0^t sigma^2(s) ds and derived clocks.

Three families are supported:

* ``PowerSingular(gamma, alpha)``: sigma^2(s) = 1 + gamma * s**(alpha - 1), so
  V(t) = t + (gamma / alpha) * t**alpha.  With alpha < 1/2 this is the
  canonical admissible clock (V(t) - t decays slowly enough at 0).
* ``Affine(c)``: sigma^2 = c, V(t) = c t.  Runs faster than real time for
  c > 1 but fails the integrability condition at 0; kept as a negative fixture.
* ``Custom(knots, sigma2)``: piecewise-constant sigma^2, so V is exact by
  summation and piecewise linear.

``lambda_of`` and ``Lambda_of`` give the scale and clock of the time-changed
Bessel(3) representation of the comparison process R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate

from .errors import DomainError, SingularityError

__all__ = [
    "PowerSingular",
    "Affine",
    "Custom",
    "TimeChangeSpec",
    "TimeChangeReport",
    "v_of",
    "v_inverse",
    "sigma2_of",
    "validate",
    "lambda_of",
    "Lambda_of",
    "log_lambda_quad",
]


@dataclass(frozen=True)
class PowerSingular:
    gamma: float = 1.0
    alpha: float = 1.0 / 3.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class Affine:
    c: float = 2.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"c must be positive, got {self.c}")


@dataclass(frozen=True)
class Custom:
    """Piecewise-constant sigma^2: value ``sigma2[j]`` on ``[knots[j], knots[j+1])``."""

    knots: tuple
    sigma2: tuple
    _vknots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        s2 = np.asarray(self.sigma2, dtype=float)
        if knots.ndim != 1 or len(knots) < 2 or knots[0] != 0.0:
            raise DomainError("knots must be a 1-d sequence starting at 0")
        if np.any(np.diff(knots) <= 0):
            raise DomainError("knots must be strictly increasing")
        if s2.shape != (len(knots) - 1,):
            raise DomainError("sigma2 needs one value per knot interval")
        if np.any(s2 <= 0):
            raise DomainError("sigma2 must be positive")
        object.__setattr__(self, "knots", tuple(float(k) for k in knots))
        object.__setattr__(self, "sigma2", tuple(float(v) for v in s2))
        vk = np.concatenate([[0.0], np.cumsum(s2 * np.diff(knots))])
        object.__setattr__(self, "_vknots", vk)


Family = Union[PowerSingular, Affine, Custom]

_FAMILY_NAMES = {PowerSingular: "power", Affine: "affine", Custom: "custom"}


@dataclass(frozen=True)
class TimeChangeSpec:
    family: Family = field(default_factory=PowerSingular)
    t_max: float = 4.0

    def __post_init__(self):
        if not self.t_max > 0:
            raise DomainError(f"t_max must be positive, got {self.t_max}")
        if isinstance(self.family, Custom) and self.family.knots[-1] < self.t_max:
            raise DomainError("custom knots must cover [0, t_max]")

    @classmethod
    def power(cls, gamma=1.0, alpha=1.0 / 3.0, t_max=4.0):
        return cls(PowerSingular(gamma, alpha), t_max)

    @property
    def name(self) -> str:
        return _FAMILY_NAMES[type(self.family)]

    def to_dict(self) -> dict:
        fam = self.family
        out = {"family": self.name}
        if isinstance(fam, PowerSingular):
            out.update(gamma=fam.gamma, alpha=fam.alpha)
        elif isinstance(fam, Affine):
            out.update(c=fam.c)
        else:
            out.update(knots=list(fam.knots), sigma2=list(fam.sigma2))
        out["t_max"] = self.t_max
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TimeChangeSpec":
        d = dict(d)
        name = d.pop("family", "power")
        t_max = float(d.pop("t_max", 4.0))
        if name == "power":
            fam = PowerSingular(float(d.pop("gamma", 1.0)), float(d.pop("alpha", 1.0 / 3.0)))
        elif name == "affine":
            fam = Affine(float(d.pop("c", 2.0)))
        elif name == "custom":
            fam = Custom(tuple(d.pop("knots")), tuple(d.pop("sigma2")))
        else:
            raise DomainError(f"unknown time-change family {name!r}")
        if d:
            raise DomainError(f"unexpected time-change keys: {sorted(d)}")
        return cls(fam, t_max)


@dataclass(frozen=True)
class TimeChangeReport:
    assumption1_ok: bool
    assumption2_ok: bool
    assumption2_integral: float
    epsilon_used: float

    @property
    def ok(self) -> bool:
        return self.assumption1_ok and self.assumption2_ok


def _check_t(spec, t, upper=None):
    t = np.asarray(t, dtype=float)
    upper = spec.t_max if upper is None else upper
    if np.any(~(t >= 0)) or np.any(t > upper * (1 + 1e-12)):
        raise DomainError(f"time outside [0, {upper}]")
    return t


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


def sigma2_of(spec: TimeChangeSpec, s):
    """sigma^2(s); +inf at s = 0 for the singular family."""
    s = _check_t(spec, s)
    fam = spec.family
    if isinstance(fam, PowerSingular):
        with np.errstate(divide="ignore"):
            out = 1.0 + fam.gamma * np.power(s, fam.alpha - 1.0)
    elif isinstance(fam, Affine):
        out = np.full_like(s, fam.c)
    else:
        k = np.asarray(fam.knots)
        idx = np.clip(np.searchsorted(k, s, side="right") - 1, 0, len(fam.sigma2) - 1)
        out = np.asarray(fam.sigma2)[idx]
    return _ret(out)


def _v_raw(fam, t):
    if isinstance(fam, PowerSingular):
        return t + (fam.gamma / fam.alpha) * np.power(t, fam.alpha)
    if isinstance(fam, Affine):
        return fam.c * t
    return np.interp(t, fam.knots, fam._vknots)


def v_of(spec: TimeChangeSpec, t):
    """V(t) for 0 <= t <= t_max."""
    t = _check_t(spec, t)
    return _ret(_v_raw(spec.family, t))


def v_inverse(spec: TimeChangeSpec, u):
    """Solve V(t) = u by vectorised bisection on [0, t_max]."""
    u = np.asarray(u, dtype=float)
    vmax = float(_v_raw(spec.family, np.float64(spec.t_max)))
    if np.any(~(u >= 0)) or np.any(u > vmax * (1 + 1e-12)):
        raise DomainError(f"u outside [0, V(t_max)={vmax}]")
    fam = spec.family
    if isinstance(fam, Affine):
        return _ret(u / fam.c)
    if isinstance(fam, Custom):
        return _ret(np.interp(u, fam._vknots, fam.knots))
    u = np.minimum(u, vmax)
    lo = np.zeros_like(u)
    hi = np.full_like(u, spec.t_max)
    tol = 1e-12 * (1.0 + u)
    for _ in range(1100):
        mid = 0.5 * (lo + hi)
        vm = _v_raw(fam, mid)
        below = vm < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all((hi - lo <= 4e-16 * hi) | (np.abs(_v_raw(fam, 0.5 * (lo + hi)) - u) <= tol)):
            break
    return _ret(0.5 * (lo + hi))


def _tail_integral(fn, eps, *, rtol=1e-12, max_halvings=200):
    """int_0^eps fn(t) dt by dyadic refinement towards 0.

    Returns +inf when the dyadic pieces stop shrinking geometrically, which is
    how logarithmic and stronger singularities at 0 show up.
    """
    total = 0.0
    hi = eps
    prev_piece = None
    stalled = 0
    for _ in range(max_halvings):
        lo = 0.5 * hi
        piece, _err = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
        if not math.isfinite(piece):
            return math.inf
        total += piece
        if prev_piece is not None and prev_piece > 0:
            stalled = stalled + 1 if piece / prev_piece > 0.95 else 0
            if stalled >= 8:
                return math.inf
        if piece <= rtol * abs(total):
            return total
        prev_piece = piece
        hi = lo
    return math.inf


def validate(spec: TimeChangeSpec, epsilon: float = 1e-2) -> TimeChangeReport:
    if not 0 < epsilon <= spec.t_max:
        raise DomainError("epsilon must lie in (0, t_max]")
    fam = spec.family
    grid = np.logspace(math.log10(spec.t_max) - 12, math.log10(spec.t_max), 1000)
    gap = _v_raw(fam, grid) - grid
    a1 = bool(np.all(gap > 0))
    if isinstance(fam, PowerSingular):
        p = 2.0 * fam.alpha
        integral = (fam.alpha / fam.gamma) ** 2 * epsilon ** (1 - p) / (1 - p) if p < 1 else math.inf
    elif isinstance(fam, Affine):
        integral = math.inf
    elif not a1:
        integral = math.inf
    else:
        integral = _tail_integral(lambda t: (float(_v_raw(fam, t)) - t) ** -2, epsilon)
    a2 = a1 and math.isfinite(integral)
    return TimeChangeReport(a1, a2, integral, epsilon)


def _require_assumption2(spec):
    rep = validate(spec, min(1e-2, spec.t_max))
    if not rep.assumption2_ok:
        raise SingularityError(
            f"{spec.name} time change fails the integrability condition at 0; "
            "lambda is not defined for it"
        )


def log_lambda_quad(spec: TimeChangeSpec, t: float) -> float:
    """-int_0^t ds / (V(s) - s) by adaptive quadrature.

    The singular family is integrated after substituting u = s**alpha, which
    makes the integrand (1/gamma) u**(1/alpha - 2) smooth for alpha <= 1/2.
    """
    t = float(_check_t(spec, t))
    if t == 0.0:
        return 0.0
    fam = spec.family
    if isinstance(fam, PowerSingular):
        a, g = fam.alpha, fam.gamma
        val, _ = integrate.quad(
            lambda u: (1.0 / g) * u ** (1.0 / a - 2.0),
            0.0, t ** a, epsabs=0.0, epsrel=1e-13, limit=200,
        )
        return -val
    val = _tail_integral(lambda s: 1.0 / (float(_v_raw(fam, s)) - s), t)
    if not math.isfinite(val):
        raise SingularityError("int_0^t ds/(V(s)-s) diverges")
    return -val


def lambda_of(spec: TimeChangeSpec, t):
    """lambda(t) = exp(-int_0^t ds/(V(s)-s))."""
    _require_assumption2(spec)
    return _lambda_unchecked(spec, _check_t(spec, t))


def _lambda_unchecked(spec, t):
    fam = spec.family
    if isinstance(fam, PowerSingular):
        # V(s) - s = (g/a) s^a exactly, so the inner integral is closed form
        a, g = fam.alpha, fam.gamma
        return _ret(np.exp(-(a / g) * np.power(t, 1.0 - a) / (1.0 - a)))
    flat = np.atleast_1d(t)
    out = np.array([math.exp(log_lambda_quad(spec, float(x))) for x in flat])
    return _ret(out.reshape(np.shape(t)))


def Lambda_of(spec: TimeChangeSpec, t):
    """Lambda(t) = int_0^t lambda(s)^-2 ds, accumulated piecewise over sorted t."""
    _require_assumption2(spec)
    t = _check_t(spec, t)
    flat = np.atleast_1d(t).ravel()
    order = np.argsort(flat)
    ts = flat[order]

    def inv_lam2(s):
        return 1.0 / float(_lambda_unchecked(spec, np.float64(s))) ** 2

    acc = 0.0
    prev = 0.0
    vals = np.empty_like(ts)
    for i, x in enumerate(ts):
        if x > prev:
            piece, _ = integrate.quad(inv_lam2, prev, x, epsabs=0.0, epsrel=1e-12, limit=200)
            acc += piece
            prev = x
        vals[i] = acc
    out = np.empty_like(flat)
    out[order] = vals
    return _ret(out.reshape(np.shape(t)))
