"""Path simulation for Z, its first zero, X and the auxiliary processes.

All simulators are batched: a ``SamplePath`` holds one row per path.  Z is
exact (Gaussian increments in V-time) and its first zero is located by a
Brownian-bridge crossing test followed by exact bridge bisection.  Every
process driven by B goes through one joint Euler kernel so that coupled
processes see the same fine-scale noise inside refined steps.
"""

from __future__ import annotations

import hashlib
import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import AssumptionError, DomainError
from .noise import (
    STREAM_B,
    STREAM_BES3,
    STREAM_BRIDGE3,
    STREAM_CROSS,
    STREAM_W,
    NoiseBundle,
    generator,
    make_grid,
)
from .timechange import (
    Affine,
    Custom,
    PowerSingular,
    TimeChangeSpec,
    Lambda_of,
    lambda_of,
    v_inverse,
    v_of,
    validate,
)

__all__ = [
    "FLAG_PRE",
    "FLAG_POST",
    "FLAG_ABSORBED",
    "FLAG_RELEASED",
    "StepController",
    "SamplePath",
    "ComparisonSummary",
    "simulate_Z",
    "simulate_coupled",
    "simulate_X",
    "simulate_Y",
    "simulate_U",
    "simulate_R_sde",
    "r_start_values",
    "construct_R_exact",
    "bessel_bridge_exact",
    "simulate_bridge_euler",
    "couple_compare",
    "write_csv",
    "write_binary",
    "read_binary",
]

FLAG_PRE = 0
FLAG_POST = 1
FLAG_ABSORBED = 2
FLAG_RELEASED = 3  # after the first zero when the path is continued as plain BM

STREAM_BISECT = 13

_KINDS = {"X": 0, "Y": 1, "Y2": 2, "R": 3, "U": 4, "SQ": 5}


@dataclass(frozen=True)
class StepController:
    """Step-size policy shared by every Euler simulation.

    ``terminal_guard`` bounds a step by that fraction of the time left before
    the bridge endpoint; ``positivity_guard`` bounds it by that fraction of
    x^2 (or of |u|/4 for squared processes) wherever the drift has a 1/x term.
    """

    dt_base: float = 1e-3
    dt_min: float = 1e-9
    drift_cap: float = 5.0
    terminal_guard: float = 0.1
    positivity_guard: float = 0.02
    grid_ratio: float = 0.1

    def __post_init__(self):
        for name in ("dt_base", "dt_min", "drift_cap", "terminal_guard", "positivity_guard",
                     "grid_ratio"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.dt_min > self.dt_base:
            raise DomainError("dt_min must not exceed dt_base")

    def grid(self, horizon: float) -> np.ndarray:
        return make_grid(horizon, self.dt_base, self.dt_min, self.grid_ratio)

    def halved(self) -> "StepController":
        return StepController(self.dt_base / 2, self.dt_min, self.drift_cap, self.terminal_guard,
                              self.positivity_guard, self.grid_ratio)


@dataclass
class SamplePath:
    """A batch of paths on a common grid with hitting metadata.

    ``tau``, ``v_tau`` and ``absorbed_at`` are NaN where the event did not
    happen inside the grid.
    """

    name: str
    grid: np.ndarray
    values: np.ndarray
    tau: np.ndarray
    v_tau: np.ndarray
    absorbed_at: np.ndarray
    flags: np.ndarray
    path_indices: np.ndarray
    seed: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} is not a grid point")
        return i

    def at(self, t: float) -> np.ndarray:
        return self.values[:, self.index_of(t)]

    def row(self, j: int) -> "SamplePath":
        sl = slice(j, j + 1)
        return SamplePath(self.name, self.grid, self.values[sl], self.tau[sl], self.v_tau[sl],
                          self.absorbed_at[sl], self.flags[sl], self.path_indices[sl], self.seed,
                          {k: (v[sl] if isinstance(v, np.ndarray) and v.shape[:1] == (self.n_paths,)
                               else v) for k, v in self.diagnostics.items()})


def _flags(grid, tau, zero, released):
    t = grid[None, :]
    tau = np.where(np.isnan(tau), np.inf, tau)[:, None]
    zero = np.where(np.isnan(zero), np.inf, zero)[:, None]
    f = np.where(t < tau, FLAG_PRE, FLAG_POST)
    f = np.where(t >= zero, FLAG_RELEASED if released else FLAG_ABSORBED, f)
    return f.astype(np.int8)


def _require_valid(spec: TimeChangeSpec, allow_invalid: bool):
    if allow_invalid:
        return
    rep = validate(spec, min(1e-2, spec.t_max))
    if not rep.ok:
        raise AssumptionError(
            f"time change {spec.name} fails admissibility (assumption1={rep.assumption1_ok}, "
            f"assumption2={rep.assumption2_ok}); pass allow_invalid=True to simulate anyway"
        )


def _check_grid(spec, grid):
    if grid[0] != 0.0:
        raise DomainError("grids start at 0")
    if grid[-1] > spec.t_max * (1 + 1e-12):
        raise DomainError("grid extends beyond t_max")


def _bridge_locate(rng, v0, v1, z0, z1, tol):
    """First zero of a Brownian bridge known to hit 0 on [v0, v1], exactly in law.

    Repeated bisection: the midpoint is drawn from the free bridge and kept
    with the probability that some half still contains a zero; the half with
    the first zero is then chosen with its conditional probability.
    """
    normals = rng.standard_normal(256).tolist()
    unifs = rng.random(256).tolist()
    j = 0
    while v1 - v0 > tol:
        vm = 0.5 * (v0 + v1)
        mean = 0.5 * (z0 + z1)
        sd = math.sqrt(0.25 * (v1 - v0))
        while True:
            if j == len(normals):
                normals = rng.standard_normal(256).tolist()
                unifs = rng.random(256).tolist()
                j = 0
            zm = mean + sd * normals[j]
            u = unifs[j]
            j += 1
            if zm <= 0:
                pl = pr = 1.0
            else:
                pl = math.exp(-2.0 * z0 * zm / (vm - v0))
                pr = 1.0 if z1 <= 0 else math.exp(-2.0 * zm * z1 / (v1 - vm))
            acc = 1.0 - (1.0 - pl) * (1.0 - pr)
            if u < acc:
                break
        # given acceptance u is uniform on [0, acc) and picks the half
        if u < pl:
            v1, z1 = vm, zm
        else:
            v0, z0 = vm, zm
    return 0.5 * (v0 + v1)


def simulate_Z(spec: TimeChangeSpec, noise: NoiseBundle, *, bridge_correction: bool = True,
               allow_invalid: bool = False) -> SamplePath:
    """Z = 1 + int sigma dW on the grid, with tau and V(tau)."""
    _require_valid(spec, allow_invalid)
    grid = noise.grid
    _check_grid(spec, grid)
    V = np.asarray(v_of(spec, grid))
    dV = np.diff(V)
    Z = np.empty((noise.n_paths, len(grid)))
    Z[:, 0] = 1.0
    Z[:, 1:] = 1.0 + np.cumsum(noise.normals(STREAM_W) * np.sqrt(dV)[None, :], axis=1)
    z0, z1 = Z[:, :-1], Z[:, 1:]
    direct = z1 <= 0
    if bridge_correction:
        with np.errstate(over="ignore"):
            prob = np.where(direct, 1.0, np.exp(-2.0 * z0 * np.maximum(z1, 0) / dV[None, :]))
        cross = noise.uniforms(STREAM_CROSS) < prob
    else:
        cross = direct
    rows = np.flatnonzero(cross.any(axis=1))
    first = np.argmax(cross[rows], axis=1)
    v_tau = np.full(noise.n_paths, np.nan)
    for row, i in zip(rows, first):
        a, b, za, zb = V[i], V[i + 1], Z[row, i], Z[row, i + 1]
        if bridge_correction:
            rng = generator(noise.seed, noise.path_indices[row], STREAM_BISECT)
            v_tau[row] = _bridge_locate(rng, a, b, za, zb, 1e-11 * (1.0 + b))
        else:
            v_tau[row] = a + (b - a) * za / (za - zb)
    tau = np.full_like(v_tau, np.nan)
    hit = ~np.isnan(v_tau)
    if hit.any():
        tau[hit] = np.asarray(v_inverse(spec, v_tau[hit]))
    flags = _flags(grid, tau, np.full_like(tau, np.nan), False)
    return SamplePath("Z", grid, Z, tau, v_tau, np.full_like(tau, np.nan), flags,
                      noise.path_indices.copy(), noise.seed,
                      {"n_crossings": int(hit.sum()), "bridge_correction": bridge_correction})


def _vparams(spec):
    fam = spec.family
    empty = np.zeros(2)
    if isinstance(fam, PowerSingular):
        return 0, fam.gamma, fam.alpha, empty, empty
    if isinstance(fam, Affine):
        return 1, fam.c, 0.0, empty, empty
    assert isinstance(fam, Custom)
    return 2, 0.0, 0.0, np.asarray(fam.knots, float), np.asarray(fam._vknots, float)


def simulate_coupled(spec: TimeChangeSpec, noise: NoiseBundle, z_path: SamplePath | None,
                     ctrl: StepController, components, *, after_zero: str = "freeze",
                     allow_invalid: bool = False, backend: str | None = None) -> dict:
    """Simulate several B-driven processes jointly on shared noise.

    ``components`` is a list of dicts with keys ``name``, ``kind`` (one of X,
    Y, Y2, R, U, SQ), ``x0`` (scalar or per-path array), and optionally
    ``absorb`` (bool), ``param`` (constant drift for SQ) and ``start``
    (grid index of the initial value).  Returns ``{name: SamplePath}``.
    """
    _require_valid(spec, allow_invalid)
    grid = noise.grid
    _check_grid(spec, grid)
    if after_zero not in ("freeze", "continue"):
        raise DomainError("after_zero must be 'freeze' or 'continue'")
    P, n = noise.n_paths, len(grid)
    if z_path is None:
        zvals = np.ones((P, n))
        tau = np.zeros(P)
        vtau = np.full(P, np.inf)
    else:
        if z_path.values.shape != (P, n) or not np.array_equal(z_path.grid, grid):
            raise DomainError("z_path does not match the noise bundle")
        zvals = np.ascontiguousarray(z_path.values)
        tau = np.where(np.isnan(z_path.tau), np.inf, z_path.tau)
        vtau = np.where(np.isnan(z_path.v_tau), np.inf, z_path.v_tau)
    K = len(components)
    kinds = np.array([_KINDS[c["kind"]] for c in components], dtype=np.int32)
    param = np.array([float(c.get("param", 0.0)) for c in components])
    absorb = np.array([int(bool(c.get("absorb", c["kind"] == "X"))) for c in components],
                      dtype=np.int32)
    start = np.array([int(c.get("start", 0)) for c in components], dtype=np.int32)
    x0 = np.empty((P, K))
    for k, c in enumerate(components):
        x0[:, k] = c["x0"]
    dB = np.ascontiguousarray(noise.increments_B)
    keys = noise.refine_keys()
    vk, p0, p1, knots, vknots = _vparams(spec)
    out = np.empty((P, K, n))
    first_zero = np.empty((P, K))
    min_pre = np.empty((P, K))
    at_tau = np.empty((P, K))
    clamps = np.zeros((P, K), dtype=np.int64)
    refl = np.zeros((P, K), dtype=np.int64)
    subs = np.zeros(P, dtype=np.int64)
    mod = _backend.get(backend)
    az = 1 if after_zero == "continue" else 0

    def run(lo, hi):
        mod.euler_multi(grid, zvals[lo:hi], tau[lo:hi], vtau[lo:hi], dB[lo:hi], keys[lo:hi],
                        kinds, param, absorb, np.ascontiguousarray(x0[lo:hi]), start, vk, p0, p1,
                        knots, vknots, ctrl.dt_min, ctrl.terminal_guard, ctrl.positivity_guard,
                        ctrl.drift_cap, az, out[lo:hi], first_zero[lo:hi], min_pre[lo:hi],
                        at_tau[lo:hi], clamps[lo:hi], refl[lo:hi], subs[lo:hi])

    if mod is _backend._fallback:
        run(0, P)
    else:
        _backend.run_chunked(run, P)
    tau_out = np.where(np.isinf(tau), np.nan, tau) if z_path is not None else np.full(P, np.nan)
    vtau_out = np.where(np.isinf(vtau), np.nan, vtau) if z_path is not None else np.full(P, np.nan)
    res = {}
    for k, c in enumerate(components):
        kind = c["kind"]
        zero = first_zero[:, k].copy()
        if kind == "X" or (kind in ("Y", "Y2") and absorb[k]):
            flags = _flags(grid, tau_out, zero, after_zero == "continue")
            absorbed = zero
        elif kind == "R" or z_path is None:
            flags = np.full((P, n), FLAG_PRE, dtype=np.int8)
            absorbed = np.full(P, np.nan)
        else:
            flags = _flags(grid, tau_out, np.full(P, np.nan), False)
            absorbed = np.full(P, np.nan)
        diag = {
            "first_nonpositive": zero,
            "min_pre_tau": min_pre[:, k].copy(),
            "value_at_tau": at_tau[:, k].copy(),
            "clamps": clamps[:, k].copy(),
            "reflections": refl[:, k].copy(),
            "substeps": subs,
            "after_zero": after_zero,
            "backend": _backend.name(backend),
        }
        res[c["name"]] = SamplePath(c["name"], grid, out[:, k, :].copy(), tau_out.copy(),
                                    vtau_out.copy(), absorbed, flags, noise.path_indices.copy(),
                                    noise.seed, diag)
    return res


def simulate_X(spec, noise, z_path, ctrl, *, after_zero="freeze", post_drift=True,
               allow_invalid=False, backend=None) -> SamplePath:
    """Euler scheme for X: q_x/q drift before tau, Bessel-bridge drift after.

    ``post_drift=False`` is the ablation in which X runs as plain Brownian
    motion after tau (still absorbed at its first zero).
    """
    comp = {"name": "X", "kind": "X" if post_drift else "Y", "x0": 1.0, "absorb": True}
    return simulate_coupled(spec, noise, z_path, ctrl, [comp], after_zero=after_zero,
                            allow_invalid=allow_invalid, backend=backend)["X"]


def simulate_Y(spec, noise, z_path, ctrl, y: float = 1.0, *, variant: str = "full",
               allow_invalid=False, backend=None) -> SamplePath:
    """Y = y + B + int_0^{tau ^ t} drift ds, never absorbed.

    ``variant='full'`` uses q_x/q; ``variant='ratio'`` keeps only the
    f(2yz/t)/y part, whose square is the process U.
    """
    if not y > 0:
        raise DomainError("y must be positive")
    kind = {"full": "Y", "ratio": "Y2"}[variant]
    comp = {"name": "Y", "kind": kind, "x0": y, "absorb": False}
    return simulate_coupled(spec, noise, z_path, ctrl, [comp], allow_invalid=allow_invalid,
                            backend=backend)["Y"]


def simulate_U(spec, noise, z_path, ctrl, y: float = 1.0, *, allow_invalid=False,
               backend=None) -> SamplePath:
    """Squared process U with U_0 = y^2, absolute value under the root."""
    if not y > 0:
        raise DomainError("y must be positive")
    comp = {"name": "U", "kind": "U", "x0": y * y}
    return simulate_coupled(spec, noise, z_path, ctrl, [comp], allow_invalid=allow_invalid,
                            backend=backend)["U"]


def r_start_values(spec: TimeChangeSpec, noise: NoiseBundle, y: float = 1.0) -> np.ndarray:
    """Exact value of R at the first grid point after 0.

    The first coordinate of the 3-d Brownian motion reuses the first B normal
    so that R starts coupled to the other B-driven paths.
    """
    t1 = float(noise.grid[1])
    lam = float(lambda_of(spec, t1))
    big = math.sqrt(float(Lambda_of(spec, t1)))
    nb = noise.normals(STREAM_B)[:, 0]
    w2 = np.array([generator(noise.seed, p, STREAM_BES3 + 1).standard_normal() for p in noise.path_indices])
    w3 = np.array([generator(noise.seed, p, STREAM_BES3 + 2).standard_normal() for p in noise.path_indices])
    return lam * np.sqrt((y + big * nb) ** 2 + (big * w2) ** 2 + (big * w3) ** 2)


def simulate_R_sde(spec, noise, ctrl, y: float = 1.0, *, allow_invalid=False,
                   backend=None) -> SamplePath:
    """Euler scheme for dR = dB + (1/R - R/(V(s)-s)) ds started exactly at the first grid point."""
    _require_valid(spec, allow_invalid)
    if abs(noise.grid[1] - ctrl.dt_min) > 1e-15:
        raise DomainError("the grid must have its first positive point at dt_min")
    r1 = r_start_values(spec, noise, y)
    comp = {"name": "R", "kind": "R", "x0": r1, "start": 1}
    path = simulate_coupled(spec, noise, None, ctrl, [comp], allow_invalid=allow_invalid,
                            backend=backend)["R"]
    path.values[:, 0] = y
    return path


def construct_R_exact(spec: TimeChangeSpec, noise: NoiseBundle, y: float = 1.0,
                      *, allow_invalid=False) -> SamplePath:
    """lambda(t) times the norm of a 3-d Brownian motion from (y, 0, 0) read at Lambda(t)."""
    _require_valid(spec, allow_invalid)
    grid = noise.grid
    lam = np.asarray(lambda_of(spec, grid))
    Lam = np.asarray(Lambda_of(spec, grid))
    dL = np.sqrt(np.diff(Lam))[None, :]
    coords = []
    for j in range(3):
        w = np.zeros((noise.n_paths, len(grid)))
        w[:, 1:] = np.cumsum(noise.normals(STREAM_BES3 + j) * dL, axis=1)
        coords.append(w)
    coords[0] += y
    rho = np.sqrt(coords[0] ** 2 + coords[1] ** 2 + coords[2] ** 2)
    vals = lam[None, :] * rho
    P = noise.n_paths
    return SamplePath("R_exact", grid, vals, np.full(P, np.nan), np.full(P, np.nan),
                      np.full(P, np.nan), np.zeros_like(vals, dtype=np.int8),
                      noise.path_indices.copy(), noise.seed, {"lambda": lam, "Lambda": Lam})


def bessel_bridge_exact(x_start, t_start: float, t_end: float, noise: NoiseBundle) -> SamplePath:
    """Norm of a 3-d Brownian bridge from (x_start, 0, 0) to the origin.

    The bundle's grid, rescaled affinely onto [t_start, t_end], gives the
    sampling times.  ``x_start`` may be a scalar or one value per path.
    """
    if not t_end > t_start:
        raise DomainError("t_end must exceed t_start")
    x_start = np.broadcast_to(np.asarray(x_start, dtype=float), (noise.n_paths,))
    if np.any(~(x_start > 0)):
        raise DomainError("x_start must be positive")
    g = noise.grid
    T = t_end - t_start
    u = (g - g[0]) / (g[-1] - g[0]) * T
    u[-1] = T
    du = np.sqrt(np.diff(u))[None, :]
    frac = (u / T)[None, :]
    sq = np.zeros((noise.n_paths, len(g)))
    for j in range(3):
        w = np.zeros((noise.n_paths, len(g)))
        w[:, 1:] = np.cumsum(noise.normals(STREAM_BRIDGE3 + j) * du, axis=1)
        b = w - frac * w[:, -1:]
        if j == 0:
            b = b + (1.0 - frac) * x_start[:, None]
        sq += b * b
    vals = np.sqrt(sq)
    vals[:, -1] = 0.0
    P = noise.n_paths
    return SamplePath("bessel_bridge", t_start + u, vals, np.full(P, np.nan), np.full(P, np.nan),
                      np.full(P, float(t_end)), np.zeros_like(vals, dtype=np.int8),
                      noise.path_indices.copy(), noise.seed, {})


def simulate_bridge_euler(spec, x_start, duration: float, noise: NoiseBundle, ctrl: StepController,
                          *, backend=None) -> SamplePath:
    """The post-tau regime of X on its own: a Bessel-bridge Euler path from
    ``x_start`` at time 0 to zero at ``duration``, on the bundle's grid."""
    P, n = noise.n_paths, len(noise.grid)
    if not 0 < duration <= noise.grid[-1]:
        raise DomainError("duration must lie in (0, grid end]")
    fake_z = SamplePath("Z", noise.grid, np.ones((P, n)), np.zeros(P), np.full(P, float(duration)),
                        np.full(P, np.nan), np.zeros((P, n), np.int8), noise.path_indices, noise.seed)
    comp = {"name": "X", "kind": "X", "x0": np.broadcast_to(np.asarray(x_start, float), (P,))}
    return simulate_coupled(spec, noise, fake_z, ctrl, [comp], backend=backend)["X"]


@dataclass
class ComparisonSummary:
    """Gap statistics of path_a - path_b before a stopping time."""

    max_gap: float
    min_gap: float
    violation_fraction: float
    per_path_max: np.ndarray
    n_paths: int
    tolerance: float


def couple_compare(path_a: SamplePath, path_b: SamplePath, stop=None, *, inclusive: bool = False,
                   tolerance: float = 0.0) -> ComparisonSummary:
    """Compare two coupled paths grid point by grid point up to ``stop``.

    ``stop`` is a scalar, one time per path, or None for the whole grid; NaN
    entries mean no stopping.  A path violates when its gap exceeds
    ``tolerance`` somewhere in the window.
    """
    if not np.array_equal(path_a.grid, path_b.grid) or path_a.values.shape != path_b.values.shape:
        raise DomainError("paths must share the grid and batch shape")
    if not np.array_equal(path_a.path_indices, path_b.path_indices) or path_a.seed != path_b.seed:
        raise DomainError("paths must come from the same noise bundle")
    P = path_a.n_paths
    if stop is None:
        stop = np.full(P, np.inf)
    stop = np.broadcast_to(np.asarray(stop, dtype=float), (P,))
    stop = np.where(np.isnan(stop), np.inf, stop)
    t = path_a.grid[None, :]
    window = (t <= stop[:, None]) if inclusive else (t < stop[:, None])
    gap = path_a.values - path_b.values
    ok = window & ~np.isnan(gap)
    with np.errstate(invalid="ignore"):
        per_max = np.where(ok.any(axis=1), np.max(np.where(ok, gap, -np.inf), axis=1), np.nan)
        per_min = np.where(ok.any(axis=1), np.min(np.where(ok, gap, np.inf), axis=1), np.nan)
    valid = ~np.isnan(per_max)
    mx = float(np.max(per_max[valid])) if valid.any() else 0.0
    mn = float(np.min(per_min[valid])) if valid.any() else 0.0
    viol = float(np.mean(per_max[valid] > tolerance)) if valid.any() else 0.0
    return ComparisonSummary(mx, mn, viol, per_max, P, tolerance)


def write_csv(fh, z_path: SamplePath, x_path: SamplePath, row: int = 0):
    """One row per grid point: t, Z, X, regime flag of X."""
    fh.write("t,Z,X,flag\n")
    for i, t in enumerate(x_path.grid):
        fh.write(f"{float(t)!r},{float(z_path.values[row, i])!r},{float(x_path.values[row, i])!r},"
                 f"{int(x_path.flags[row, i])}\n")


_MAGIC = b"DBRG"


def write_binary(fh, path: SamplePath, config_hash: str = ""):
    """Compact little-endian dump: header, grid, then values row by row."""
    h = hashlib.sha256(config_hash.encode()).digest()[:16] if config_hash else bytes(16)
    P, n = path.values.shape
    fh.write(_MAGIC + struct.pack("<HQ16sQQ", 1, path.seed & (2**64 - 1), h, P, n))
    fh.write(np.asarray(path.grid, dtype="<f8").tobytes())
    for arr in (path.tau, path.v_tau, path.absorbed_at):
        fh.write(np.asarray(arr, dtype="<f8").tobytes())
    fh.write(np.asarray(path.values, dtype="<f8").tobytes())


def read_binary(fh) -> dict:
    data = fh.read() if not isinstance(fh, (bytes, bytearray)) else bytes(fh)
    buf = io.BytesIO(data)
    if buf.read(4) != _MAGIC:
        raise DomainError("not a path block")
    version, seed, h, P, n = struct.unpack("<HQ16sQQ", buf.read(struct.calcsize("<HQ16sQQ")))
    grid = np.frombuffer(buf.read(8 * n), dtype="<f8")
    meta = [np.frombuffer(buf.read(8 * P), dtype="<f8") for _ in range(3)]
    values = np.frombuffer(buf.read(8 * P * n), dtype="<f8").reshape(P, n)
    return {"version": version, "seed": seed, "config_hash": h, "grid": grid, "tau": meta[0],
            "v_tau": meta[1], "absorbed_at": meta[2], "values": values}
