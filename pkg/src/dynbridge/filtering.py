"""Particle approximation of the law of Z_s given the X path, conditioned on
Z surviving until a fixed horizon t.

Under the conditioned measure Z is an h-transform of time-changed Brownian
motion (drift sigma^2 H_x/H) and X keeps its q_x/q drift.  The filter is a
bootstrap filter: particles move with the conditioned signal dynamics and
are reweighted by the discretised Girsanov density of the observed X.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import _backend
from .ecdf import ks_distance
from .errors import DegenerateFilterError, DomainError
from .kernels import f_ratio, htrans_density, log_h_surv, log_q_killed, z_posterior
from .noise import STREAM_COND_BETA, STREAM_PARTICLES, NoiseBundle, generator, make_grid
from .paths import SamplePath, StepController, _require_valid, simulate_coupled
from .timechange import TimeChangeSpec, v_of

__all__ = [
    "ObservationRecord",
    "ParticleCloud",
    "FilterResult",
    "observation_grid",
    "simulate_conditioned_pair",
    "filter_run",
    "innovation_path",
    "posterior_to_unconditioned",
    "closed_form_posterior",
    "write_trace_csv",
]


def observation_grid(t: float, dt_base: float = 1e-3, eps: float | None = None,
                     dt_min: float = 1e-9, ratio: float = 0.1) -> np.ndarray:
    """Grid on [0, t - eps]; eps defaults to 1e-3 t."""
    eps = 1e-3 * t if eps is None else eps
    if not 0 < eps < t:
        raise DomainError("need 0 < eps < t")
    return make_grid(t - eps, dt_base, dt_min, ratio)


def _schedule(spec, grid, t, dv_max, guard):
    """V-time sub-steps per observation step: (u0, du, n_sub) triples."""
    V = np.asarray(v_of(spec, grid))
    vt = float(v_of(spec, t))
    out = []
    for i in range(len(grid) - 1):
        span = V[i + 1] - V[i]
        limit = min(dv_max, guard * (vt - V[i + 1]))
        n_sub = max(1, int(math.ceil(span / limit)))
        out.append((float(V[i]), span / n_sub, n_sub))
    return out, vt


@dataclass
class ObservationRecord:
    """Observed X paths (one row each) on a grid ending before the horizon."""

    grid: np.ndarray
    x_values: np.ndarray
    horizon: float
    seed: int = 0
    path_indices: np.ndarray | None = None

    def __post_init__(self):
        self.x_values = np.atleast_2d(self.x_values)
        if self.x_values.shape[1] != len(self.grid):
            raise DomainError("x_values do not match the grid")
        if self.path_indices is None:
            self.path_indices = np.arange(self.x_values.shape[0])

    @property
    def n_paths(self) -> int:
        return self.x_values.shape[0]

    def single(self, j: int) -> "ObservationRecord":
        return ObservationRecord(self.grid, self.x_values[j:j + 1], self.horizon, self.seed,
                                 self.path_indices[j:j + 1])


def _propagate(mod, z, sched_step, vt, normals, drift_cap, counts):
    u0, du, n_sub = sched_step
    mod.h_propagate(z, u0, du, n_sub, vt, normals, drift_cap, counts)


def simulate_conditioned_pair(spec: TimeChangeSpec, t: float, noise: NoiseBundle, *,
                              dv_max: float = 1e-3, guard: float = 0.1,
                              ctrl: StepController | None = None, allow_invalid: bool = False,
                              backend: str | None = None):
    """Simulate (X, Z) under the measure conditioned on Z staying positive up to t.

    The bundle's grid is the observation grid (see ``observation_grid``).  Z
    is advanced by Euler steps in V-time, X by the shared Euler kernel with
    Z frozen at the left grid point.
    """
    _require_valid(spec, allow_invalid)
    if not 0 < t < spec.t_max:
        raise DomainError("horizon must lie in (0, t_max)")
    grid = noise.grid
    if grid[-1] >= t:
        raise DomainError("observation grid must end before the horizon")
    ctrl = ctrl or StepController()
    sched, vt = _schedule(spec, grid, t, dv_max, guard)
    total = sum(s[2] for s in sched)
    P, n = noise.n_paths, len(grid)
    mod = _backend.get(backend)
    Z = np.empty((P, n))
    Z[:, 0] = 1.0
    counts = np.zeros(2, dtype=np.int64)
    chunk = 512
    for lo in range(0, P, chunk):
        hi = min(P, lo + chunk)
        draws = np.stack([generator(noise.seed, p, STREAM_COND_BETA).standard_normal(total)
                          for p in noise.path_indices[lo:hi]])
        z = np.ones(hi - lo)
        pos = 0
        for i, st in enumerate(sched):
            nrm = np.ascontiguousarray(draws[:, pos:pos + st[2]].T)
            pos += st[2]
            _propagate(mod, z, st, vt, nrm, ctrl.drift_cap, counts)
            Z[lo:hi, i + 1] = z
    zpath = SamplePath("Z_conditioned", grid, Z, np.full(P, np.nan), np.full(P, np.nan),
                       np.full(P, np.nan), np.zeros((P, n), np.int8), noise.path_indices.copy(),
                       noise.seed, {"reflections": int(counts[0]), "clamps": int(counts[1])})
    fake = SamplePath("Z", grid, Z, np.full(P, np.nan), np.full(P, np.nan), np.full(P, np.nan),
                      zpath.flags, noise.path_indices, noise.seed)
    x = simulate_coupled(spec, noise, fake, ctrl, [{"name": "X", "kind": "Y", "x0": 1.0}],
                         backend=backend)["X"]
    obs = ObservationRecord(grid, x.values, float(t), noise.seed, noise.path_indices.copy())
    zpath.diagnostics["x_min"] = x.diagnostics["min_pre_tau"]
    return obs, zpath


@dataclass
class ParticleCloud:
    """Weighted particles approximating the law of Z_s."""

    positions: np.ndarray
    log_weights: np.ndarray
    time: float
    horizon: float

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - logsumexp(self.log_weights))
        return w / w.sum()

    @property
    def ess(self) -> float:
        w = self.weights
        return float(1.0 / np.sum(w * w))

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.positions))

    @property
    def sd(self) -> float:
        w = self.weights
        m = np.dot(w, self.positions)
        return float(math.sqrt(max(np.dot(w, (self.positions - m) ** 2), 0.0)))

    def ks(self, cdf) -> float:
        return ks_distance(self.positions, cdf, self.weights)


@dataclass
class FilterResult:
    grid: np.ndarray
    x_values: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    ess: np.ndarray
    pi_kappa: np.ndarray
    clouds: list
    final: ParticleCloud
    n_resamples: int = 0
    large_increments: int = 0
    diagnostics: dict = field(default_factory=dict)

    def cloud_at(self, s: float) -> ParticleCloud:
        for c in self.clouds:
            if abs(c.time - s) <= 1e-12 * max(1.0, s):
                return c
        raise KeyError(f"no cloud kept at s={s}")


def _kappa(gap, x, z):
    return (z - x) / gap + np.asarray(f_ratio(2.0 * x * z / gap)) / x


def _resample(rng, w, scheme):
    N = len(w)
    if scheme == "systematic":
        u = (rng.random() + np.arange(N)) / N
    elif scheme == "stratified":
        u = (rng.random(N) + np.arange(N)) / N
    else:
        raise DomainError(f"unknown resampling scheme {scheme!r}")
    idx = np.searchsorted(np.cumsum(w), u, side="right")
    return np.minimum(idx, N - 1)


def filter_run(obs: ObservationRecord, n_particles: int, spec: TimeChangeSpec, t: float,
               resample_threshold: float = 0.5, *, seed: int | None = None, row: int = 0,
               scheme: str = "systematic", kappa_zero: bool = False, keep_times=(),
               dv_max: float = 1e-3, guard: float = 0.1, drift_cap: float = 5.0,
               dt_min: float = 1e-9, backend: str | None = None) -> FilterResult:
    """Bootstrap particle filter for Z given one observed X path.

    ``keep_times`` lists grid times whose full clouds are stored; summary
    statistics are kept for every step.  ``kappa_zero`` switches the
    reweighting off, which leaves the prior (prediction-only) law.
    """
    if n_particles < 100:
        raise DomainError("n_particles must be at least 100")
    if not 0 < resample_threshold <= 1:
        raise DomainError("resample_threshold must lie in (0, 1]")
    if abs(obs.horizon - t) > 1e-12:
        raise DomainError("observation horizon differs from t")
    grid = obs.grid
    x = obs.x_values[row]
    if np.any(~(x > 0)):
        raise DomainError("observations must be strictly positive")
    seed = obs.seed if seed is None else seed
    rng = generator(seed, int(obs.path_indices[row]), STREAM_PARTICLES)
    sched, vt = _schedule(spec, grid, t, dv_max, guard)
    mod = _backend.get(backend)
    n = len(grid)
    keep = {int(np.argmin(np.abs(grid - s))) for s in keep_times}
    N = n_particles
    z = np.ones(N)
    logw = np.full(N, -math.log(N))
    mean = np.empty(n)
    sd = np.empty(n)
    ess = np.empty(n)
    pik = np.empty(n - 1)
    mean[0], sd[0], ess[0] = 1.0, 0.0, float(N)
    clouds = []
    if 0 in keep:
        clouds.append(ParticleCloud(z.copy(), logw.copy(), float(grid[0]), t))
    counts = np.zeros(2, dtype=np.int64)
    n_res = 0
    big = 0
    for i in range(n - 1):
        s = float(grid[i])
        ds = float(grid[i + 1]) - s
        dx = x[i + 1] - x[i]
        se = s if s > dt_min else dt_min
        gap = float(v_of(spec, se)) - se
        w = np.exp(logw - logsumexp(logw))
        kap = np.zeros(N) if kappa_zero else _kappa(gap, x[i], z)
        pik[i] = float(np.dot(w, kap))
        inc = kap * dx - 0.5 * kap * kap * ds
        if np.max(np.abs(inc)) >= 10:
            big += 1
        logw = logw + inc
        logw -= logsumexp(logw)
        w = np.exp(logw)
        w /= w.sum()
        e = 1.0 / float(np.sum(w * w))
        if e < 10:
            raise DegenerateFilterError(f"effective sample size {e:.2f} at s={s:.6g}",
                                        step=i, time=s, ess=e)
        if e < resample_threshold * N:
            idx = _resample(rng, w, scheme)
            z = z[idx]
            logw = np.full(N, -math.log(N))
            n_res += 1
        nrm = rng.standard_normal((sched[i][2], N))
        _propagate(mod, z, sched[i], vt, nrm, drift_cap, counts)
        w = np.exp(logw - logsumexp(logw))
        mean[i + 1] = float(np.dot(w, z))
        sd[i + 1] = float(math.sqrt(max(np.dot(w, (z - mean[i + 1]) ** 2), 0.0)))
        ess[i + 1] = e
        if i + 1 in keep:
            clouds.append(ParticleCloud(z.copy(), logw.copy(), float(grid[i + 1]), t))
    if big:
        warnings.warn(f"{big} observation steps had log-weight increments of magnitude >= 10; "
                      "refine the observation grid", RuntimeWarning, stacklevel=2)
    final = ParticleCloud(z, logw, float(grid[-1]), t)
    return FilterResult(grid, x, mean, sd, ess, pik, clouds, final, n_res, big,
                        {"reflections": int(counts[0]), "clamps": int(counts[1])})


def innovation_path(obs: ObservationRecord, result: FilterResult, row: int = 0) -> np.ndarray:
    """I_s = X_s - int_0^s pi_r(kappa_r) dr on the observation grid."""
    x = obs.x_values[row]
    if len(result.pi_kappa) != len(x) - 1:
        raise DomainError("filter result is not aligned with the observations")
    drift = np.concatenate([[0.0], np.cumsum(result.pi_kappa * np.diff(obs.grid))])
    return x - drift


def closed_form_posterior(spec: TimeChangeSpec, t: float, s: float, x_s: float):
    """Density and CDF of Z_s given the observations, as a tabulated density."""
    return htrans_density(float(v_of(spec, t)), s, float(v_of(spec, s)), x_s)


def closed_form_mean(spec, t, s, x_s) -> float:
    vt, vs = float(v_of(spec, t)), float(v_of(spec, s))
    lden = float(log_h_surv(vt - s, x_s))

    def f(zz):
        return zz * math.exp(float(log_q_killed(vs - s, x_s, zz)) + float(log_h_surv(vt - vs, zz)) - lden)

    up = x_s + 14.0 * math.sqrt(vs - s)
    val, _ = integrate.quad(f, 0.0, up, epsabs=1e-12, epsrel=1e-10, limit=200)
    return val


def posterior_to_unconditioned(cloud: ParticleCloud, spec: TimeChangeSpec, t: float,
                               x_s: float) -> dict:
    """Compare the particle posterior near the horizon with the density of Z
    given the X path on the event that Z has not yet hit zero."""
    dens = z_posterior(spec, cloud.time, x_s)
    if np.any(cloud.positions <= 0):
        raise DomainError("particle positions must be positive")
    return {
        "s": cloud.time,
        "t": t,
        "ks": cloud.ks(dens.cdf),
        "particle_mean": cloud.mean,
        "closed_form_mean": dens.mean,
        "mass_nonpositive": float(np.sum(cloud.weights[cloud.positions <= 0])),
    }


def write_trace_csv(fh, spec: TimeChangeSpec, t: float, result: FilterResult, every: int = 10):
    """s, posterior_mean, posterior_sd, ESS, closed_form_mean per step.

    The closed-form mean is a quadrature, so it is filled in every
    ``every``-th step and left empty elsewhere.
    """
    fh.write("s,posterior_mean,posterior_sd,ESS,closed_form_mean\n")
    for i, s in enumerate(result.grid):
        cf = ""
        if i > 0 and (i % every == 0 or i == len(result.grid) - 1):
            cf = repr(closed_form_mean(spec, t, float(s), float(result.x_values[i])))
        vals = (float(s), float(result.mean[i]), float(result.sd[i]), float(result.ess[i]))
        fh.write(",".join(repr(v) for v in vals) + f",{cf}\n")
