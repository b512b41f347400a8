"""Closed-form densities, survival functions and drift ratios.

All functions accept scalars or numpy arrays and broadcast.  Densities are
assembled in log space; the killed-Brownian kernel uses a single ``expm1``
for the difference of Gaussians, which is where relative accuracy is lost
first when 2xy/t is small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline
from scipy.special import erf, erfc

from .errors import DomainError, NumericError, SingularityError
from .timechange import TimeChangeSpec, sigma2_of, v_of

__all__ = [
    "ell",
    "log_ell",
    "h_surv",
    "log_h_surv",
    "h_surv_x",
    "q_killed",
    "log_q_killed",
    "f_ratio",
    "drift_pre",
    "drift_post",
    "drift_h",
    "eta",
    "p_htrans",
    "TabulatedDensity",
    "z_posterior",
    "tau_posterior",
]

_LOG_2PI = math.log(2.0 * math.pi)
_SERIES_CUTOFF = 1e-5


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _positive(name, v, err=DomainError):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise err(f"{name} must be positive")
    return v


def log_ell(t, a):
    t = _positive("t", t)
    a = _positive("a", a)
    return _out(np.log(a) - 1.5 * np.log(t) - 0.5 * _LOG_2PI - a * a / (2.0 * t))


def ell(t, a):
    """Density at t of the first passage time of standard BM to level a."""
    return _out(np.exp(log_ell(t, a)))


def h_surv(t, a):
    """H(t, a) = P[T_a > t] = erf(a / sqrt(2t))."""
    t = _positive("t", t)
    a = _positive("a", a)
    return _out(erf(a / np.sqrt(2.0 * t)))


def log_h_surv(t, a):
    t = _positive("t", t)
    a = _positive("a", a)
    w = a / np.sqrt(2.0 * t)
    with np.errstate(divide="ignore"):
        # log1p(-erfc) keeps digits once erf is within rounding of 1
        return _out(np.where(w > 1.0, np.log1p(-erfc(w)), np.log(erf(w))))


def h_surv_x(t, a):
    """Partial derivative of H(t, a) in a."""
    t = _positive("t", t)
    a = _positive("a", a)
    return _out(np.sqrt(2.0 / (math.pi * t)) * np.exp(-a * a / (2.0 * t)))


def log_q_killed(t, x, y):
    t = _positive("t", t)
    x = _positive("x", x)
    y = _positive("y", y)
    d = x - y
    return _out(
        -d * d / (2.0 * t) - 0.5 * (_LOG_2PI + np.log(t)) + np.log(-np.expm1(-2.0 * x * y / t))
    )


def q_killed(t, x, y):
    """Transition density of Brownian motion killed at 0."""
    return _out(np.exp(log_q_killed(t, x, y)))


def f_ratio(y):
    """y / (e^y - 1), with f(0) = 1 and a three-term series near 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("f_ratio needs y >= 0")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        direct = y / np.expm1(y)
    series = 1.0 - y / 2.0 + y * y / 12.0
    return _out(np.where(y < _SERIES_CUTOFF, series, direct))


def drift_pre(t, x, z):
    """q_x / q at (t, x, z); z = 0 gives the limit 1/x - x/t."""
    t = _positive("t", t, SingularityError)
    x = _positive("x", x, SingularityError)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("z must be nonnegative")
    return _out((z - x) / t + f_ratio(2.0 * x * z / t) / x)


def drift_post(t_remaining, x):
    """Bessel-bridge drift 1/x - x / (time remaining)."""
    t_remaining = _positive("t_remaining", t_remaining, SingularityError)
    x = _positive("x", x, SingularityError)
    return _out(1.0 / x - x / t_remaining)


def drift_h(delta, z):
    """H_x / H at (delta, z) from the erf closed forms."""
    delta = _positive("delta", delta)
    z = _positive("z", z)
    w = z / np.sqrt(2.0 * delta)
    hx = np.sqrt(2.0 / (math.pi * delta)) * np.exp(-w * w)
    with np.errstate(invalid="ignore"):
        return _out(np.where(w > 6.0, hx, hx / erf(w)))


def _eta_scalar(delta, y):
    a = y * y / (2.0 * delta)
    # with u = delta / w and v = a w both tails become lower incomplete gamma
    # integrals on [0, a]; the algebraic weight absorbs the v^(+-1/2) endpoint
    top_lim = min(a, 60.0)
    num, e1 = integrate.quad(lambda v: math.exp(-v), 0.0, top_lim, weight="alg",
                             wvar=(0.5, 0.0), epsabs=0.0, epsrel=1e-12, limit=200)
    den, e2 = integrate.quad(lambda v: math.exp(-v), 0.0, top_lim, weight="alg",
                             wvar=(-0.5, 0.0), epsabs=0.0, epsrel=1e-12, limit=200)
    if not (den > 0 and math.isfinite(num)) or e1 > 1e-8 * abs(num) + 1e-300 or e2 > 1e-8 * den:
        raise NumericError(f"eta quadrature did not converge at delta={delta}, y={y}")
    return num / (a * den * delta)


def eta(delta, y):
    """Ratio of the u^{-5/2} and u^{-3/2} Gaussian tail integrals above delta."""
    delta = _positive("delta", delta)
    y = _positive("y", y)
    d, yy = np.broadcast_arrays(delta, y)
    out = np.array([_eta_scalar(float(a), float(b)) for a, b in zip(d.ravel(), yy.ravel())])
    return _out(out.reshape(d.shape))


def p_htrans(t_h, r, s, x, z):
    """Killed-BM transition density from (r, x) to (s, z) h-transformed by H(t_h - ., .)."""
    t_h, r, s = (np.asarray(v, dtype=float) for v in (t_h, r, s))
    if np.any(~(r < s)) or np.any(~(s < t_h)):
        raise DomainError("p_htrans needs r < s < t_h")
    lp = log_q_killed(s - r, x, z) + log_h_surv(t_h - s, z) - log_h_surv(t_h - r, x)
    return _out(np.exp(lp))


class TabulatedDensity:
    """A density on (0, upper] with its CDF tabulated by panelled Gauss-Legendre.

    The CDF between nodes is a cubic Hermite interpolant that uses the density
    itself as the derivative, so the interpolation error is fourth order.
    """

    def __init__(self, pdf: Callable, upper: float, n_panels: int = 4000, order: int = 12,
                 lower: float = 0.0):
        self.pdf = pdf
        self.lower = lower
        self.upper = upper
        nodes = np.linspace(lower, upper, n_panels + 1)
        gx, gw = np.polynomial.legendre.leggauss(order)
        half = 0.5 * np.diff(nodes)
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        pts = mid[:, None] + half[:, None] * gx[None, :]
        vals = pdf(pts)
        pieces = (vals * gw[None, :]).sum(axis=1) * half
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        self.nodes = nodes
        self.mass = float(cum[-1])
        self.mean = float(((vals * pts) * gw[None, :]).sum(axis=1).dot(half))
        end_vals = np.asarray(pdf(np.maximum(nodes, lower + 1e-300)), dtype=float)
        self._spline = CubicHermiteSpline(nodes, cum, end_vals)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        inside = np.clip(z, self.lower, self.upper)
        out = np.where(z >= self.upper, self.mass, self._spline(inside))
        return _out(np.clip(out, 0.0, None))

    def __call__(self, z):
        return self.pdf(z)


def _safe_pdf(fn):
    def pdf(z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        m = z > 0
        out[m] = fn(z[m])
        return out
    return pdf


@dataclass
class ZPosterior:
    delta: float
    x: float
    table: TabulatedDensity

    def pdf(self, z):
        return self.table.pdf(z)

    def cdf(self, z):
        return self.table.cdf(z)

    @property
    def mean(self):
        return self.table.mean

    def normalization(self) -> float:
        val, _ = integrate.quad(lambda z: float(self.table.pdf(np.array([z]))[0]), 0.0, np.inf,
                                epsabs=0.0, epsrel=1e-12, limit=400)
        return val


def _support_upper(x, delta):
    return x + 14.0 * math.sqrt(delta)


def z_posterior(spec: TimeChangeSpec, t: float, x_t: float) -> ZPosterior:
    """Conditional density of Z_t on [tau > t] given X_t: q(V(t)-t, x, .) / H(V(t)-t, x)."""
    delta = float(v_of(spec, t)) - t
    if not delta > 0:
        raise DomainError("z_posterior needs V(t) > t")
    x_t = float(_positive("x_t", x_t))
    lh = float(log_h_surv(delta, x_t))
    pdf = _safe_pdf(lambda z: np.exp(log_q_killed(delta, x_t, z) - lh))
    return ZPosterior(delta, x_t, TabulatedDensity(pdf, _support_upper(x_t, delta)))


def htrans_density(t_h: float, r: float, s: float, x: float) -> TabulatedDensity:
    """z -> p_htrans(t_h, r, s, x, z) tabulated with its CDF."""
    x = float(_positive("x", x))
    pdf = _safe_pdf(lambda z: p_htrans(t_h, r, s, x, z))
    return TabulatedDensity(pdf, _support_upper(x, s - r))


@dataclass
class TauPosterior:
    spec: TimeChangeSpec
    t: float
    x: float
    log_h0: float

    def pdf(self, u):
        """Density of tau at u in (t, t_max]."""
        u = np.asarray(u, dtype=float)
        if np.any(~(u > self.t)):
            raise DomainError("tau posterior lives on (t, inf)")
        w = np.asarray(v_of(self.spec, u)) - self.t
        return _out(np.asarray(sigma2_of(self.spec, u)) * np.exp(log_ell(w, self.x) - self.log_h0))

    def pdf_v(self, v):
        """Density of V(tau) at v > V(t)."""
        return _out(np.exp(log_ell(np.asarray(v, dtype=float) - self.t, self.x) - self.log_h0))

    def survival_v(self, v):
        """P[V(tau) > v | information at t] = H(v - t, x) / H(V(t) - t, x)."""
        return _out(np.exp(log_h_surv(np.asarray(v, dtype=float) - self.t, self.x) - self.log_h0))

    def normalization(self) -> float:
        lo = float(v_of(self.spec, self.t))
        val, _ = integrate.quad(lambda v: float(self.pdf_v(v)), lo, np.inf,
                                epsabs=0.0, epsrel=1e-12, limit=400)
        return val


def tau_posterior(spec: TimeChangeSpec, t: float, x_t: float) -> TauPosterior:
    x_t = float(_positive("x_t", x_t))
    delta = float(v_of(spec, t)) - t
    if t > 0 and not delta > 0:
        raise DomainError("tau_posterior needs V(t) > t")
    log_h0 = 0.0 if delta == 0 else float(log_h_surv(delta, x_t))
    return TauPosterior(spec, float(t), x_t, log_h0)
