"""Empirical distribution functions and Kolmogorov-Smirnov distances."""

from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = ["ks_distance", "weighted_ecdf"]


def weighted_ecdf(sample, weights=None):
    """Sorted support points and the ECDF value just after each of them."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("empty sample")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if weights is None:
        w = np.full(x.size, 1.0 / x.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()[order]
        if w.shape != xs.shape or np.any(w < 0) or not w.sum() > 0:
            raise DomainError("weights must be nonnegative with positive sum")
        w = w / w.sum()
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return xs, cum


def ks_distance(sample, cdf, weights=None, upper: float | None = None) -> float:
    """sup_x |F_n(x) - F(x)| for a (weighted) sample.

    Values above ``upper`` are treated as censored: they count towards the
    total mass but the supremum is only taken over (-inf, upper].  NaN
    entries are censored too when ``upper`` is given.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("empty sample")
    if upper is not None:
        x = np.where(np.isnan(x) | (x > upper), np.inf, x)
    elif np.any(np.isnan(x)):
        raise DomainError("NaN in sample")
    xs, cum = weighted_ecdf(x, weights)
    fin = np.isfinite(xs)
    if not fin.any():
        return float(abs(cdf(np.array([upper]))[0])) if upper is not None else 1.0
    xf = xs[fin]
    after = cum[fin]
    before = np.concatenate([[0.0], cum])[:-1][fin]
    F = np.asarray(cdf(xf), dtype=float)
    d = max(np.max(np.abs(after - F)), np.max(np.abs(before - F)))
    if upper is not None:
        # the ECDF is flat between the last finite point and the censoring bound
        d = max(d, abs(after[-1] - float(np.asarray(cdf(np.array([upper])))[0])))
    return float(d)
