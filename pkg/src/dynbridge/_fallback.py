"""Pure-Python versions of the compiled kernels.

Base steps that need no refinement are advanced for all paths at once with
numpy; the few (path, step) pairs that enter the adaptive zone run through a
scalar loop that repeats the compiled arithmetic operation for operation, so
both backends produce the same numbers.
"""

from __future__ import annotations

import math

import numpy as np

from .noise import cb_normal

KX, KY, KY2, KR, KU, KSQ = range(6)


def _f_ratio(y: float) -> float:
    if y < 1e-5:
        return 1.0 - y / 2.0 + y * y / 12.0
    return y / math.expm1(y)


def _f_ratio_vec(y):
    small = y < 1e-5
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        big = y / np.expm1(y)
    return np.where(small, 1.0 - y / 2.0 + y * y / 12.0, big)


def make_gap(vkind, p0, p1, knots, vknots):
    knots = np.asarray(knots, dtype=float)
    vknots = np.asarray(vknots, dtype=float)

    def gap(s):
        if vkind == 0:
            return (p0 / p1) * math.pow(s, p1)
        if vkind == 1:
            return (p0 - 1.0) * s
        lo, hi = 0, len(knots) - 1
        if s >= knots[hi]:
            return float(vknots[hi] - knots[hi])
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if knots[mid] <= s:
                lo = mid
            else:
                hi = mid
        return float((vknots[lo] + (vknots[hi] - vknots[lo]) * (s - knots[lo])
                      / (knots[hi] - knots[lo])) - s)
    return gap


def _clamp(d, cap):
    if d > cap:
        return cap, 1
    if d < -cap:
        return -cap, 1
    if d != d:
        return cap, 1
    return d, 0


class _State:
    __slots__ = ("x", "live", "zeroed", "first_zero", "min_pre", "at_tau", "clamps", "refl", "ctr",
                 "sub")


def _scalar_step(st, p, a, b, D, zi, tp, vp, key, kinds, param, absorb, gap_fn, dt_min,
                 guard_t, guard_x, drift_cap, after_zero):
    """Advance one path across one base step with adaptive refinement."""
    K = len(kinds)
    x = st.x[p]
    s = a
    L = b - a
    last = False
    while not last:
        is_pre = s < tp
        if is_pre and tp - s < dt_min:
            is_pre = False
        h = L
        pin = False
        for k in range(K):
            if not st.live[k] or st.zeroed[p, k]:
                continue
            kd = kinds[k]
            xk = x[k]
            if kd == KX:
                g = guard_x * xk * xk
                if not is_pre:
                    rem = vp - s
                    if guard_t * rem < dt_min and rem <= L + dt_min:
                        pin = True
                    if guard_t * rem < g:
                        g = guard_t * rem
                if g < h:
                    h = g
            elif kd == KY or kd == KY2:
                if is_pre and guard_x * xk * xk < h:
                    h = guard_x * xk * xk
            elif kd == KR:
                if guard_x * xk * xk < h:
                    h = guard_x * xk * xk
            elif kd == KU:
                # quarter step: an Euler step on x^2 needs it for the same margin
                if is_pre and 0.25 * guard_x * abs(xk) < h:
                    h = 0.25 * guard_x * abs(xk)
        if h < dt_min:
            h = dt_min
        if h > L or L - h < dt_min:
            h = L
        if is_pre and tp - s < h:
            h = tp - s
        if pin:
            h = vp - s
            if h <= 0:
                h = 1e-300
        last = h >= L
        if last:
            h = L
            inc = D
        else:
            inc = D * h / L + math.sqrt(h * (L - h) / L) * cb_normal(key, int(st.ctr[p]))
            st.ctr[p] += 1
        if not is_pre:
            for k in range(K):
                if st.live[k] and math.isnan(st.at_tau[p, k]):
                    st.at_tau[p, k] = x[k]
        cap = drift_cap / math.sqrt(h)
        gap = gap_fn(s if s > dt_min else dt_min)
        for k in range(K):
            if not st.live[k]:
                continue
            if st.zeroed[p, k]:
                if after_zero == 1:
                    x[k] = x[k] + inc
                continue
            kd = kinds[k]
            xk = float(x[k])
            if kd in (KX, KY, KY2):
                if is_pre:
                    if xk > 0:
                        if kd == KY2:
                            drift = _f_ratio(2.0 * xk * zi / gap) / xk
                        else:
                            drift = (zi - xk) / gap + _f_ratio(2.0 * xk * zi / gap) / xk
                        drift, c = _clamp(drift, cap)
                        st.clamps[p, k] += c
                    else:
                        drift = cap
                        st.clamps[p, k] += 1
                elif kd == KX:
                    drift, c = _clamp(1.0 / xk - xk / (vp - s), cap)
                    st.clamps[p, k] += c
                else:
                    drift = 0.0
                xn = xk + drift * h + inc
                if kd == KX and pin:
                    st.first_zero[p, k] = vp
                    st.zeroed[p, k] = True
                    xn = 0.0
                elif xn <= 0 and math.isnan(st.first_zero[p, k]) and (kd == KX or is_pre or absorb[k]):
                    st.first_zero[p, k] = s + h * xk / (xk - xn)
                    if kd == KX or absorb[k]:
                        st.zeroed[p, k] = True
                        if after_zero == 0:
                            xn = 0.0
                if is_pre and xn < st.min_pre[p, k]:
                    st.min_pre[p, k] = xn
                x[k] = xn
            elif kd == KR:
                if xk > 0:
                    drift, c = _clamp(1.0 / xk - xk / gap, cap)
                    st.clamps[p, k] += c
                else:
                    drift = cap
                    st.clamps[p, k] += 1
                xn = xk + drift * h + inc
                if xn <= 0:
                    xn = -xn
                    st.refl[p, k] += 1
                x[k] = xn
            else:
                sq = math.sqrt(abs(xk))
                if kd == KU:
                    drift = 1.0
                    if is_pre:
                        drift = drift + 2.0 * _f_ratio(2.0 * sq * zi / gap)
                else:
                    drift = float(param[k])
                xn = xk + drift * h + 2.0 * sq * inc
                if xn <= 0 and math.isnan(st.first_zero[p, k]):
                    st.first_zero[p, k] = s + h * xk / (xk - xn)
                if is_pre and xn < st.min_pre[p, k]:
                    st.min_pre[p, k] = xn
                x[k] = xn
        st.sub[p] += 1
        if last:
            s = b
        else:
            s = s + h
            L = L - h
            D = D - inc


def _clamp_vec(d, cap, counts):
    hi = d > cap
    lo = d < -cap
    nan = np.isnan(d)
    counts += (hi | lo | nan)
    return np.where(hi | nan, cap, np.where(lo, -cap, d))


def euler_multi(grid, zvals, tau, vtau, dB, keys, kinds, param, absorb, x0, start_idx,
                vkind, vp0, vp1, knots, vknots, dt_min, guard_t, guard_x, drift_cap,
                after_zero, out, first_zero, min_pre, at_tau, clamps, reflections, substeps):
    P, K, n = out.shape
    kinds = [int(k) for k in kinds]
    absorb = [int(a) for a in absorb]
    gap_fn = make_gap(vkind, vp0, vp1, knots, vknots)
    st = _State()
    st.x = np.zeros((P, K))
    st.live = [False] * K
    st.zeroed = np.zeros((P, K), dtype=bool)
    st.first_zero = first_zero
    st.min_pre = min_pre
    st.at_tau = at_tau
    st.clamps = clamps
    st.refl = reflections
    st.ctr = np.zeros(P, dtype=np.int64)
    st.sub = substeps
    out[...] = np.nan
    first_zero[...] = np.nan
    min_pre[...] = np.inf
    at_tau[...] = np.nan
    clamps[...] = 0
    reflections[...] = 0
    substeps[...] = 0
    keys = [int(k) for k in keys]
    for i in range(n - 1):
        for k in range(K):
            if start_idx[k] == i:
                st.live[k] = True
                st.x[:, k] = x0[:, k]
                out[:, k, i] = x0[:, k]
        a = float(grid[i])
        b = float(grid[i + 1])
        L = b - a
        D = dB[:, i]
        zi = zvals[:, i]
        X = st.x
        is_pre = (a < tau) & ~(tau - a < dt_min)
        # step size each path would request at s = a
        h = np.full(P, L)
        pin = np.zeros(P, dtype=bool)
        for k in range(K):
            if not st.live[k]:
                continue
            act = ~st.zeroed[:, k]
            xk = X[:, k]
            kd = kinds[k]
            if kd == KX:
                g = guard_x * xk * xk
                rem = vtau - a
                post = act & ~is_pre
                pin |= post & (guard_t * rem < dt_min) & (rem <= L + dt_min)
                g = np.where(post & (guard_t * rem < g), guard_t * rem, g)
                h = np.where(act & (g < h), g, h)
            elif kd in (KY, KY2):
                g = guard_x * xk * xk
                h = np.where(act & is_pre & (g < h), g, h)
            elif kd == KR:
                g = guard_x * xk * xk
                h = np.where(act & (g < h), g, h)
            elif kd == KU:
                g = 0.25 * guard_x * np.abs(xk)
                h = np.where(act & is_pre & (g < h), g, h)
        h = np.maximum(h, dt_min)
        h = np.where((h > L) | (L - h < dt_min), L, h)
        h = np.where(is_pre & (tau - a < h), tau - a, h)
        simple = (h >= L) & ~pin
        rows = np.flatnonzero(simple)
        if len(rows):
            for k in range(K):
                if st.live[k]:
                    rec = rows[~is_pre[rows] & np.isnan(at_tau[rows, k])]
                    at_tau[rec, k] = X[rec, k]
            cap = drift_cap / math.sqrt(L)
            gap = gap_fn(a if a > dt_min else dt_min)
            Dr = D[rows]
            zr = zi[rows]
            pre = is_pre[rows]
            for k in range(K):
                if not st.live[k]:
                    continue
                kd = kinds[k]
                xk = X[rows, k]
                zed = st.zeroed[rows, k]
                if after_zero == 1:
                    xz = xk + Dr
                else:
                    xz = xk
                cnt = np.zeros(len(rows), dtype=np.int64)
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    if kd in (KX, KY, KY2):
                        pos = xk > 0
                        fr = _f_ratio_vec(2.0 * xk * zr / gap) / xk
                        if kd == KY2:
                            dpre = fr
                        else:
                            dpre = (zr - xk) / gap + fr
                        cnt_pre = np.zeros(len(rows), np.int64)
                        dpre = np.where(pos, _clamp_vec(dpre, cap, cnt_pre), cap)
                        cnt_pre = np.where(pos, cnt_pre, 1)
                        if kd == KX:
                            cnt_post = np.zeros(len(rows), np.int64)
                            dpost = _clamp_vec(1.0 / xk - xk / (vtau[rows] - a), cap, cnt_post)
                        else:
                            cnt_post = np.zeros(len(rows), np.int64)
                            dpost = np.zeros(len(rows))
                        drift = np.where(pre, dpre, dpost)
                        cnt = np.where(pre, cnt_pre, cnt_post)
                        xn = xk + drift * L + Dr
                        fz = first_zero[rows, k]
                        may = (kd == KX) | pre | bool(absorb[k])
                        hit = (xn <= 0) & np.isnan(fz) & may & ~zed
                        fz = np.where(hit, a + L * xk / (xk - xn), fz)
                        first_zero[rows, k] = fz
                        if kd == KX or absorb[k]:
                            st.zeroed[rows, k] = zed | hit
                            if after_zero == 0:
                                xn = np.where(hit, 0.0, xn)
                        mp = min_pre[rows, k]
                        min_pre[rows, k] = np.where(pre & ~zed & (xn < mp), xn, mp)
                    elif kd == KR:
                        pos = xk > 0
                        cnt_r = np.zeros(len(rows), np.int64)
                        drift = np.where(pos, _clamp_vec(1.0 / xk - xk / gap, cap, cnt_r), cap)
                        cnt = np.where(pos, cnt_r, 1)
                        xn = xk + drift * L + Dr
                        neg = xn <= 0
                        xn = np.where(neg, -xn, xn)
                        reflections[rows, k] += neg & ~zed
                    else:
                        sq = np.sqrt(np.abs(xk))
                        if kd == KU:
                            drift = np.where(pre, 1.0 + 2.0 * _f_ratio_vec(2.0 * sq * zr / gap), 1.0)
                        else:
                            drift = float(param[k])
                        xn = xk + drift * L + 2.0 * sq * Dr
                        fz = first_zero[rows, k]
                        first_zero[rows, k] = np.where((xn <= 0) & np.isnan(fz) & ~zed,
                                                       a + L * xk / (xk - xn), fz)
                        mp = min_pre[rows, k]
                        min_pre[rows, k] = np.where(pre & ~zed & (xn < mp), xn, mp)
                clamps[rows, k] += np.where(zed, 0, cnt)
                X[rows, k] = np.where(zed, xz, xn)
            substeps[rows] += 1
        for p in np.flatnonzero(~simple):
            _scalar_step(st, p, a, b, float(D[p]), float(zi[p]), float(tau[p]), float(vtau[p]),
                         keys[p], kinds, param, absorb, gap_fn, dt_min, guard_t, guard_x,
                         drift_cap, after_zero)
        for k in range(K):
            if st.live[k]:
                out[:, k, i + 1] = X[:, k]


def h_propagate(z, u0, du, n_sub, vt, normals, drift_cap, counts):
    from scipy.special import erf

    sdu = math.sqrt(du)
    cap = drift_cap / sdu
    for j in range(n_sub):
        delta = vt - (u0 + j * du)
        pos = z > 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            w = z / math.sqrt(2.0 * delta)
            hx = math.sqrt(2.0 / (math.pi * delta)) * np.exp(-w * w)
            d = np.where(w > 6.0, hx, hx / erf(w))
        over = ~pos | (d > cap)
        counts[1] += int(over.sum())
        d = np.where(over, cap, d)
        zn = z + d * du + sdu * normals[j]
        neg = zn <= 0
        counts[0] += int(neg.sum())
        z[:] = np.where(neg, -zn, zn)
