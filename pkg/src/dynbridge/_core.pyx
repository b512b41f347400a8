# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Euler kernels.  The Python fallback in ``_fallback`` mirrors them."""

from libc.math cimport sqrt, fabs, log, cos, exp, expm1, erf, pow, INFINITY, NAN, isnan
from libc.stdint cimport uint64_t, int64_t

cdef enum:
    KX = 0
    KY = 1
    KY2 = 2
    KR = 3
    KU = 4
    KSQ = 5
    MAXK = 16

cdef double TWO_PI = 6.283185307179586


cdef inline uint64_t _mix(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _unif(uint64_t key, uint64_t ctr) noexcept nogil:
    cdef uint64_t h = _mix(key ^ _mix(ctr))
    return (<double>(h >> 11) + 0.5) * (1.0 / 9007199254740992.0)


cdef inline double _cbn(uint64_t key, uint64_t ctr) noexcept nogil:
    cdef double u1 = _unif(key, 2 * ctr)
    cdef double u2 = _unif(key, 2 * ctr + 1)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


def cb_normal(uint64_t key, uint64_t ctr):
    return _cbn(key, ctr)


cdef inline double _f_ratio(double y) noexcept nogil:
    if y < 1e-5:
        return 1.0 - y / 2.0 + y * y / 12.0
    return y / expm1(y)


cdef inline double _gap(double s, int vkind, double p0, double p1,
                        const double[::1] knots, const double[::1] vknots) noexcept nogil:
    # V(s) - s for the three families
    cdef int lo, hi, mid
    if vkind == 0:
        return (p0 / p1) * pow(s, p1)
    if vkind == 1:
        return (p0 - 1.0) * s
    lo = 0
    hi = knots.shape[0] - 1
    if s >= knots[hi]:
        return vknots[hi] - knots[hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if knots[mid] <= s:
            lo = mid
        else:
            hi = mid
    return (vknots[lo] + (vknots[hi] - vknots[lo]) * (s - knots[lo]) / (knots[hi] - knots[lo])) - s


cdef inline double _clamp(double d, double cap, int64_t *count) noexcept nogil:
    if d > cap:
        count[0] += 1
        return cap
    if d < -cap:
        count[0] += 1
        return -cap
    if isnan(d):
        count[0] += 1
        return cap
    return d


def euler_multi(const double[::1] grid, const double[:, ::1] zvals,
                const double[::1] tau, const double[::1] vtau,
                const double[:, ::1] dB, const uint64_t[::1] keys,
                const int[::1] kinds, const double[::1] param, const int[::1] absorb,
                const double[:, ::1] x0, const int[::1] start_idx,
                int vkind, double vp0, double vp1,
                const double[::1] knots, const double[::1] vknots,
                double dt_min, double guard_t, double guard_x, double drift_cap,
                int after_zero,
                double[:, :, ::1] out, double[:, ::1] first_zero, double[:, ::1] min_pre,
                double[:, ::1] at_tau,
                int64_t[:, ::1] clamps, int64_t[:, ::1] reflections, int64_t[::1] substeps):
    """Joint Euler scheme for several components driven by one Brownian motion."""
    cdef Py_ssize_t P = dB.shape[0]
    cdef Py_ssize_t n = grid.shape[0]
    cdef Py_ssize_t K = kinds.shape[0]
    cdef Py_ssize_t p, i, k
    cdef double x[MAXK]
    cdef int live[MAXK]
    cdef int zeroed[MAXK]
    cdef double a, b, s, D, L, zi, h, g, rem, inc, sq, drift, xn, gap, cap, tp, vp
    cdef int is_pre, pin, last, kd
    cdef uint64_t key, ctr
    if K > MAXK:
        raise ValueError("too many components")
    with nogil:
        for p in range(P):
            key = keys[p]
            ctr = 0
            tp = tau[p]
            vp = vtau[p]
            for k in range(K):
                live[k] = 0
                zeroed[k] = 0
                first_zero[p, k] = NAN
                min_pre[p, k] = INFINITY
                at_tau[p, k] = NAN
                clamps[p, k] = 0
                reflections[p, k] = 0
                for i in range(n):
                    out[p, k, i] = NAN
            substeps[p] = 0
            for i in range(n - 1):
                for k in range(K):
                    if start_idx[k] == i:
                        live[k] = 1
                        x[k] = x0[p, k]
                        out[p, k, i] = x[k]
                a = grid[i]
                b = grid[i + 1]
                s = a
                D = dB[p, i]
                L = b - a
                zi = zvals[p, i]
                last = 0
                while not last:
                    is_pre = s < tp
                    if is_pre and tp - s < dt_min:
                        is_pre = 0
                    h = L
                    pin = 0
                    for k in range(K):
                        if not live[k] or zeroed[k]:
                            continue
                        if kinds[k] == KX:
                            g = guard_x * x[k] * x[k]
                            if not is_pre:
                                rem = vp - s
                                if guard_t * rem < dt_min and rem <= L + dt_min:
                                    pin = 1
                                if guard_t * rem < g:
                                    g = guard_t * rem
                            if g < h:
                                h = g
                        elif kinds[k] == KY or kinds[k] == KY2:
                            if is_pre and guard_x * x[k] * x[k] < h:
                                h = guard_x * x[k] * x[k]
                        elif kinds[k] == KR:
                            if guard_x * x[k] * x[k] < h:
                                h = guard_x * x[k] * x[k]
                        elif kinds[k] == KU:
                            # quarter step: an Euler step on x^2 needs it for the same margin
                            if is_pre and 0.25 * guard_x * fabs(x[k]) < h:
                                h = 0.25 * guard_x * fabs(x[k])
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
                        inc = D * h / L + sqrt(h * (L - h) / L) * _cbn(key, ctr)
                        ctr += 1
                    if not is_pre:
                        for k in range(K):
                            if live[k] and isnan(at_tau[p, k]):
                                at_tau[p, k] = x[k]
                    cap = drift_cap / sqrt(h)
                    gap = _gap(s if s > dt_min else dt_min, vkind, vp0, vp1, knots, vknots)
                    for k in range(K):
                        if not live[k]:
                            continue
                        if zeroed[k]:
                            if after_zero == 1:
                                x[k] = x[k] + inc
                            continue
                        kd = kinds[k]
                        if kd == KX or kd == KY or kd == KY2:
                            if is_pre:
                                if x[k] > 0:
                                    if kd == KY2:
                                        drift = _f_ratio(2.0 * x[k] * zi / gap) / x[k]
                                    else:
                                        drift = (zi - x[k]) / gap + _f_ratio(2.0 * x[k] * zi / gap) / x[k]
                                    drift = _clamp(drift, cap, &clamps[p, k])
                                else:
                                    drift = cap
                                    clamps[p, k] += 1
                            elif kd == KX:
                                drift = _clamp(1.0 / x[k] - x[k] / (vp - s), cap, &clamps[p, k])
                            else:
                                drift = 0.0
                            xn = x[k] + drift * h + inc
                            if kd == KX and pin:
                                first_zero[p, k] = vp
                                zeroed[k] = 1
                                xn = 0.0
                            elif xn <= 0 and isnan(first_zero[p, k]) and (kd == KX or is_pre or absorb[k]):
                                first_zero[p, k] = s + h * x[k] / (x[k] - xn)
                                if kd == KX or absorb[k]:
                                    zeroed[k] = 1
                                    if after_zero == 0:
                                        xn = 0.0
                            if is_pre and xn < min_pre[p, k]:
                                min_pre[p, k] = xn
                            x[k] = xn
                        elif kd == KR:
                            if x[k] > 0:
                                drift = _clamp(1.0 / x[k] - x[k] / gap, cap, &clamps[p, k])
                            else:
                                drift = cap
                                clamps[p, k] += 1
                            xn = x[k] + drift * h + inc
                            if xn <= 0:
                                xn = -xn
                                reflections[p, k] += 1
                            x[k] = xn
                        else:
                            sq = sqrt(fabs(x[k]))
                            if kd == KU:
                                drift = 1.0
                                if is_pre:
                                    drift = drift + 2.0 * _f_ratio(2.0 * sq * zi / gap)
                            else:
                                drift = param[k]
                            xn = x[k] + drift * h + 2.0 * sq * inc
                            if xn <= 0 and isnan(first_zero[p, k]):
                                first_zero[p, k] = s + h * x[k] / (x[k] - xn)
                            if is_pre and xn < min_pre[p, k]:
                                min_pre[p, k] = xn
                            x[k] = xn
                    substeps[p] += 1
                    if last:
                        s = b
                    else:
                        s = s + h
                        L = L - h
                        D = D - inc
                for k in range(K):
                    if live[k]:
                        out[p, k, i + 1] = x[k]


cdef inline double _drift_h(double z, double s2, double coef) noexcept nogil:
    # s2 = sqrt(2 delta), coef = sqrt(2 / (pi delta))
    cdef double w = z / s2
    cdef double hx = coef * exp(-w * w)
    if w > 6.0:
        return hx
    return hx / erf(w)


def h_propagate(double[::1] z, double u0, double du, int n_sub, double vt,
                const double[:, ::1] normals, double drift_cap, int64_t[::1] counts):
    """Euler steps in V-time for dZ = dbeta + H_x/H(vt - u, Z) du, reflecting at 0.

    ``counts`` receives [reflections, clamps].
    """
    cdef Py_ssize_t N = z.shape[0]
    cdef Py_ssize_t i
    cdef int j
    cdef double sdu = sqrt(du)
    cdef double cap = drift_cap / sdu
    cdef double u, delta, zz, d, s2, coef
    with nogil:
        for j in range(n_sub):
            u = u0 + j * du
            delta = vt - u
            s2 = sqrt(2.0 * delta)
            coef = sqrt(2.0 / (3.141592653589793 * delta))
            for i in range(N):
                zz = z[i]
                if zz > 0:
                    d = _drift_h(zz, s2, coef)
                    if d > cap:
                        d = cap
                        counts[1] += 1
                else:
                    d = cap
                    counts[1] += 1
                zz = zz + d * du + sdu * normals[j, i]
                if zz <= 0:
                    zz = -zz
                    counts[0] += 1
                z[i] = zz
