import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dynbridge.errors import DomainError, SingularityError
from dynbridge.kernels import (drift_h, drift_post, drift_pre, ell, eta, f_ratio, h_surv, htrans_density,
                               log_q_killed, p_htrans, q_killed, tau_posterior, z_posterior)
from dynbridge.timechange import TimeChangeSpec, v_of

POWER = TimeChangeSpec.power()
pos = st.floats(0.05, 5.0)


def test_ell_value_and_mass():
    assert ell(1.0, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-15)
    for a in (0.5, 1.0, 2.0):
        mass, _ = integrate.quad(lambda u: float(ell(u, a)), 0, np.inf, epsrel=1e-12, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(pos, pos)
def test_ell_is_minus_dH_dt(t, a):
    # differentiate in high precision: H is within 1e-12 of 1 for large a/sqrt(t)
    with mp.workdps(30):
        fd = float(-mp.diff(lambda u: mp.erf(a / mp.sqrt(2 * u)), t))
    assert float(h_surv(t + 1e-6 * t, a)) <= float(h_surv(t - 1e-6 * t, a))
    assert fd == pytest.approx(float(ell(t, a)), rel=1e-5, abs=1e-12)


def test_h_surv_value():
    assert h_surv(1.0, 1.0) == pytest.approx(float(mp.erf(1 / mp.sqrt(2))), rel=1e-15)
    tail, _ = integrate.quad(lambda u: float(ell(u, 1.0)), 1.0, np.inf, epsrel=1e-13, limit=200)
    assert h_surv(1.0, 1.0) == pytest.approx(tail, rel=1e-10)


def test_h_surv_limits_and_monotonicity():
    assert h_surv(1e-12, 1.0) == 1.0
    a = np.linspace(0.1, 3, 50)
    assert np.all(np.diff(np.asarray(h_surv(1.0, a))) > 0)


def test_q_killed_value():
    # (1 - e^-2) / sqrt(2 pi) evaluated at 50 digits
    with mp.workdps(50):
        exact = (1 - mp.e ** -2) / mp.sqrt(2 * mp.pi)
    assert q_killed(1.0, 1.0, 1.0) == pytest.approx(float(exact), rel=1e-14)
    assert q_killed(1.0, 1.0, 1.0) == pytest.approx(0.3449513, abs=1e-7)


def test_q_killed_matches_naive_formula():
    def naive(t, x, y):
        c = 1 / math.sqrt(2 * math.pi * t)
        return c * (math.exp(-(x - y) ** 2 / (2 * t)) - math.exp(-(x + y) ** 2 / (2 * t)))

    for t, x, y in [(1, 1, 1), (0.5, 0.3, 1.2), (2, 1.5, 0.7)]:
        assert q_killed(t, x, y) == pytest.approx(naive(t, x, y), rel=1e-12)


def test_q_killed_small_product_stable():
    # the naive difference of exponentials loses all digits here
    t, x, y = 1.0, 1e-9, 1e-9
    with mp.workdps(60):
        exact = (mp.exp(-(x - y) ** 2 / 2) - mp.exp(-(x + y) ** 2 / 2)) / mp.sqrt(2 * mp.pi)
    assert q_killed(t, x, y) == pytest.approx(float(exact), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(pos, pos, pos)
def test_q_killed_symmetric(t, x, y):
    assert q_killed(t, x, y) == pytest.approx(float(q_killed(t, y, x)), rel=1e-13)


def test_q_integrates_to_h():
    val, _ = integrate.quad(lambda y: float(q_killed(1.0, 1.0, y)), 0, 40, points=[1.0],
                            epsabs=0, epsrel=1e-13, limit=200)
    assert val == pytest.approx(float(h_surv(1.0, 1.0)), rel=1e-8)


def test_kernel_domain_errors():
    with pytest.raises(DomainError):
        ell(0.0, 1.0)
    with pytest.raises(DomainError):
        h_surv(1.0, -1.0)
    with pytest.raises(DomainError):
        q_killed(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        f_ratio(-0.1)


def test_f_ratio_values():
    assert f_ratio(0.0) == 1.0
    assert f_ratio(2.0) == pytest.approx(2 / (math.e ** 2 - 1), rel=1e-15)
    assert f_ratio(2.0) == pytest.approx(0.3130353, abs=1e-7)
    # series branch against the exact value just below the switch
    y = 9e-6
    assert f_ratio(y) == pytest.approx(float(mp.mpf(y) / mp.expm1(y)), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50), st.floats(1e-6, 50))
def test_f_ratio_decreasing(y1, dy):
    assert f_ratio(y1) > f_ratio(y1 + dy)


def test_drift_pre_examples():
    assert drift_pre(1.0, 1.0, 1.0) == pytest.approx(0.3130353, abs=1e-7)
    for t, x in [(1.0, 1.0), (2.0, 0.5), (0.3, 1.7)]:
        assert drift_pre(t, x, 0.0) == pytest.approx(1 / x - x / t, rel=1e-14)
    for z in (0.5, 1.0, 2.0):
        assert drift_pre(1.0, 2.0, z) < drift_pre(1.0, 1.0, z)
    with pytest.raises(SingularityError):
        drift_pre(1.0, 0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(pos, pos, pos, st.floats(1e-3, 2.0))
def test_drift_pre_decreasing_in_x(t, x, z, dx):
    assert drift_pre(t, x + dx, z) < drift_pre(t, x, z)


def test_drift_pre_is_log_derivative_of_q():
    for t, x, z in [(1.0, 1.0, 1.0), (0.4, 0.6, 1.3), (2.0, 1.5, 0.2)]:
        h = 1e-6
        fd = (float(log_q_killed(t, x + h, z)) - float(log_q_killed(t, x - h, z))) / (2 * h)
        assert drift_pre(t, x, z) == pytest.approx(fd, rel=1e-7)


def test_drift_post_examples():
    assert drift_post(1.0, 1.0) == 0.0
    assert drift_post(4.0, 1.0) == pytest.approx(0.75)
    for t, x in [(1.0, 1.0), (0.5, 0.3), (3.0, 2.0)]:
        assert abs(float(drift_pre(t, x, 1e-8)) - float(drift_post(t, x))) <= 1e-6
    with pytest.raises(SingularityError):
        drift_post(0.0, 1.0)


def test_drift_h_fd_and_positivity():
    rng = np.random.default_rng(0)
    for d, z in rng.uniform(0.05, 3.0, (100, 2)):
        h = 1e-5 * max(z, 1)
        fd = (math.log(float(h_surv(d, z + h))) - math.log(float(h_surv(d, z - h)))) / (2 * h)
        assert drift_h(d, z) == pytest.approx(fd, rel=1e-6)
        assert drift_h(d, z) > 0


def test_drift_h_asymptotic_branch_continuous():
    d = 1.0
    z_switch = 6.0 * math.sqrt(2 * d)
    lo, hi = float(drift_h(d, z_switch * (1 - 1e-12))), float(drift_h(d, z_switch * (1 + 1e-12)))
    assert hi == pytest.approx(lo, rel=1e-9)


@pytest.mark.parametrize("d,y", [(0.5, 0.5), (1.0, 1.0), (2.0, 0.3), (0.2, 1.4)])
def test_drift_h_eta_identity(d, y):
    assert drift_h(d, y) == pytest.approx(1 / y - y * float(eta(d, y)), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 4.0), st.floats(0.05, 4.0))
def test_eta_bounds(d, y):
    e = float(eta(d, y))
    assert 0 <= e <= 1 / d * (1 + 1e-12)


def test_eta_vanishes_far_out():
    d = 0.5
    assert eta(d, 50 * math.sqrt(d)) < 1e-3


def test_p_htrans_normalises():
    t, r, s, x = 3.0, 0.2, 1.1, 0.8
    val, _ = integrate.quad(lambda z: float(p_htrans(t, r, s, x, z)), 0, 30, epsabs=0,
                            epsrel=1e-12, limit=200)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_p_htrans_limit_to_killed_ratio():
    t, r, x = 2.0, 0.3, 0.9
    for z in (0.4, 1.0, 1.6):
        lim = float(q_killed(t - r, x, z) / h_surv(t - r, x))
        assert p_htrans(t, r, t - 1e-6, x, z) == pytest.approx(lim, rel=1e-3)


def test_p_htrans_short_time_mean():
    dens = htrans_density(2.0, 0.5, 0.5 + 1e-6, 1.0)
    assert abs(dens.mean - 1.0) < 1e-2
    assert dens.mass == pytest.approx(1.0, abs=1e-6)


def test_p_htrans_domain():
    with pytest.raises(DomainError):
        p_htrans(1.0, 0.5, 0.5, 1.0, 1.0)
    with pytest.raises(DomainError):
        p_htrans(1.0, 0.2, 1.0, 1.0, 1.0)


def test_z_posterior_normalises_and_averages_to_drift_h():
    t, x = 0.5, 1.0
    post = z_posterior(POWER, t, x)
    assert post.normalization() == pytest.approx(1.0, abs=1e-8)
    delta = post.delta
    avg, _ = integrate.quad(lambda z: float(drift_pre(delta, x, z)) * float(post.pdf(np.array([z]))[0]),
                            0, x + 14 * math.sqrt(delta), epsabs=0, epsrel=1e-12, limit=200)
    assert avg == pytest.approx(float(drift_h(delta, x)), rel=1e-6)


def test_z_posterior_mean_far_from_boundary():
    post = z_posterior(POWER, 0.01, 20.0)
    assert post.mean == pytest.approx(20.0, rel=1e-2)


def test_tau_posterior_normalisation_and_law_at_zero():
    post = tau_posterior(POWER, 0.5, 1.2)
    assert post.normalization() == pytest.approx(1.0, abs=1e-6)
    u = np.linspace(0.5001, 4.0, 1000)
    assert np.all(np.asarray(post.pdf(u)) >= 0)
    p0 = tau_posterior(POWER, 0.0, 1.0)
    for s in (0.5, 1.0, 3.0):
        assert p0.survival_v(s) == pytest.approx(float(h_surv(s, 1.0)), rel=1e-12)
    # density in u is sigma^2(u) ell(V(u), 1)
    uu = 0.7
    assert p0.pdf(uu) == pytest.approx(float(ell(float(v_of(POWER, uu)), 1.0)) * (1 + uu ** (-2 / 3)),
                                       rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-12, 1e6), st.floats(1e-8, 1e4), st.floats(1e-8, 1e4))
def test_stability_envelope(t, x, z):
    vals = [q_killed(t, x, z), h_surv(t, x), ell(t, x), drift_pre(t, x, z), drift_h(t, x),
            f_ratio(2 * x * z / t)]
    assert all(np.isfinite(v) for v in vals)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_chapman_kolmogorov(s, t, x, y):
    up = max(x, y) + 14 * math.sqrt(s + t)
    val, _ = integrate.quad(lambda z: float(q_killed(s, x, z)) * float(q_killed(t, z, y)), 0, up,
                            points=[x, y], epsabs=0, epsrel=1e-12, limit=400)
    assert val == pytest.approx(float(q_killed(s + t, x, y)), rel=1e-6)
