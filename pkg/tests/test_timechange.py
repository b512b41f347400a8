import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dynbridge.errors import DomainError, SingularityError
from dynbridge.timechange import (Affine, Custom, Lambda_of, PowerSingular, TimeChangeSpec,
                                  lambda_of, log_lambda_quad, sigma2_of, v_inverse, v_of, validate)

POWER = TimeChangeSpec.power()


def test_v_closed_form_values():
    assert v_of(POWER, 1.0) == pytest.approx(4.0, rel=1e-15)
    assert v_of(POWER, 0.0) == 0.0
    assert v_of(POWER, 0.125) == pytest.approx(1.625, rel=1e-14)


def test_v_matches_quadrature_of_sigma2():
    # substitution s = u^3 removes the s^(-2/3) singularity
    val, _ = integrate.quad(lambda u: float(sigma2_of(POWER, u ** 3)) * 3 * u * u, 0.0, 0.5,
                            epsabs=0, epsrel=1e-13)
    assert val == pytest.approx(1.625, rel=1e-10)


def test_v_outside_range_rejected():
    with pytest.raises(DomainError):
        v_of(POWER, 4.5)
    with pytest.raises(DomainError):
        v_of(POWER, -1e-3)


def test_v_inverse_examples():
    assert v_inverse(POWER, 4.0) == pytest.approx(1.0, abs=1e-12)
    assert v_inverse(TimeChangeSpec(Affine(2.0)), 6.0) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(DomainError):
        v_inverse(POWER, float(v_of(POWER, 4.0)) + 0.1)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-9, 4.0))
def test_v_inverse_round_trip(t):
    back = float(v_inverse(POWER, float(v_of(POWER, t))))
    assert abs(back - t) <= 1e-10 * max(t, 1e-3)


def test_v_inverse_vectorised():
    t = np.random.default_rng(3).uniform(0, 4, 1000)
    back = np.asarray(v_inverse(POWER, np.asarray(v_of(POWER, t))))
    np.testing.assert_allclose(back, t, rtol=1e-10, atol=1e-12)


def test_validate_power_third():
    eps = 0.01
    rep = validate(POWER, eps)
    assert rep.assumption1_ok and rep.assumption2_ok and rep.ok
    assert rep.assumption2_integral == pytest.approx(eps ** (1 / 3) / 3, rel=1e-12)
    quad, _ = integrate.quad(lambda u: (3 * u) ** -2 * 3 * u * u, 0, eps ** (1 / 3), epsrel=1e-12)
    assert rep.assumption2_integral == pytest.approx(quad, rel=1e-10)


def test_validate_affine_negative_fixture():
    rep = validate(TimeChangeSpec(Affine(2.0)))
    assert rep.assumption1_ok
    assert not rep.assumption2_ok
    assert math.isinf(rep.assumption2_integral)


def test_validate_power_half_fails():
    rep = validate(TimeChangeSpec.power(alpha=0.5))
    assert not rep.assumption2_ok


def test_validate_custom_divergent():
    # constant sigma^2 > 1 near zero behaves like Affine: not integrable
    spec = TimeChangeSpec(Custom((0.0, 1.0, 4.0), (2.0, 3.0)))
    rep = validate(spec)
    assert rep.assumption1_ok and not rep.assumption2_ok


@pytest.mark.parametrize("spec", [POWER, TimeChangeSpec.power(0.5, 0.25)])
def test_gap_positive_on_log_grid(spec):
    t = np.logspace(-12, math.log10(spec.t_max), 1000)
    assert np.min(np.asarray(v_of(spec, t)) - t) > 0


def test_lambda_values():
    assert lambda_of(POWER, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-10)
    assert lambda_of(POWER, 0.0) == 1.0
    assert Lambda_of(POWER, 0.0) == 0.0
    for t in (0.25, 0.5, 2.0):
        assert lambda_of(POWER, t) == pytest.approx(math.exp(-t ** (2 / 3) / 2), rel=1e-10)


def test_lambda_closed_form_vs_quadrature():
    for t in (0.1, 1.0, 3.0):
        assert log_lambda_quad(POWER, t) == pytest.approx(-t ** (2 / 3) / 2, rel=1e-8)


def test_Lambda_against_direct_quadrature():
    val, _ = integrate.quad(lambda s: math.exp(s ** (2 / 3)), 0, 1, epsrel=1e-12)
    assert Lambda_of(POWER, 1.0) == pytest.approx(val, rel=1e-8)


def test_lambda_monotone():
    t = np.linspace(1e-6, 4, 300)
    lam = np.asarray(lambda_of(POWER, t))
    Lam = np.asarray(Lambda_of(POWER, t))
    assert np.all(np.diff(lam) < 0)
    assert np.all(np.diff(Lam) > 0)


def test_lambda_refuses_failing_spec():
    with pytest.raises(SingularityError):
        lambda_of(TimeChangeSpec(Affine(2.0)), 1.0)
    with pytest.raises(SingularityError):
        lambda_of(TimeChangeSpec.power(alpha=0.5), 1.0)


def test_custom_exact_summation():
    spec = TimeChangeSpec(Custom((0.0, 1.0, 4.0), (2.0, 3.0)))
    assert v_of(spec, 1.0) == pytest.approx(2.0)
    assert v_of(spec, 2.5) == pytest.approx(6.5)
    assert v_inverse(spec, 6.5) == pytest.approx(2.5, abs=1e-12)


def test_family_validation():
    with pytest.raises(DomainError):
        PowerSingular(gamma=-1.0)
    with pytest.raises(DomainError):
        PowerSingular(alpha=1.5)
    with pytest.raises(DomainError):
        Affine(0.0)
    with pytest.raises(DomainError):
        Custom((0.0, 1.0), (1.0, 2.0))
    with pytest.raises(DomainError):
        TimeChangeSpec(Custom((0.0, 1.0), (2.0,)), t_max=4.0)


@pytest.mark.parametrize("spec", [POWER, TimeChangeSpec(Affine(3.0), 2.0),
                                  TimeChangeSpec(Custom((0.0, 1.0, 4.0), (2.0, 3.0)))])
def test_dict_round_trip(spec):
    assert TimeChangeSpec.from_dict(spec.to_dict()) == spec
