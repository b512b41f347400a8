import numpy as np
import pytest

from dynbridge import _backend
from dynbridge.filtering import filter_run, observation_grid, simulate_conditioned_pair
from dynbridge.noise import NoiseBundle
from dynbridge.paths import StepController, simulate_coupled, simulate_R_sde, simulate_Z
from dynbridge.timechange import Affine, Custom, TimeChangeSpec

needs_core = pytest.mark.skipif("compiled" not in _backend.available(),
                                reason="compiled core not built")
CTRL = StepController(dt_base=5e-3)
COMPONENTS = [
    {"name": "X", "kind": "X", "x0": 1.0},
    {"name": "Y", "kind": "Y", "x0": 1.0, "absorb": False},
    {"name": "Y2", "kind": "Y2", "x0": 1.0, "absorb": False},
    {"name": "U", "kind": "U", "x0": 1.0},
    {"name": "M", "kind": "SQ", "x0": 1.0, "param": 3.0},
]
SPECS = [
    TimeChangeSpec.power(),
    TimeChangeSpec(Affine(0.5), t_max=4.0),
    TimeChangeSpec(Custom((0.0, 0.5, 1.0, 2.0, 4.0), (3.0, 1.0, 2.0, 1.0)), t_max=4.0),
]


def _run(spec, backend, seed=11, n=60):
    nb = NoiseBundle.for_paths(seed, n, CTRL.grid(1.0))
    z = simulate_Z(spec, nb, allow_invalid=True)
    return simulate_coupled(spec, nb, z, CTRL, COMPONENTS, backend=backend, allow_invalid=True)


@needs_core
@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_euler_backends_agree(spec):
    a, b = _run(spec, "compiled"), _run(spec, "python")
    for name in a:
        np.testing.assert_allclose(a[name].values, b[name].values, rtol=1e-10, atol=1e-10,
                                   equal_nan=True)
        np.testing.assert_allclose(a[name].absorbed_at, b[name].absorbed_at, rtol=1e-10,
                                   equal_nan=True)
        assert np.array_equal(a[name].diagnostics["substeps"], b[name].diagnostics["substeps"])


@needs_core
def test_r_sde_backends_agree():
    ctrl = StepController(dt_base=5e-3)
    nb = NoiseBundle.for_paths(4, 40, ctrl.grid(1.0))
    spec = SPECS[0]
    a = simulate_R_sde(spec, nb, ctrl, backend="compiled")
    b = simulate_R_sde(spec, nb, ctrl, backend="python")
    np.testing.assert_allclose(a.values, b.values, rtol=1e-10, atol=1e-10)


@needs_core
def test_conditioned_filter_backends_agree():
    spec = SPECS[0]
    grid = observation_grid(0.5, dt_base=1e-2)
    nb = NoiseBundle.for_paths(2, 3, grid)
    obs_a, za = simulate_conditioned_pair(spec, 0.5, nb, backend="compiled")
    obs_b, zb = simulate_conditioned_pair(spec, 0.5, nb, backend="python")
    np.testing.assert_allclose(za.values, zb.values, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(obs_a.x_values, obs_b.x_values, rtol=1e-10, atol=1e-10)
    ra = filter_run(obs_a, 200, spec, 0.5, backend="compiled")
    rb = filter_run(obs_a, 200, spec, 0.5, backend="python")
    np.testing.assert_allclose(ra.mean, rb.mean, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("backend", _backend.available())
def test_bitwise_repeatable(backend):
    a, b = _run(SPECS[0], backend, n=30), _run(SPECS[0], backend, n=30)
    for name in a:
        assert np.array_equal(a[name].values, b[name].values, equal_nan=True)


@needs_core
def test_thread_count_does_not_change_results(monkeypatch):
    monkeypatch.setenv("DYNBRIDGE_THREADS", "1")
    one = _run(SPECS[0], "compiled", n=600)
    monkeypatch.setenv("DYNBRIDGE_THREADS", "3")
    three = _run(SPECS[0], "compiled", n=600)
    for name in one:
        assert np.array_equal(one[name].values, three[name].values, equal_nan=True)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("DYNBRIDGE_THREADS", "2")
    assert _backend.threads() == 2
    monkeypatch.setenv("DYNBRIDGE_THREADS", "two")
    with pytest.raises(ValueError):
        _backend.threads()


def test_backend_names():
    assert _backend.name("python") == "python"
    assert "python" in _backend.available()
    with pytest.raises(ValueError):
        _backend.get("fortran")
