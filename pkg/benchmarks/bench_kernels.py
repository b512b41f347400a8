"""Time the compiled core against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--paths 2000] [--repeat 3]

Both backends run the same joint Euler kernel (X, Y and U on shared noise)
and the conditioned-signal propagation used by the particle filter.  The
results are checked to agree before timings are reported.
"""

import argparse
import time

import numpy as np

from dynbridge import _backend
from dynbridge.noise import NoiseBundle
from dynbridge.paths import StepController, simulate_coupled, simulate_Z
from dynbridge.timechange import TimeChangeSpec

COMPONENTS = [
    {"name": "X", "kind": "X", "x0": 1.0},
    {"name": "Y", "kind": "Y", "x0": 1.0, "absorb": False},
    {"name": "U", "kind": "U", "x0": 1.0},
]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_euler(backend, nb, z, ctrl, repeat):
    spec = TimeChangeSpec.power()
    return best_of(lambda: simulate_coupled(spec, nb, z, ctrl, COMPONENTS, backend=backend), repeat)


def bench_propagate(backend, n, steps, repeat):
    mod = _backend.get(backend)
    normals = np.random.default_rng(0).standard_normal((steps, n))

    def go():
        z = np.ones(n)
        counts = np.zeros(2, dtype=np.int64)
        mod.h_propagate(z, 0.0, 1e-3, steps, 4.0, normals, 5.0, counts)
        return z

    return best_of(go, repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--particles", type=int, default=16000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = _backend.available()
    ctrl = StepController()
    nb = NoiseBundle.for_paths(1, args.paths, ctrl.grid(1.0))
    z = simulate_Z(TimeChangeSpec.power(), nb)
    nb.increments_B  # fill the noise cache outside the timed region
    rows, results = [], {}
    for b in backends:
        t, res = bench_euler(b, nb, z, ctrl, args.repeat)
        results[("euler", b)] = res["X"].values
        rows.append(("euler_multi", b, args.paths, t))
        t, res = bench_propagate(b, args.particles, 500, args.repeat)
        results[("prop", b)] = res
        rows.append(("h_propagate", b, args.particles, t))
    if len(backends) == 2:
        for kind in ("euler", "prop"):
            a, c = results[(kind, "compiled")], results[(kind, "python")]
            assert np.allclose(a, c, rtol=1e-10, atol=1e-10, equal_nan=True), kind
    print(f"threads={_backend.threads()}")
    print(f"{'kernel':<12} {'backend':<9} {'size':>7} {'seconds':>9} {'speedup':>8}")
    base = {r[0]: r[3] for r in rows if r[1] == "python"}
    for kernel, b, size, t in rows:
        print(f"{kernel:<12} {b:<9} {size:>7} {t:>9.3f} {base[kernel] / t:>8.1f}")


if __name__ == "__main__":
    main()
