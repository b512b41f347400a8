"""Per-path random streams and simulation grids.

Every path owns independent streams derived from ``(seed, path_index,
stream_id)`` through ``numpy.random.SeedSequence`` spawn keys, so a path's
noise does not depend on which batch it is simulated in or on the number of
workers.  Sub-step noise inside the adaptive terminal zone comes from a
counter-based generator (SplitMix64 hashing) so that the compiled core and the
Python fallback can draw it on demand and agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "STREAM_B",
    "STREAM_W",
    "STREAM_CROSS",
    "STREAM_REFINE",
    "STREAM_BES3",
    "STREAM_BRIDGE3",
    "STREAM_COND_BETA",
    "STREAM_COND_B",
    "STREAM_PARTICLES",
    "make_grid",
    "generator",
    "stream_key",
    "NoiseBundle",
    "splitmix64",
    "cb_uniform",
    "cb_normal",
]

STREAM_B = 0
STREAM_W = 1
STREAM_CROSS = 2
STREAM_REFINE = 3
STREAM_BES3 = 4  # 4, 5, 6
STREAM_BRIDGE3 = 7  # 7, 8, 9
STREAM_COND_BETA = 10
STREAM_COND_B = 11
STREAM_PARTICLES = 12

_MASK = (1 << 64) - 1


def make_grid(t_end: float, dt_base: float, dt_min: float = 1e-9, ratio: float = 0.1) -> np.ndarray:
    """Time grid: geometric from ``dt_min`` up to ``dt_base`` then uniform.

    Consecutive points near 0 satisfy t_{k+1} <= (1 + ratio) t_k, which keeps
    the left-point drift error small where 1/(V(s) - s) blows up.
    """
    if not (0 < dt_min <= dt_base < t_end or dt_base == t_end):
        raise ValueError("need 0 < dt_min <= dt_base <= t_end")
    pts = [0.0]
    s = dt_min
    while s < dt_base:
        pts.append(s)
        s *= 1.0 + ratio
    n = int(math.floor(t_end / dt_base + 1e-9))
    uni = dt_base * np.arange(1, n + 1)
    grid = np.concatenate([pts, uni])
    if grid[-1] < t_end * (1 - 1e-12):
        grid = np.append(grid, t_end)
    else:
        grid[-1] = t_end
    return grid


def _seq(seed: int, path_index: int, stream_id: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(path_index), int(stream_id)))


def generator(seed: int, path_index: int, stream_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_seq(seed, path_index, stream_id)))


def stream_key(seed: int, path_index: int, stream_id: int = STREAM_REFINE) -> int:
    return int(_seq(seed, path_index, stream_id).generate_state(1, np.uint64)[0])


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def cb_uniform(key: int, counter: int) -> float:
    """Uniform on (0, 1) addressed by (key, counter)."""
    h = splitmix64(key ^ splitmix64(counter))
    return ((h >> 11) + 0.5) * (1.0 / 9007199254740992.0)


def cb_normal(key: int, counter: int) -> float:
    """Standard normal addressed by (key, counter), Box-Muller cosine branch."""
    u1 = cb_uniform(key, 2 * counter)
    u2 = cb_uniform(key, 2 * counter + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass
class NoiseBundle:
    """Gaussian increments for a batch of paths on a common grid.

    Rows are paths (``path_indices``), columns are grid steps.  Arrays are
    generated lazily and cached; identical (seed, path_index, grid) always
    reproduce identical increments.
    """

    seed: int
    path_indices: np.ndarray
    grid: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.path_indices = np.atleast_1d(np.asarray(self.path_indices, dtype=np.int64))
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim != 1 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    @classmethod
    def for_paths(cls, seed, n_paths, grid, start=0):
        return cls(seed, np.arange(start, start + n_paths), grid)

    @property
    def n_paths(self) -> int:
        return len(self.path_indices)

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.grid)

    def normals(self, stream_id: int, n: int | None = None) -> np.ndarray:
        n = len(self.grid) - 1 if n is None else n
        key = ("normals", stream_id, n)
        if key not in self._cache:
            out = np.empty((self.n_paths, n))
            for row, p in enumerate(self.path_indices):
                out[row] = generator(self.seed, p, stream_id).standard_normal(n)
            self._cache[key] = out
        return self._cache[key]

    def uniforms(self, stream_id: int, n: int | None = None) -> np.ndarray:
        n = len(self.grid) - 1 if n is None else n
        key = ("uniforms", stream_id, n)
        if key not in self._cache:
            out = np.empty((self.n_paths, n))
            for row, p in enumerate(self.path_indices):
                out[row] = generator(self.seed, p, stream_id).random(n)
            self._cache[key] = out
        return self._cache[key]

    @property
    def increments_B(self) -> np.ndarray:
        return self.normals(STREAM_B) * np.sqrt(self.dt)[None, :]

    @property
    def increments_W(self) -> np.ndarray:
        return self.normals(STREAM_W) * np.sqrt(self.dt)[None, :]

    def refine_keys(self) -> np.ndarray:
        return np.array([stream_key(self.seed, p) for p in self.path_indices], dtype=np.uint64)

    def subset(self, rows) -> "NoiseBundle":
        return NoiseBundle(self.seed, self.path_indices[rows], self.grid)
