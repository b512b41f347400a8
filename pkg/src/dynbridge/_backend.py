"""Backend selection: the compiled core when importable, else pure Python.

Callers pick a backend explicitly with ``backend="python"`` or
``backend="compiled"`` (the benchmark and the agreement tests do).
``DYNBRIDGE_THREADS`` caps the worker threads used to
run path chunks through the kernel; the compiled kernel releases the GIL.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from . import _fallback

try:
    from . import _core as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

__all__ = ["name", "get", "available", "threads", "run_chunked"]


def available() -> list[str]:
    return (["compiled"] if _compiled is not None else []) + ["python"]


def get(which: str | None = None):
    which = which or "auto"
    if which == "python":
        return _fallback
    if which in ("auto", "compiled"):
        if _compiled is not None:
            return _compiled
        if which == "compiled":
            raise ImportError("compiled backend is not built")
        return _fallback
    raise ValueError(f"unknown backend {which!r}")


def name(which: str | None = None) -> str:
    return "compiled" if get(which) is _compiled else "python"


def threads() -> int:
    raw = os.environ.get("DYNBRIDGE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"DYNBRIDGE_THREADS must be an integer, got {raw!r}") from None
    return max(1, os.cpu_count() or 1)


def run_chunked(fn, n_items: int, min_chunk: int = 256):
    """Call ``fn(lo, hi)`` over contiguous chunks, possibly on worker threads.

    Chunks write to disjoint slices, so the result does not depend on the
    number of threads.
    """
    n_threads = min(threads(), max(1, n_items // min_chunk))
    if n_threads <= 1:
        fn(0, n_items)
        return
    bounds = [n_items * j // n_threads for j in range(n_threads + 1)]
    with ThreadPoolExecutor(n_threads) as pool:
        list(pool.map(lambda j: fn(bounds[j], bounds[j + 1]), range(n_threads)))
