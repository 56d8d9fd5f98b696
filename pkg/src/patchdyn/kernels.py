"""Kernel dispatch: compiled extension when available, NumPy otherwise.

Set ``PATCHDYN_FORCE_PYTHON=1`` to force the fallback (used by the
benchmark and the backend-equivalence tests).  ``set_num_threads`` shards
evaluation points across a thread pool; the compiled kernels release the
GIL and each point is accumulated independently in a fixed segment order,
so results are bit-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _core_py

try:
    from . import _core  # type: ignore[attr-defined]
except ImportError:  # extension not built
    _core = None

_FORCE_PY = os.environ.get("PATCHDYN_FORCE_PYTHON", "") not in ("", "0")
_impl = _core_py if (_core is None or _FORCE_PY) else _core

BACKEND = "python" if _impl is _core_py else "compiled"
HAVE_COMPILED = _core is not None

_num_threads = max(1, int(os.environ.get("PATCHDYN_THREADS", "1")))


def set_num_threads(n: int) -> None:
    global _num_threads
    _num_threads = max(1, int(n))


def get_num_threads() -> int:
    return _num_threads


def _prep(arr) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=np.float64)


def _sharded(fn, verts: np.ndarray, pts: np.ndarray, out: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    if _num_threads == 1 or n < 2048:
        out[:] = fn(verts, pts)
        return out
    shards = np.array_split(np.arange(n), _num_threads)
    with ThreadPoolExecutor(max_workers=_num_threads) as pool:
        futures = [pool.submit(fn, verts, np.ascontiguousarray(pts[s]))
                   for s in shards if len(s)]
        for s, fut in zip([s for s in shards if len(s)], futures):
            out[s] = fut.result()
    return out


def induced_velocity(vertices, points) -> np.ndarray:
    """Velocity of the unit-vorticity patch with the given boundary, (P, 2)."""
    pts = _prep(points)
    if pts.size == 0:
        return np.empty((0, 2))
    out = np.empty((pts.shape[0], 2))
    return _sharded(_impl.induced_velocity, _prep(vertices), pts, out)


def log_potential(vertices, points) -> np.ndarray:
    """Inner log potential of the patch at the given points, (P,)."""
    pts = _prep(points)
    if pts.size == 0:
        return np.empty(0)
    out = np.empty(pts.shape[0])
    return _sharded(_impl.log_potential, _prep(vertices), pts, out)
