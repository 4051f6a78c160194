"""Kernel backend selection and the parallel slab driver.

The compiled extension ``_core`` is preferred when importable; the NumPy
reference ``pyref`` is the fallback and the semantic definition. Setting
CONDWALK_FORCE_PYREF=1 forces the fallback (used by the equivalence tests
and the benchmark). Per-kernel fallback: any kernel missing from the
compiled module (currently affine_rd_walk) comes from pyref.
"""

from __future__ import annotations

import importlib
import os
from concurrent.futures import ThreadPoolExecutor

from . import pyref

_core = None
if not os.environ.get("CONDWALK_FORCE_PYREF"):
    try:
        _core = importlib.import_module("._core", __name__)
    except ImportError:
        _core = None


def _select(name: str):
    if _core is not None and hasattr(_core, name):
        return getattr(_core, name)
    return getattr(pyref, name)


BACKEND = "compiled" if _core is not None else "python"

finite_walk = _select("finite_walk")
affine1d_walk = _select("affine1d_walk")
affine_rd_walk = _select("affine_rd_walk")
finite_martingale = _select("finite_martingale")
affine1d_martingale = _select("affine1d_martingale")
dp_step_float = _select("dp_step_float")

# Fixed slab sizes: the stream partition must not depend on the worker
# count, so results are invariant under --threads.
WALK_SLAB = 1 << 16
MARTINGALE_SLAB = 1 << 14


def map_slabs(fn, n_samples: int, threads: int | None = None,
              slab: int = WALK_SLAB) -> list:
    """Apply fn(stream0, count) over fixed consecutive stream slabs.

    Results come back in slab order; each path's output depends only on
    (seed, stream), so the slab partition and thread count cannot change
    the combined result.
    """
    slabs = [(s0, min(slab, n_samples - s0)) for s0 in range(0, n_samples, slab)]
    if not slabs:
        return []
    if threads is None:
        threads = min(len(slabs), os.cpu_count() or 1)
    threads = max(1, min(int(threads), len(slabs)))
    if threads == 1:
        return [fn(s0, c) for s0, c in slabs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda sc: fn(sc[0], sc[1]), slabs))
