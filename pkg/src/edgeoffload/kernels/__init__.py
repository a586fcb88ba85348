"""Kernel backend selection: compiled extension when available, numpy otherwise.

Set ``EDGEOFFLOAD_KERNEL=ref`` (or ``fast``) to pin a backend, e.g. for the
benchmark in ``benchmarks/bench_kernels.py``.
"""
from __future__ import annotations

import os

import numpy as np

from . import _ref
from ._ref import exhaustive_costs, mask_matrix

try:
    from . import _fast

    HAVE_FAST = True
except ImportError:  # extension not built; numpy fallback
    _fast = None  # type: ignore[assignment]
    HAVE_FAST = False

_FORCED = os.environ.get("EDGEOFFLOAD_KERNEL", "").strip().lower()
if _FORCED == "ref":
    _IMPL = _ref
elif _FORCED == "fast":
    if not HAVE_FAST:
        raise ImportError("EDGEOFFLOAD_KERNEL=fast but the compiled kernel is unavailable")
    _IMPL = _fast
else:
    _IMPL = _fast if HAVE_FAST else _ref

BACKEND = "fast" if _IMPL is _fast and HAVE_FAST else "ref"


def exhaustive_argmin(local, off_base, sqrt_cycles, wt_over_f):
    """Dispatch to the selected backend; see ``_ref.exhaustive_argmin``."""
    local = np.ascontiguousarray(np.atleast_2d(local), dtype=np.float64)
    off_base = np.ascontiguousarray(np.atleast_2d(off_base), dtype=np.float64)
    sqrt_cycles = np.ascontiguousarray(np.atleast_2d(sqrt_cycles), dtype=np.float64)
    wt_over_f = np.ascontiguousarray(np.reshape(wt_over_f, -1), dtype=np.float64)
    return _IMPL.exhaustive_argmin(local, off_base, sqrt_cycles, wt_over_f)


__all__ = [
    "BACKEND",
    "HAVE_FAST",
    "exhaustive_argmin",
    "exhaustive_costs",
    "mask_matrix",
]
