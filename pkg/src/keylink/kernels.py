"""Bitmask kernels, compiled when available.

The Cython module is used if it was built and the inputs fit in 64-bit
masks; otherwise everything runs through the pure-Python fallback. Set
``KEYLINK_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from typing import Sequence

from . import _kernels_py

_compiled = None
if not os.environ.get("KEYLINK_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined,no-redef]
    except ImportError:  # extension not built
        _compiled = None

BACKEND = _compiled.BACKEND if _compiled is not None else _kernels_py.BACKEND


def _fits(*masks: Sequence[int]) -> bool:
    return all(int(x).bit_length() <= 64 for seq in masks for x in seq)


def _pick(n_bits: int, *masks: Sequence[int]):
    if _compiled is not None and n_bits <= 64 and _fits(*masks):
        return _compiled
    return _kernels_py


def closure_mask(held: int, order: Sequence[int], children: Sequence[int]) -> int:
    return _pick(len(children), [held], children).closure_mask(held, order, children)


def check_coalitions(stored, entitled, order, children, coalitions):
    impl = _pick(max(len(children), len(stored)), stored, entitled, children, coalitions)
    return impl.check_coalitions(stored, entitled, order, children, coalitions)


def scan_coalitions(stored, entitled, order, children, max_size: int):
    impl = _pick(max(len(children), len(stored)), stored, entitled, children)
    return impl.scan_coalitions(stored, entitled, order, children, max_size)


def feasible(options: Sequence[Sequence[int]], loads: Sequence[int], limit: int) -> bool:
    return _pick(len(loads), *options).feasible(options, loads, limit)
