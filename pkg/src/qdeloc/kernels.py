"""Hot-kernel dispatch: compiled extension if available, numpy fallback otherwise.

The implementation is chosen once at import.  Set ``QDELOC_PURE_PY=1`` in
the environment to force the numpy path (used by the benchmark and tests).
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_PURE = bool(int(os.environ.get("QDELOC_PURE_PY", "0") or "0"))

try:
    if _FORCE_PURE:
        raise ImportError("pure-python path forced via QDELOC_PURE_PY")
    from . import _kernels as _ext
    HAVE_COMPILED = True
except ImportError:
    _ext = None
    HAVE_COMPILED = False


def apply_two_site_numpy(psi: np.ndarray, out: np.ndarray, gate: np.ndarray,
                         left: int, dd: int, right: int) -> None:
    """Reference implementation: batched matmul over a (left, dd, right) view."""
    src = psi.reshape(left, dd, right)
    dst = out.reshape(left, dd, right)
    np.matmul(gate, src, out=dst)


def apply_two_site_compiled(psi: np.ndarray, out: np.ndarray, gate: np.ndarray,
                            left: int, dd: int, right: int) -> None:
    _ext.apply_two_site(psi, out, gate, left, dd, right)


def abs2_numpy(psi: np.ndarray, out: np.ndarray) -> None:
    np.multiply(psi.real, psi.real, out=out)
    out += psi.imag * psi.imag


def abs2_compiled(psi: np.ndarray, out: np.ndarray) -> None:
    _ext.abs2(psi, out)


if HAVE_COMPILED:
    apply_two_site = apply_two_site_compiled
    abs2 = abs2_compiled
else:
    apply_two_site = apply_two_site_numpy
    abs2 = abs2_numpy
