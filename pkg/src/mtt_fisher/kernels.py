"""Kernel backend selection: compiled extension with NumPy fallback.

The compiled module is used when it imported cleanly; set the environment
variable ``MTT_FISHER_PURE_PY=1`` to force the NumPy implementations.
Both backends take identical pre-drawn randomness, so results agree up to
floating-point summation order.
"""

from __future__ import annotations

import os

from . import _kernels_py

_impl = _kernels_py
BACKEND = "numpy"

if not os.environ.get("MTT_FISHER_PURE_PY"):
    try:
        from . import _kernels_c as _impl_c

        _impl = _impl_c
        BACKEND = "compiled"
    except ImportError:  # extension not built; fall back silently
        pass

batch_permanent_gradient = _impl.batch_permanent_gradient
pf_masked_score = _impl.pf_masked_score
