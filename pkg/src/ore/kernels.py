"""Backend selection for the hot loops.

The compiled extension ``ore._kernels`` is used when it imports; otherwise the
numpy fallback in ``ore._kernels_py`` is. Setting ``ORE_PURE_PYTHON=1`` forces
the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("ORE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

bm25_accumulate = _impl.bm25_accumulate
set_affinity = _impl.set_affinity

__all__ = ["BACKEND", "bm25_accumulate", "set_affinity"]
