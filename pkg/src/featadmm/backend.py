"""Kernel backend selection.

The compiled extension is used when it importable; the pure-numpy fallback
otherwise. Setting the environment variable ``FEATADMM_PURE_PYTHON=1``
forces the fallback (useful for debugging and benchmarking).
"""

from __future__ import annotations

import os

from . import _inner_loops_py

if os.environ.get("FEATADMM_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _inner_loops_py
    BACKEND = "python"
else:
    try:
        from . import _inner_loops as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _inner_loops_py
        BACKEND = "python"

ista_quadratic = _impl.ista_quadratic
subgrad_composite = _impl.subgrad_composite

__all__ = ["BACKEND", "ista_quadratic", "subgrad_composite"]
