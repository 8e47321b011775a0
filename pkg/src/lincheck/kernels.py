"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``LINCHECK_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("LINCHECK_PURE") != "1":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

chop = _impl.chop
box = _impl.box
diamond = _impl.diamond
omega = _impl.omega
runs = _impl.runs
from_first = _impl.from_first
