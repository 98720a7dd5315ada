"""Selects the compiled kernels when importable, else the Python fallback."""

import os

_force_python = os.environ.get("DECOYFK_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    from . import _fallback as kernels
    COMPILED = False
else:
    try:
        from . import _kernels as kernels
        COMPILED = True
    except ImportError:
        from . import _fallback as kernels
        COMPILED = False

from . import _fallback as python_kernels  # noqa: E402

__all__ = ["kernels", "python_kernels", "COMPILED"]
