"""Select the numerical core at import time.

The compiled ``_ccore`` extension is used when it imports; setting
``SBC_PURE_PYTHON=1`` forces the pure-Python ``_pycore`` fallback.
"""
import os

from . import _pycore

if os.environ.get("SBC_PURE_PYTHON", "").strip() not in ("", "0"):
    kernel = _pycore
else:
    try:
        from . import _ccore as kernel
    except ImportError:
        kernel = _pycore

BACKEND = "python" if kernel is _pycore else "cython"
