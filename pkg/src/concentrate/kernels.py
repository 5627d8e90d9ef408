"""Backend selection for the hot min-plus convolution kernel.

The compiled extension is used when it imports; setting ``CONCENTRATE_PURE=1``
forces the pure-Python implementation.
"""
import os

import numpy as np

from . import _envelope_py

if os.environ.get("CONCENTRATE_PURE"):
    _compiled = None
else:
    try:
        from . import _envelope as _compiled
    except ImportError:
        _compiled = None


def _compiled_entry(f, c):
    f = np.ascontiguousarray(f, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    if f.ndim != 2 or c.ndim != 1:
        raise ValueError("expected a (lines, n) array and a 1-D kernel table")
    return _compiled.lower_envelope(f, c)


if _compiled is not None:
    lower_envelope = _compiled_entry
    BACKEND = "compiled"
else:
    lower_envelope = _envelope_py.lower_envelope
    BACKEND = "python"

python_lower_envelope = _envelope_py.lower_envelope
compiled_lower_envelope = None if _compiled is None else _compiled_entry

__all__ = ["lower_envelope", "BACKEND", "python_lower_envelope", "compiled_lower_envelope"]
