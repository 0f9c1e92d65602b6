"""Convolution kernel backends.

The compiled extension is used when it imported cleanly; otherwise the
NumPy reference implementation takes over. FEDHAR_BACKEND=reference or
=native forces the choice (falling back, with a warning, if the forced
backend is unavailable).
"""

from __future__ import annotations

import logging
import os

import numpy as np

from . import reference

log = logging.getLogger(__name__)

try:
    from . import _native
except ImportError:
    _native = None

_requested = os.environ.get("FEDHAR_BACKEND", "").strip().lower()
if _requested == "reference":
    _impl = reference
elif _requested == "native":
    if _native is None:
        log.warning("FEDHAR_BACKEND=native but the extension is missing; using reference")
        _impl = reference
    else:
        _impl = _native
elif _requested:
    log.warning("unknown FEDHAR_BACKEND=%r; using default selection", _requested)
    _impl = _native if _native is not None else reference
else:
    _impl = _native if _native is not None else reference


def active_backend() -> str:
    return _impl.BACKEND_NAME


def conv1d_forward(x, w, b, stride: int):
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return np.asarray(_impl.conv1d_forward(x, w, b, stride))


def conv1d_backward(x, w, stride: int, dz):
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    dz = np.ascontiguousarray(dz, dtype=np.float64)
    dx, dw, db = _impl.conv1d_backward(x, w, stride, dz)
    return np.asarray(dx), np.asarray(dw), np.asarray(db)
