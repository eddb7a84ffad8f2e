"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation. Setting ``FRACACT_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels
from ._pykernels import KIND_CODE, KINDS

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = "python" if (_ckernels is None or os.environ.get("FRACACT_PURE_PYTHON") == "1") else "cython"


def available_backends():
    return sorted(_BACKENDS)


def get_backend():
    return _active


def set_backend(name):
    """Switch the active backend; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}")
    prev, _active = _active, name
    return prev


def gl_forward(kind, x, coef, denom, step, slope=0.0):
    return _BACKENDS[_active].gl_forward(KIND_CODE[kind], x, coef, denom, step, slope)


def gl_backward(kind, x, upstream, coef, dcoef, denom, step, log_step, planes, slope=0.0):
    return _BACKENDS[_active].gl_backward(
        KIND_CODE[kind], x, upstream, coef, dcoef, denom, step, log_step, planes, slope
    )


__all__ = ["KINDS", "available_backends", "get_backend", "set_backend", "gl_forward", "gl_backward"]
