"""Base activations, their fractional (GL) variants, and FALU.

A layer is described by an :class:`ActivationSpec`. ``frac_act_forward``
returns the output together with a :class:`ForwardCache` holding the ``N``
sampled planes ``f(x - n*h)``; ``frac_act_backward`` consumes it.

FALU is the closed-form two-branch family in ``(a, beta)``; it is selected by
``base=silu`` with ``falu_beta`` set.
"""

import enum
import functools
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _pykernels, kernels
from .errors import CacheMismatchError, DomainError, NonFiniteError
from .glcore import ScalarFn, gl_coefficients, step_for_terms

ORDER_BOX = (0.0, 2.0)
BETA_BOX = (1.0, 10.0)


class BaseKind(str, enum.Enum):
    SIGMOID = "sigmoid"
    GELU_TANH = "gelu_tanh"
    MISH = "mish"
    RELU = "relu"
    PRELU = "prelu"
    SILU = "silu"
    SOFTPLUS = "softplus"


def base_eval(kind, x):
    """Value and first derivative of a base activation at scalar ``x``."""
    kind = BaseKind(kind).value
    z = np.float64(x)
    return float(_pykernels.VALUE[kind](z, 0.25)), float(_pykernels.DERIV[kind](z, 0.25))


def scalar_fn(kind, slope=0.25):
    """Wrap a base kind as a :class:`ScalarFn` for the scalar GL operations."""
    kind = BaseKind(kind).value

    def ev(x):
        return float(_pykernels.VALUE[kind](np.float64(x), slope))

    def de(x):
        return float(_pykernels.DERIV[kind](np.float64(x), slope))

    return ScalarFn(eval=ev, deriv=de)


@dataclass
class ActivationSpec:
    """Configuration of one activation layer.

    ``order`` is a float for one order per layer, or a 1-D array with one
    order per channel (last input axis). ``step=None`` means the default
    ``1/max(1, N-1)``.
    """

    base: BaseKind
    fractional: bool = False
    order: float = 0.0
    terms: int = 1
    step: float | None = None
    falu_beta: float | None = None
    prelu_slope: float = 0.25
    name: str = "act"

    def __post_init__(self):
        self.base = BaseKind(self.base)
        self.terms = int(self.terms)
        if self.terms < 1:
            raise DomainError(f"terms must be >= 1, got {self.terms}")
        if self.step is not None and not self.step > 0:
            raise DomainError(f"step must be positive, got {self.step!r}")
        if self.falu_beta is not None:
            if self.base is not BaseKind.SILU:
                raise DomainError("FALU is defined on the silu base")
            self.fractional = True
            self.terms = 1

    @property
    def is_falu(self):
        return self.falu_beta is not None

    @property
    def resolved_step(self):
        if not self.fractional or self.is_falu:
            return 1.0
        return step_for_terms(self.terms) if self.step is None else float(self.step)

    @property
    def plane_count(self):
        return self.terms if (self.fractional and not self.is_falu) else 1


# short names used by configs and the CLI
CATALOG = {
    "sig": dict(base="sigmoid"),
    "fsig": dict(base="sigmoid", fractional=True, terms=2),
    "gelu": dict(base="gelu_tanh"),
    "fgelu": dict(base="gelu_tanh", fractional=True, terms=1),
    "mish": dict(base="mish"),
    "fmish": dict(base="mish", fractional=True, terms=2),
    "relu": dict(base="relu"),
    "prelu": dict(base="prelu"),
    "silu": dict(base="silu"),
    "softplus": dict(base="softplus"),
    "falu": dict(base="silu", falu_beta=1.0),
}


def make_activation(name, **overrides):
    """Build a spec from a catalog name, e.g. ``make_activation("fsig", terms=4)``."""
    try:
        kw = dict(CATALOG[name])
    except KeyError:
        raise DomainError(f"unknown activation {name!r}; choose from {sorted(CATALOG)}") from None
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ActivationSpec(**kw)


@dataclass
class ForwardCache:
    input: np.ndarray
    planes: np.ndarray
    coef: np.ndarray
    dcoef: np.ndarray
    denom: np.ndarray
    step: float
    log_step: float

    @property
    def plane_count(self):
        return self.planes.shape[0]


@functools.lru_cache(maxsize=256)
def _coeffs(a, N, h):
    return gl_coefficients(a, N, step=h)


def _coef_tables(spec, channels):
    N = spec.terms
    h = spec.resolved_step
    if not spec.fractional:
        return np.ones((1, 1)), np.zeros((1, 1)), np.ones(1), 1.0
    orders = np.atleast_1d(np.asarray(spec.order, dtype=np.float64))
    if orders.size not in (1, channels):
        raise DomainError(f"{orders.size} orders for {channels} channels")
    rows = [_coeffs(float(a), N, h) for a in orders]
    coef = np.ascontiguousarray([r.c for r in rows])
    dcoef = np.ascontiguousarray([r.dc_da for r in rows])
    denom = np.array([r.denom for r in rows])
    return coef, dcoef, denom, h


def _raise_nonfinite(arr, spec, what):
    flat = int(np.flatnonzero(~np.isfinite(arr))[0])
    index = np.unravel_index(flat, arr.shape) if arr.ndim else ()
    index = tuple(int(i) for i in index)
    raise NonFiniteError(f"layer {spec.name!r}: non-finite {what} at index {index}", layer=spec.name, index=index)


def frac_act_forward(spec, x):
    """Apply the activation element-wise; returns ``(output, cache)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        _raise_nonfinite(x, spec, "input")
    if spec.is_falu:
        out = falu_eval(x, spec.order, spec.falu_beta)
        cache = ForwardCache(x, x.reshape(1, -1), np.ones((1, 1)), np.zeros((1, 1)), np.ones(1), 1.0, 0.0)
    else:
        channels = x.shape[-1] if x.ndim else 1
        coef, dcoef, denom, h = _coef_tables(spec, channels)
        flat, planes = kernels.gl_forward(spec.base.value, x.ravel(), coef, denom, h, float(spec.prelu_slope))
        out = flat.reshape(x.shape)
        cache = ForwardCache(x, planes, coef, dcoef, denom, h, math.log(h))
    if not np.all(np.isfinite(out)):
        _raise_nonfinite(out, spec, "output")
    return out, cache


def _reduce_to(param, g):
    # one gradient per parameter entry: scalar for a shared parameter, vector per channel
    if np.ndim(param) == 0:
        return float(np.sum(g))
    return np.asarray(g, dtype=np.float64)


def frac_act_backward(spec, cache, upstream):
    """Gradients ``(d_input, d_order, d_beta, d_slope)``.

    ``d_order`` is summed over every element sharing the order. ``d_beta`` is
    None unless FALU; ``d_slope`` is None unless PReLU.
    """
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    if upstream.shape != cache.input.shape:
        raise CacheMismatchError(f"upstream shape {upstream.shape} != cached input shape {cache.input.shape}")
    if cache.plane_count != spec.plane_count or cache.planes.shape[1] != cache.input.size:
        raise CacheMismatchError("cache was not produced by this spec")
    x = cache.input
    if spec.is_falu:
        dx, da, db = falu_partials(x, spec.order, spec.falu_beta)
        axes = tuple(range(x.ndim - 1)) if (np.ndim(spec.order) or np.ndim(spec.falu_beta)) else None
        d_order = _reduce_to(spec.order, np.sum(upstream * da, axis=axes))
        d_beta = _reduce_to(spec.falu_beta, np.sum(upstream * db, axis=axes))
        return upstream * dx, d_order, d_beta, None
    d_in, d_order, d_slope = kernels.gl_backward(
        spec.base.value,
        x.ravel(),
        upstream.ravel(),
        cache.coef,
        cache.dcoef,
        cache.denom,
        cache.step,
        cache.log_step,
        cache.planes,
        float(spec.prelu_slope),
    )
    d_order = _reduce_to(spec.order, d_order) if spec.fractional else 0.0
    d_slope = float(d_slope) if spec.base is BaseKind.PRELU else None
    return d_in.reshape(x.shape), d_order, None, d_slope


# ---- FALU ----------------------------------------------------------------


def _sig(z):
    return _pykernels._sigmoid(z)


def _falu_parts(x, beta):
    s = _sig(beta * x)
    g = x * s
    h = g + s * (1.0 - g)
    return s, g, h


def falu_eval(x, a, beta):
    """Vectorised FALU; ``a`` and ``beta`` broadcast along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    s, g, h = _falu_parts(x, beta)
    lower = g + a * s * (1.0 - g)
    upper = h + (a - 1.0) * s * (1.0 - 2.0 * h)
    return np.where(a <= 1.0, lower, upper)


def falu_partials(x, a, beta):
    """Element-wise (dF/dx, dF/da, dF/dbeta); the lower branch owns a = 1."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    s, g, h = _falu_parts(x, beta)
    ds = s * (1.0 - s)
    s_x, s_b = beta * ds, x * ds
    g_x, g_b = s + x * s_x, x * s_b
    # lower branch: g + a s (1 - g)
    lo_x = g_x + a * (s_x * (1.0 - g) - s * g_x)
    lo_a = s * (1.0 - g)
    lo_b = g_b + a * (s_b * (1.0 - g) - s * g_b)
    # upper branch: h + (a - 1) s (1 - 2h), with h = g + s (1 - g)
    h_x = g_x + s_x * (1.0 - g) - s * g_x
    h_b = g_b + s_b * (1.0 - g) - s * g_b
    up_x = h_x + (a - 1.0) * (s_x * (1.0 - 2.0 * h) - 2.0 * s * h_x)
    up_a = s * (1.0 - 2.0 * h)
    up_b = h_b + (a - 1.0) * (s_b * (1.0 - 2.0 * h) - 2.0 * s * h_b)
    lower = a <= 1.0
    return np.where(lower, lo_x, up_x), np.where(lower, lo_a, up_a), np.where(lower, lo_b, up_b)


def _check_falu_box(a, beta):
    if not ORDER_BOX[0] <= a <= ORDER_BOX[1]:
        raise DomainError(f"FALU order must lie in [0, 2], got {a!r}")
    if not BETA_BOX[0] <= beta <= BETA_BOX[1]:
        raise DomainError(f"FALU beta must lie in [1, 10], got {beta!r}")


def falu_forward(x, a, beta):
    a, beta = float(a), float(beta)
    _check_falu_box(a, beta)
    return float(falu_eval(float(x), a, beta))


def falu_backward(x, a, beta, upstream=1.0):
    """Scalar partials scaled by ``upstream``: ``(d_x, d_a, d_beta)``."""
    a, beta = float(a), float(beta)
    _check_falu_box(a, beta)
    dx, da, db = falu_partials(float(x), a, beta)
    return float(upstream * dx), float(upstream * da), float(upstream * db)


def clamp_params(spec):
    """Project the order onto [0, 2] and FALU beta onto [1, 10]."""
    order = spec.order
    order = float(np.clip(order, *ORDER_BOX)) if np.ndim(order) == 0 else np.clip(order, *ORDER_BOX)
    beta = spec.falu_beta
    if beta is not None:
        beta = float(np.clip(beta, *BETA_BOX)) if np.ndim(beta) == 0 else np.clip(beta, *BETA_BOX)
    return replace(spec, order=order, falu_beta=beta)
