"""Truncated Grunwald-Letnikov operator.

For order ``a``, ``N`` terms and step ``h``::

    F(x) = h**(-a) * sum_{n=0}^{N-1} c_n(a) * f(x - n*h)

with ``c_0 = 1`` and ``c_{n+1} = c_n * (n - a) / (n + 1)``. Differentiating the
recurrence gives ``dc/da`` without any digamma evaluation. The step is a
function of ``N`` only (``h = 1/max(1, N-1)``), so the sampled window
``[x - 1, x]`` has constant length for ``N >= 2``.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, NonFiniteError, PoleError
from .specialfn import gamma, is_pole, reciprocal_gamma


def step_for_terms(N):
    """Default step ``1/max(1, N-1)``."""
    N = int(N)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return 1.0 / max(1, N - 1)


def _frozen(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GlCoefficients:
    order: float
    terms: int
    step: float
    c: np.ndarray
    dc_da: np.ndarray

    @property
    def denom(self):
        """``h**a``; results are divided by it so a=1 gives an exact backward difference."""
        return self.step**self.order

    @property
    def log_step(self):
        return math.log(self.step)

    def offsets(self):
        return np.arange(self.terms, dtype=np.float64) * self.step


@dataclass(frozen=True)
class ScalarFn:
    eval: Callable[[float], float]
    deriv: Callable[[float], float]


def gl_coefficients(a, N, step=None):
    """Coefficients and their order-derivatives via the recurrence.

    Finite for every real ``a``. ``step`` defaults to ``step_for_terms(N)``.
    """
    a = float(a)
    N = int(N)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    h = step_for_terms(N) if step is None else float(step)
    if not h > 0.0:
        raise DomainError(f"step must be positive, got {h!r}")
    c = [1.0] * N
    dc = [0.0] * N
    for n in range(N - 1):
        # same operation order as c_{n+1} = c_n (n - a) / (n + 1), so the
        # stored values satisfy the recurrence bit-for-bit
        c[n + 1] = c[n] * (n - a) / (n + 1)
        dc[n + 1] = dc[n] * (n - a) / (n + 1) - c[n] / (n + 1)
    return GlCoefficients(order=a, terms=N, step=h, c=_frozen(c), dc_da=_frozen(dc))


def gl_coefficients_gamma(a, N):
    """Direct Gamma-ratio form of the coefficients (reference for the recurrence).

    c_n = (-1)^n Gamma(a+1) / (Gamma(n+1) Gamma(1-n+a))
    """
    a = float(a)
    N = int(N)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    ga = gamma(a + 1.0)
    out = np.empty(N)
    for n in range(N):
        sign = -1.0 if n % 2 else 1.0
        out[n] = sign * ga * reciprocal_gamma(n + 1.0) * reciprocal_gamma(1.0 - n + a)
    return out


def _check_finite(value, what):
    if not math.isfinite(value):
        raise NonFiniteError(f"non-finite {what}: {value!r}")
    return value


def _sample(fn, coeffs, x):
    vals = [fn(x - n * coeffs.step) for n in range(coeffs.terms)]
    for n, v in enumerate(vals):
        if not math.isfinite(v):
            raise NonFiniteError(f"f(x - {n}h) is not finite at x={x!r}", index=n)
    return vals


def frac_apply(f, coeffs, x):
    """h^{-a} * sum_n c_n f(x - n h)."""
    vals = _sample(f.eval, coeffs, float(x))
    s = math.fsum(c * v for c, v in zip(coeffs.c, vals))
    return _check_finite(s / coeffs.denom, "frac_apply result")


def frac_grad_input(f, coeffs, x):
    """d/dx of frac_apply."""
    vals = _sample(f.deriv, coeffs, float(x))
    s = math.fsum(c * v for c, v in zip(coeffs.c, vals))
    return _check_finite(s / coeffs.denom, "frac_grad_input result")


def frac_grad_order(f, coeffs, x):
    """d/da of frac_apply at fixed N and h."""
    vals = _sample(f.eval, coeffs, float(x))
    denom = coeffs.denom
    value = math.fsum(c * v for c, v in zip(coeffs.c, vals)) / denom
    dsum = math.fsum(d * v for d, v in zip(coeffs.dc_da, vals)) / denom
    return _check_finite(-coeffs.log_step * value + dsum, "frac_grad_order result")


def frac_power(k, a, x):
    """Closed-form fractional derivative of x**k: Gamma(k+1)/Gamma(k+1-a) * x**(k-a)."""
    k = float(k)
    a = float(a)
    x = float(x)
    if k < 0.0:
        raise DomainError(f"k must be >= 0, got {k!r}")
    if x < 0.0:
        raise DomainError(f"x must be >= 0, got {x!r}")
    if is_pole(k + 1.0 - a):
        raise PoleError(f"Gamma(k + 1 - a) has a pole at k={k!r}, a={a!r}")
    e = k - a
    if x == 0.0 and e < 0.0:
        raise NonFiniteError(f"0 ** {e!r} is infinite")
    return gamma(k + 1.0) * reciprocal_gamma(k + 1.0 - a) * x**e
