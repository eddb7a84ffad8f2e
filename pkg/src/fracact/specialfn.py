"""Scalar Gamma-family functions.

``gamma`` and ``log_gamma`` use a Lanczos approximation (g = 7, nine
coefficients) with reflection for arguments below 1/2. ``gamma_weierstrass``
evaluates the truncated Weierstrass product and is only meant as a slow,
independent reference.
"""

import math

import numpy as np

from .errors import DomainError, GammaOverflowError, PoleError

EULER_GAMMA = 0.5772156649015329
POLE_TOL = 1e-12

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
# Gamma(x) overflows a double for x above this.
_GAMMA_MAX_ARG = 171.6243769563027


def is_pole(z):
    """True if ``z`` is within ``POLE_TOL`` of a non-positive integer."""
    if z > POLE_TOL:
        return False
    return abs(z - round(z)) <= POLE_TOL


def sinpi(z):
    """sin(pi * z) with exact argument reduction."""
    k = round(2.0 * z)
    y = z - 0.5 * k  # exact, |y| <= 1/4
    k %= 4
    if k == 0:
        return math.sin(math.pi * y)
    if k == 1:
        return math.cos(math.pi * y)
    if k == 2:
        return -math.sin(math.pi * y)
    return -math.cos(math.pi * y)


def _lanczos_series(x):
    s = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        s += _LANCZOS_COEF[i] / (x + i)
    return s


def _gamma_right(z):
    # z >= 0.5
    if z == int(z) and z <= _GAMMA_MAX_ARG:
        return float(math.factorial(int(z) - 1))
    x = z - 1.0
    t = x + _LANCZOS_G + 0.5
    # split the power so t**(x + 0.5) does not overflow before the product does
    p = t ** (0.5 * (x + 0.5))
    return math.sqrt(2.0 * math.pi) * p * (p * math.exp(-t)) * _lanczos_series(x)


def _log_gamma_right(z):
    x = z - 1.0
    t = x + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(_lanczos_series(x))


def gamma(z):
    """Gamma function for real ``z``.

    Raises PoleError at non-positive integers and GammaOverflowError when
    the result does not fit in a double.
    """
    z = float(z)
    if math.isnan(z):
        raise DomainError("gamma of NaN")
    if is_pole(z):
        raise PoleError(f"gamma has a pole at z={z!r}")
    if z >= 0.5:
        if z > _GAMMA_MAX_ARG:
            raise GammaOverflowError(f"gamma({z!r}) overflows")
        return _gamma_right(z)
    s = sinpi(z)
    w = 1.0 - z
    if w <= _GAMMA_MAX_ARG:
        denom = s * _gamma_right(w)
        if denom == 0.0:
            raise GammaOverflowError(f"gamma({z!r}) overflows")
        val = math.pi / denom
    else:
        # gamma(1 - z) itself overflows; the result is tiny, go through logs
        mag = math.log(math.pi) - math.log(abs(s)) - _log_gamma_right(w)
        val = math.copysign(math.exp(mag), s)
    if not math.isfinite(val):
        raise GammaOverflowError(f"gamma({z!r}) overflows")
    return val


def log_gamma(z):
    """Natural log of Gamma(z) for z > 0."""
    z = float(z)
    if not z > 0.0:
        raise DomainError(f"log_gamma requires z > 0, got {z!r}")
    if z == int(z) and z <= _GAMMA_MAX_ARG:
        return math.log(math.factorial(int(z) - 1))
    if z < 0.5:
        # log Gamma(z) = log Gamma(z + 1) - log z
        return _log_gamma_right(z + 1.0) - math.log(z)
    return _log_gamma_right(z)


def reciprocal_gamma(z):
    """1/Gamma(z); entire, exactly 0 at the non-positive integers."""
    z = float(z)
    if is_pole(z):
        return 0.0
    if z >= 0.5:
        if z > _GAMMA_MAX_ARG:
            return math.exp(-_log_gamma_right(z))
        return 1.0 / _gamma_right(z)
    # reflection: 1/Gamma(z) = sin(pi z) Gamma(1 - z) / pi
    w = 1.0 - z
    s = sinpi(z)
    if w <= _GAMMA_MAX_ARG:
        return s * _gamma_right(w) / math.pi
    try:
        return s * math.exp(_log_gamma_right(w) - math.log(math.pi))
    except OverflowError:
        return math.copysign(math.inf, s)


def gamma_weierstrass(z, terms):
    """Truncated Weierstrass product for Gamma(z), z > 0.

    (e^{-gamma z} / z) * prod_{k=1}^{terms} (1 + z/k)^{-1} e^{z/k}

    The product is accumulated as a sum of logs.
    """
    z = float(z)
    if not z > 0.0:
        raise DomainError(f"gamma_weierstrass requires z > 0, got {z!r}")
    terms = int(terms)
    if terms < 1:
        raise DomainError("terms must be >= 1")
    q = z / np.arange(1, terms + 1, dtype=np.float64)
    log_prod = float(np.sum(q - np.log1p(q)))
    return math.exp(log_prod - EULER_GAMMA * z) / z
