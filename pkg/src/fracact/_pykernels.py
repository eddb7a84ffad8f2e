"""Pure numpy implementation of the activation kernels.

Layout shared with the compiled backend: ``x`` is a flat float64 array whose
element ``i`` belongs to channel ``i % C``; ``coef`` and ``dcoef`` have shape
``(C, N)``, ``denom`` has shape ``(C,)``. ``planes`` has shape ``(N, len(x))``
and holds ``f(x - n*h)``.
"""

import numpy as np

KINDS = ("sigmoid", "gelu_tanh", "mish", "relu", "prelu", "silu", "softplus")
KIND_CODE = {k: i for i, k in enumerate(KINDS)}

GELU_C = 0.044715
GELU_K = float(np.sqrt(2.0 / np.pi))


def _sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _sigmoid_deriv(z):
    # e / (1 + e)^2 with e = exp(-|z|); no cancellation in the tails
    e = np.exp(-np.abs(z))
    return e / ((1.0 + e) * (1.0 + e))


def _mish_parts(z):
    """``(tanh(softplus(z)), 1 - tanh^2, sigmoid(z))`` from a single exp.

    tanh(softplus(z)) = n / (n + 2) with n = e^z (e^z + 2); for z > 0 the same
    ratio is written in w = exp(-z) so nothing overflows.
    """
    z = np.asarray(z, dtype=np.float64)
    pos = z > 0
    w = np.exp(-np.abs(z))  # exp(-z) where z > 0, exp(z) elsewhere
    d_pos = 1.0 + 2.0 * w * (1.0 + w)
    n = w * (w + 2.0)
    d_neg = n + 2.0
    t = np.where(pos, (1.0 + 2.0 * w) / d_pos, n / d_neg)
    q = w * (1.0 + w)
    omt2 = np.where(pos, 4.0 * q * q / (d_pos * d_pos), 4.0 * (n + 1.0) / (d_neg * d_neg))
    sig = np.where(pos, 1.0 / (1.0 + w), w / (1.0 + w))
    return t, omt2, sig


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _val_sigmoid(z, slope):
    return _sigmoid(z)


def _der_sigmoid(z, slope):
    return _sigmoid_deriv(z)


def _val_gelu(z, slope):
    return 0.5 * z * (1.0 + np.tanh(GELU_K * (z + GELU_C * z**3)))


def _der_gelu(z, slope):
    t = np.tanh(GELU_K * (z + GELU_C * z**3))
    return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * z * z)


def _val_mish(z, slope):
    return z * _mish_parts(z)[0]


def _der_mish(z, slope):
    t, omt2, sig = _mish_parts(z)
    return t + z * omt2 * sig


def _val_relu(z, slope):
    return np.where(z > 0, z, 0.0)


def _der_relu(z, slope):
    return np.where(z > 0, 1.0, 0.0)


def _val_prelu(z, slope):
    return np.where(z > 0, z, slope * z)


def _der_prelu(z, slope):
    return np.where(z > 0, 1.0, slope)


def _val_silu(z, slope):
    return z * _sigmoid(z)


def _der_silu(z, slope):
    return _sigmoid(z) + z * _sigmoid_deriv(z)


def _val_softplus(z, slope):
    return _softplus(z)


def _der_softplus(z, slope):
    return _sigmoid(z)


VALUE = {
    "sigmoid": _val_sigmoid,
    "gelu_tanh": _val_gelu,
    "mish": _val_mish,
    "relu": _val_relu,
    "prelu": _val_prelu,
    "silu": _val_silu,
    "softplus": _val_softplus,
}
DERIV = {
    "sigmoid": _der_sigmoid,
    "gelu_tanh": _der_gelu,
    "mish": _der_mish,
    "relu": _der_relu,
    "prelu": _der_prelu,
    "silu": _der_silu,
    "softplus": _der_softplus,
}


def _by_channel(a, C):
    return a.reshape(-1, C)


def gl_forward(kind, x, coef, denom, step, slope=0.0):
    C, N = coef.shape
    val = VALUE[KINDS[kind]]
    x2 = _by_channel(x, C)
    planes = np.empty((N, x.size))
    acc = np.zeros_like(x2)
    for n in range(N):
        p = val(x2 - n * step, slope)
        planes[n] = p.ravel()
        acc += coef[:, n] * p
    return (acc / denom).ravel(), planes


def gl_backward(kind, x, upstream, coef, dcoef, denom, step, log_step, planes, slope=0.0):
    C, N = coef.shape
    der = DERIV[KINDS[kind]]
    x2 = _by_channel(x, C)
    up2 = _by_channel(upstream, C)
    dsum = np.zeros_like(x2)
    vsum = np.zeros_like(x2)
    osum = np.zeros_like(x2)
    ssum = np.zeros_like(x2)
    for n in range(N):
        z = x2 - n * step
        dsum += coef[:, n] * der(z, slope)
        p = _by_channel(planes[n], C)
        vsum += coef[:, n] * p
        osum += dcoef[:, n] * p
        if KINDS[kind] == "prelu":
            ssum += coef[:, n] * np.where(z > 0, 0.0, z)
    d_input = (up2 * (dsum / denom)).ravel()
    d_order = np.sum(up2 * (-log_step * (vsum / denom) + osum / denom), axis=0)
    d_slope = float(np.sum(up2 * (ssum / denom)))
    return d_input, d_order, d_slope
