# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled activation kernels; same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, log1p, tanh, sqrt, M_PI

cnp.import_array()

cdef double GELU_C = 0.044715
cdef double GELU_K = sqrt(2.0 / M_PI)

# order must match _pykernels.KINDS
cdef enum:
    SIGMOID = 0
    GELU = 1
    MISH = 2
    RELU = 3
    PRELU = 4
    SILU = 5
    SOFTPLUS = 6


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e = exp(-fabs(z))
    if z >= 0:
        return 1.0 / (1.0 + e)
    return e / (1.0 + e)


cdef inline double _sigmoid_deriv(double z) noexcept nogil:
    # e / (1 + e)^2 with e = exp(-|z|); no cancellation in the tails
    cdef double e = exp(-fabs(z))
    return e / ((1.0 + e) * (1.0 + e))


cdef inline double _mish_tanh(double z, double* omt2, double* sig) noexcept nogil:
    # tanh(softplus(z)) = n / (n + 2), n = e^z (e^z + 2); one exp, written in
    # exp(-z) for z > 0 so nothing overflows. Also returns 1 - t^2 and sigmoid(z).
    cdef double e, n, d, w
    if z > 0:
        w = exp(-z)
        d = 1.0 + 2.0 * w * (1.0 + w)
        omt2[0] = 4.0 * (w * (1.0 + w)) * (w * (1.0 + w)) / (d * d)
        sig[0] = 1.0 / (1.0 + w)
        return (1.0 + 2.0 * w) / d
    e = exp(z)
    n = e * (e + 2.0)
    d = n + 2.0
    omt2[0] = 4.0 * (n + 1.0) / (d * d)
    sig[0] = e / (1.0 + e)
    return n / d


cdef inline double _softplus(double z) noexcept nogil:
    cdef double m = z if z > 0 else 0.0
    return m + log1p(exp(-fabs(z)))


cdef inline double _value(int kind, double z, double slope) noexcept nogil:
    cdef double omt2, sig
    if kind == SIGMOID:
        return _sigmoid(z)
    elif kind == GELU:
        return 0.5 * z * (1.0 + tanh(GELU_K * (z + GELU_C * z * z * z)))
    elif kind == MISH:
        return z * _mish_tanh(z, &omt2, &sig)
    elif kind == RELU:
        return z if z > 0 else 0.0
    elif kind == PRELU:
        return z if z > 0 else slope * z
    elif kind == SILU:
        return z * _sigmoid(z)
    else:
        return _softplus(z)


cdef inline double _deriv(int kind, double z, double slope) noexcept nogil:
    cdef double s, t, omt2, sig
    if kind == SIGMOID:
        return _sigmoid_deriv(z)
    elif kind == GELU:
        t = tanh(GELU_K * (z + GELU_C * z * z * z))
        return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * z * z)
    elif kind == MISH:
        t = _mish_tanh(z, &omt2, &sig)
        return t + z * omt2 * sig
    elif kind == RELU:
        return 1.0 if z > 0 else 0.0
    elif kind == PRELU:
        return 1.0 if z > 0 else slope
    elif kind == SILU:
        return _sigmoid(z) + z * _sigmoid_deriv(z)
    else:
        return _sigmoid(z)


def gl_forward(int kind, const double[::1] x, const double[:, ::1] coef,
               const double[::1] denom, double step, double slope=0.0):
    cdef Py_ssize_t M = x.shape[0]
    cdef Py_ssize_t C = coef.shape[0]
    cdef Py_ssize_t N = coef.shape[1]
    out_arr = np.empty(M)
    planes_arr = np.empty((N, M))
    cdef double[::1] out = out_arr
    cdef double[:, ::1] planes = planes_arr
    cdef Py_ssize_t i, n, c
    cdef double acc, p, xi
    c = 0
    with nogil:
        for i in range(M):
            xi = x[i]
            acc = 0.0
            for n in range(N):
                p = _value(kind, xi - n * step, slope)
                planes[n, i] = p
                acc += coef[c, n] * p
            out[i] = acc / denom[c]
            c += 1
            if c == C:
                c = 0
    return out_arr, planes_arr


def gl_backward(int kind, const double[::1] x, const double[::1] upstream,
                const double[:, ::1] coef, const double[:, ::1] dcoef,
                const double[::1] denom, double step, double log_step,
                const double[:, ::1] planes, double slope=0.0):
    cdef Py_ssize_t M = x.shape[0]
    cdef Py_ssize_t C = coef.shape[0]
    cdef Py_ssize_t N = coef.shape[1]
    d_input_arr = np.empty(M)
    d_order_arr = np.zeros(C)
    cdef double[::1] d_input = d_input_arr
    cdef double[::1] d_order = d_order_arr
    cdef Py_ssize_t i, n, c
    cdef double dsum, vsum, osum, ssum, z, p, up, cn, d_slope = 0.0
    c = 0
    with nogil:
        for i in range(M):
            up = upstream[i]
            dsum = 0.0
            vsum = 0.0
            osum = 0.0
            ssum = 0.0
            for n in range(N):
                z = x[i] - n * step
                cn = coef[c, n]
                dsum += cn * _deriv(kind, z, slope)
                p = planes[n, i]
                vsum += cn * p
                osum += dcoef[c, n] * p
                if kind == PRELU and not z > 0:
                    ssum += cn * z
            d_input[i] = up * (dsum / denom[c])
            d_order[c] += up * (-log_step * (vsum / denom[c]) + osum / denom[c])
            d_slope += up * (ssum / denom[c])
            c += 1
            if c == C:
                c = 0
    return d_input_arr, d_order_arr, d_slope
