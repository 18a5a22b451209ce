# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot numeric kernels.

Plain C loops over contiguous float64 buffers; semantics match
``rankforge.backend.pykernels`` (results agree to rounding order).
"""

import numpy as np

from libc.math cimport exp, fabs, log1p

BACKEND_NAME = "c"


cdef inline double _sigmoid(double a) noexcept:
    cdef double e
    if a >= 0.0:
        return 1.0 / (1.0 + exp(-a))
    e = exp(a)
    return e / (1.0 + e)


def linear_forward(x, w, b):
    """Batched affine map: returns x @ w.T + b for x of shape (B, d_in)."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t nb = xv.shape[0], din = xv.shape[1], dout = wv.shape[0]
    if wv.shape[1] != din or bv.shape[0] != dout:
        raise ValueError("linear_forward: dimension mismatch")
    out = np.empty((nb, dout), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(nb):
        for j in range(dout):
            acc = bv[j]
            for k in range(din):
                acc += xv[i, k] * wv[j, k]
            ov[i, j] = acc
    return out


def linear_backward(x, w, dy):
    """Gradients of a batched affine map: (dx, dw, db) given upstream dy."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[:, ::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef Py_ssize_t nb = xv.shape[0], din = xv.shape[1], dout = wv.shape[0]
    dx = np.zeros((nb, din), dtype=np.float64)
    dw = np.zeros((dout, din), dtype=np.float64)
    db = np.zeros(dout, dtype=np.float64)
    cdef double[:, ::1] dxv = dx
    cdef double[:, ::1] dwv = dw
    cdef double[::1] dbv = db
    cdef Py_ssize_t i, j, k
    cdef double g
    for i in range(nb):
        for j in range(dout):
            g = dyv[i, j]
            dbv[j] += g
            for k in range(din):
                dxv[i, k] += g * wv[j, k]
                dwv[j, k] += g * xv[i, k]
    return dx, dw, db


def relu_forward(a):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64).ravel()
    out = np.empty(av.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(av.shape[0]):
        ov[i] = av[i] if av[i] > 0.0 else 0.0
    return out.reshape(np.shape(a))


def relu_backward(dh, a):
    """Backward of relu evaluated at pre-activation a; zero at the kink."""
    cdef double[::1] dv = np.ascontiguousarray(dh, dtype=np.float64).ravel()
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64).ravel()
    out = np.empty(av.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(av.shape[0]):
        ov[i] = dv[i] if av[i] > 0.0 else 0.0
    return out.reshape(np.shape(a))


def sigmoid(a):
    """Numerically stable logistic function."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] av = arr.ravel()
    out = np.empty(av.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(av.shape[0]):
        ov[i] = _sigmoid(av[i])
    return out.reshape(arr.shape)


def bce_logits(logits, targets):
    """Summed binary cross-entropy on logits, plus its gradient."""
    arr = np.ascontiguousarray(logits, dtype=np.float64)
    cdef double[::1] lv = arr.ravel()
    cdef double[::1] tv = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    if lv.shape[0] != tv.shape[0]:
        raise ValueError("bce_logits: shape mismatch")
    dl = np.empty(lv.shape[0], dtype=np.float64)
    cdef double[::1] dv = dl
    cdef double loss = 0.0, l
    cdef Py_ssize_t i
    for i in range(lv.shape[0]):
        l = lv[i]
        loss += (l if l > 0.0 else 0.0) - l * tv[i] + log1p(exp(-fabs(l)))
        dv[i] = _sigmoid(l) - tv[i]
    return loss, dl.reshape(arr.shape)


def pairwise_logistic(scores, ranks):
    """Pairwise logistic (RankNet-style) loss over all ordered pairs."""
    cdef double[::1] sv = np.ascontiguousarray(scores, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(ranks, dtype=np.float64)
    cdef Py_ssize_t n = sv.shape[0]
    ds = np.zeros(n, dtype=np.float64)
    cdef double[::1] dv = ds
    if n < 2:
        return 0.0, ds
    cdef double loss = 0.0, z, t, g, inv
    cdef Py_ssize_t i, j
    cdef double npairs = <double> (n * (n - 1))
    inv = 1.0 / npairs
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            z = sv[i] - sv[j]
            if yv[i] > yv[j]:
                t = 1.0
            elif yv[i] < yv[j]:
                t = 0.0
            else:
                t = 0.5
            loss += (z if z > 0.0 else 0.0) - z * t + log1p(exp(-fabs(z)))
            g = (_sigmoid(z) - t) * inv
            dv[i] += g
            dv[j] -= g
    return loss * inv, ds


def pairwise_hinge(scores, ranks, double margin):
    """Margin ranking loss over ordered pairs with ranks[i] > ranks[j]."""
    cdef double[::1] sv = np.ascontiguousarray(scores, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(ranks, dtype=np.float64)
    cdef Py_ssize_t n = sv.shape[0]
    ds = np.zeros(n, dtype=np.float64)
    cdef double[::1] dv = ds
    if n < 2:
        return 0.0, ds
    cdef Py_ssize_t i, j, npairs = 0
    cdef double loss = 0.0, gap, inv
    for i in range(n):
        for j in range(n):
            if yv[i] > yv[j]:
                npairs += 1
                gap = margin - (sv[i] - sv[j])
                if gap > 0.0:
                    loss += gap
    if npairs == 0:
        return 0.0, ds
    inv = 1.0 / (<double> npairs)
    for i in range(n):
        for j in range(n):
            if yv[i] > yv[j] and margin - (sv[i] - sv[j]) > 0.0:
                dv[i] -= inv
                dv[j] += inv
    return loss * inv, ds
