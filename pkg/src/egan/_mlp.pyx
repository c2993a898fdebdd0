# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled MLP kernels: fused forward/backward over a stack of dense layers.

Arrays are C-contiguous float64. Row-major products are mapped onto
column-major BLAS by transposition (row-major ``Y = X W`` is column-major
``Y^T = W^T X^T``). Same call signatures as ``egan._mlp_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

cdef enum:
    ACT_LEAKY = 0
    ACT_TANH = 1


cdef int _act_code(str act) except -1:
    if act == "leaky":
        return ACT_LEAKY
    if act == "tanh":
        return ACT_TANH
    raise ValueError(f"unknown activation {act!r}")


cdef void _gemm_rm(int n, int k, int o, double *x, double *w, double *y,
                   double beta) noexcept nogil:
    # y[n, o] = x[n, k] @ w[k, o] + beta * y
    cdef char tn = b'N'
    cdef double one = 1.0
    dgemm(&tn, &tn, &o, &n, &k, &one, w, &o, x, &k, &beta, y, &o)


def mlp_forward(cnp.ndarray x, list weights, list biases, str act, double slope):
    """Forward through all layers; the last layer is linear.

    Returns ``(out, inputs)`` where ``inputs[i]`` is the input of layer ``i``
    (kept for the backward pass).
    """
    cdef int code = _act_code(act)
    cdef Py_ssize_t nlayers = len(weights)
    cdef Py_ssize_t li, r, c
    cdef int n, k, o
    cdef cnp.ndarray h = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray W, b, y
    cdef double[:, ::1] yv
    cdef double[::1] bv
    cdef double v
    inputs = []
    for li in range(nlayers):
        W = weights[li]
        b = biases[li]
        if h.ndim != 2 or W.ndim != 2 or h.shape[1] != W.shape[0]:
            raise ValueError(f"layer {li}: input {np.shape(h)} vs weight {np.shape(W)}")
        if b.ndim != 1 or b.shape[0] != W.shape[1]:
            raise ValueError(f"layer {li}: bias shape mismatch")
        if not W.flags.c_contiguous:
            W = np.ascontiguousarray(W)
        if not b.flags.c_contiguous:
            b = np.ascontiguousarray(b)
        inputs.append(h)
        n = <int>h.shape[0]
        k = <int>h.shape[1]
        o = <int>W.shape[1]
        y = np.empty((n, o), dtype=np.float64)
        yv = y
        bv = b
        for r in range(n):
            for c in range(o):
                yv[r, c] = bv[c]
        _gemm_rm(n, k, o, <double *>h.data, <double *>W.data, <double *>y.data, 1.0)
        if li < nlayers - 1:
            if code == ACT_LEAKY:
                for r in range(n):
                    for c in range(o):
                        v = yv[r, c]
                        if v <= 0.0:
                            yv[r, c] = slope * v
            else:
                for r in range(n):
                    for c in range(o):
                        yv[r, c] = tanh(yv[r, c])
        h = y
    return h, inputs


def mlp_backward(list inputs, list weights, cnp.ndarray gout, str act,
                 double slope, bint need_input=True, bint need_params=True):
    """Backward pass matching :func:`mlp_forward`.

    Returns ``(g_input, g_weights, g_biases)``; parts that were not requested
    are ``None``.
    """
    cdef int code = _act_code(act)
    cdef Py_ssize_t nlayers = len(weights)
    cdef Py_ssize_t li, r, c
    cdef int n, k, o
    cdef char tn = b'N'
    cdef char tt = b'T'
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef cnp.ndarray g = np.ascontiguousarray(gout, dtype=np.float64)
    cdef cnp.ndarray W, h, gw, gb, gx
    cdef double[:, ::1] gv, hv, gxv
    cdef double[::1] gbv
    cdef double acc
    gws = [None] * nlayers
    gbs = [None] * nlayers
    for li in range(nlayers - 1, -1, -1):
        W = weights[li]
        if not W.flags.c_contiguous:
            W = np.ascontiguousarray(W)
        h = inputs[li]
        n = <int>h.shape[0]
        k = <int>h.shape[1]
        o = <int>W.shape[1]
        if need_params:
            gw = np.empty((k, o), dtype=np.float64)
            # gW^T (o x k, col-major) = gY^T (o x n) * X (n x k)
            dgemm(&tn, &tt, &o, &k, &n, &one, <double *>g.data, &o,
                  <double *>h.data, &k, &zero, <double *>gw.data, &o)
            gb = np.empty(o, dtype=np.float64)
            gbv = gb
            gv = g
            for c in range(o):
                acc = 0.0
                for r in range(n):
                    acc = acc + gv[r, c]
                gbv[c] = acc
            gws[li] = gw
            gbs[li] = gb
        if li == 0 and not need_input:
            break
        gx = np.empty((n, k), dtype=np.float64)
        # gX^T (k x n, col-major) = W (k x o) * gY^T (o x n)
        dgemm(&tt, &tn, &k, &n, &o, &one, <double *>W.data, &o,
              <double *>g.data, &o, &zero, <double *>gx.data, &k)
        if li > 0:
            # h is the activation output of layer li-1
            gxv = gx
            hv = h
            if code == ACT_LEAKY:
                for r in range(n):
                    for c in range(k):
                        if hv[r, c] <= 0.0:
                            gxv[r, c] = gxv[r, c] * slope
            else:
                for r in range(n):
                    for c in range(k):
                        gxv[r, c] = gxv[r, c] * (1.0 - hv[r, c] * hv[r, c])
        g = gx
    if not need_params:
        gws = None
        gbs = None
    return (g if need_input else None), gws, gbs


def adam_update(cnp.ndarray param, cnp.ndarray grad, cnp.ndarray m, cnp.ndarray v,
                double lr, double beta1, double beta2, double eps, long t):
    """In-place Adam update of ``param``, ``m`` and ``v`` (flat views) at step ``t``."""
    cdef double[::1] p = param.reshape(-1)
    cdef double[::1] g = grad.reshape(-1)
    cdef double[::1] mv = m.reshape(-1)
    cdef double[::1] vv = v.reshape(-1)
    cdef Py_ssize_t i, size = p.shape[0]
    cdef double step = lr / (1.0 - beta1 ** t)
    cdef double rbc2 = 1.0 / sqrt(1.0 - beta2 ** t)
    cdef double c1 = 1.0 - beta1
    cdef double c2 = 1.0 - beta2
    cdef double gi, mi, vi
    for i in range(size):
        gi = g[i]
        mi = beta1 * mv[i] + c1 * gi
        vi = beta2 * vv[i] + c2 * gi * gi
        mv[i] = mi
        vv[i] = vi
        p[i] = p[i] - step * mi / (sqrt(vi) * rbc2 + eps)
