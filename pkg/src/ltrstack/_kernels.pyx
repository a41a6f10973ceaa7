# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same signatures and semantics as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND = "cython"


cdef void _mm(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept nogil:
    # c = a @ b (row-major)
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef double one = 1.0, zero = 0.0
    if m == 0 or n == 0:
        return
    if k == 0:
        c[:, :] = 0.0
        return
    dgemm(b"n", b"n", &n, &m, &k, &one, &b[0, 0], &n, &a[0, 0], &k, &zero, &c[0, 0], &n)


cdef void _mm_tn(double[:, ::1] a, double[:, ::1] d, double[:, ::1] c) noexcept nogil:
    # c = a.T @ d with a (m, k), d (m, n)
    cdef int m = a.shape[0], k = a.shape[1], n = d.shape[1]
    cdef double one = 1.0, zero = 0.0
    if k == 0 or n == 0:
        return
    if m == 0:
        c[:, :] = 0.0
        return
    dgemm(b"n", b"t", &n, &k, &m, &one, &d[0, 0], &n, &a[0, 0], &k, &zero, &c[0, 0], &n)


cdef void _mm_nt(double[:, ::1] d, double[:, ::1] w, double[:, ::1] c) noexcept nogil:
    # c = d @ w.T with d (m, n), w (k, n)
    cdef int m = d.shape[0], n = d.shape[1], k = w.shape[0]
    cdef double one = 1.0, zero = 0.0
    if m == 0 or k == 0:
        return
    if n == 0:
        c[:, :] = 0.0
        return
    dgemm(b"t", b"n", &k, &m, &n, &one, &w[0, 0], &n, &d[0, 0], &n, &zero, &c[0, 0], &k)


def mlp_forward(list weights, list biases, x, bint relu):
    cdef Py_ssize_t n_layers = len(weights), layer, r, c
    cdef bint hidden
    cdef double[:, ::1] h = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] w, z
    cdef double[::1] b
    cdef double v
    acts = [x]
    for layer in range(n_layers):
        w = weights[layer]
        b = biases[layer]
        out = np.empty((h.shape[0], w.shape[1]))
        z = out
        _mm(h, w, z)
        hidden = layer < n_layers - 1
        with nogil:
            for r in range(z.shape[0]):
                for c in range(z.shape[1]):
                    v = z[r, c] + b[c]
                    if hidden and relu and v < 0.0:
                        v = 0.0
                    z[r, c] = v
        if hidden and not relu:
            # numpy's vectorised tanh beats a scalar libm loop
            np.tanh(out, out=out)
        acts.append(out)
        h = z
    return acts


def mlp_backward(list weights, list acts, upstream, bint relu):
    cdef Py_ssize_t n_layers = len(weights), layer, r, c
    cdef double[:, ::1] d = np.array(upstream, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] a, w, dw_v, dx_v
    cdef double[::1] db_v
    dws = [None] * n_layers
    dbs = [None] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        if layer < n_layers - 1:
            a = acts[layer + 1]
            with nogil:
                for r in range(d.shape[0]):
                    for c in range(d.shape[1]):
                        if relu:
                            if a[r, c] <= 0.0:
                                d[r, c] = 0.0
                        else:
                            d[r, c] = d[r, c] * (1.0 - a[r, c] * a[r, c])
        a = np.ascontiguousarray(acts[layer], dtype=np.float64)
        w = weights[layer]
        dw = np.empty((a.shape[1], d.shape[1]))
        dw_v = dw
        _mm_tn(a, d, dw_v)
        db = np.zeros(d.shape[1])
        db_v = db
        with nogil:
            for r in range(d.shape[0]):
                for c in range(d.shape[1]):
                    db_v[c] += d[r, c]
        dx = np.empty((d.shape[0], w.shape[0]))
        dx_v = dx
        _mm_nt(d, w, dx_v)
        dws[layer] = dw
        dbs[layer] = db
        d = dx_v
    return dws, dbs, np.asarray(d)


cdef inline double _sig(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def superiority_matrix(s_in):
    cdef double[::1] s = np.ascontiguousarray(s_in, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], i, j
    out = np.zeros((n, n))
    cdef double[:, ::1] a = out
    with nogil:
        for i in range(n):
            for j in range(n):
                if i != j:
                    a[i, j] = _sig(s[i] - s[j])
    return out


def superiority(s, p):
    cdef double[:, ::1] a = superiority_matrix(s)
    cdef double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    out = np.empty((a.shape[0], pv.shape[1]))
    _mm(a, pv, out)
    return out


def superiority_backward(s, d_out):
    cdef double[:, ::1] a = superiority_matrix(s)
    cdef double[:, ::1] dv = np.ascontiguousarray(d_out, dtype=np.float64)
    out = np.empty((a.shape[1], dv.shape[1]))
    _mm_tn(a, dv, out)
    return out


def masked_softmax(d_in):
    cdef double[:, ::1] d = np.ascontiguousarray(d_in, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], i, j
    cdef double m, tot
    out = np.zeros((n, n))
    cdef double[:, ::1] w = out
    if n < 2:
        return out
    with nogil:
        for i in range(n):
            m = -1e308
            for j in range(n):
                if j != i and d[i, j] > m:
                    m = d[i, j]
            tot = 0.0
            for j in range(n):
                if j != i:
                    w[i, j] = exp(d[i, j] - m)
                    tot = tot + w[i, j]
            for j in range(n):
                w[i, j] = w[i, j] / tot
    return out


def masked_softmax_backward(w_in, dw_in):
    cdef double[:, ::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef double[:, ::1] dw = np.ascontiguousarray(dw_in, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], i, j
    cdef double acc
    out = np.zeros((n, n))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc = acc + dw[i, j] * w[i, j]
            for j in range(n):
                if j != i:
                    o[i, j] = w[i, j] * (dw[i, j] - acc)
    return out


def gbt_scores(g_in):
    cdef double[:, ::1] g = np.ascontiguousarray(g_in, dtype=np.float64)
    cdef Py_ssize_t n = g.shape[0], i, j
    cdef double mx, tot
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            mx = 0.0
            for j in range(n):
                if j != i and -g[i, j] > mx:
                    mx = -g[i, j]
            if mx > 700.0:
                tot = exp(-mx)
                for j in range(n):
                    if j != i:
                        tot = tot + exp(-g[i, j] - mx)
                o[i] = exp(-(mx + log(tot)))
            else:
                tot = 0.0
                for j in range(n):
                    if j != i:
                        tot = tot + exp(-g[i, j])
                o[i] = 1.0 / (1.0 + tot)
    return out


def avg_scores(g_in):
    cdef double[:, ::1] g = np.ascontiguousarray(g_in, dtype=np.float64)
    cdef Py_ssize_t n = g.shape[0], i, j
    cdef double tot
    out = np.zeros(n)
    cdef double[::1] o = out
    if n < 2:
        return out
    with nogil:
        for i in range(n):
            tot = 0.0
            for j in range(n):
                if j != i:
                    tot = tot + g[i, j]
            o[i] = tot / (n - 1)
    return out


def context_discount(u_in, x_in, double lam, double bandwidth):
    cdef double[::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef double[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], f = x.shape[1], i, j, k
    cdef double pen, dist, t
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            pen = 0.0
            for j in range(n):
                if j != i and u[j] > u[i]:
                    dist = 0.0
                    for k in range(f):
                        t = x[i, k] - x[j, k]
                        dist = dist + t * t
                    pen = pen + exp(-dist / bandwidth) * (u[j] - u[i])
            o[i] = u[i] - lam * pen
    return out


def adam_update(list params, list grads, list ms, list vs, double lr, double b1, double b2,
                double c1, double c2, double eps):
    """In-place Adam step over lists of C-contiguous arrays."""
    cdef Py_ssize_t a, i, n
    cdef double[::1] p, g, m, v
    cdef double gi
    for a in range(len(params)):
        p = params[a].reshape(-1)
        g = np.ascontiguousarray(grads[a], dtype=np.float64).reshape(-1)
        m = ms[a].reshape(-1)
        v = vs[a].reshape(-1)
        n = p.shape[0]
        with nogil:
            for i in range(n):
                gi = g[i]
                m[i] = b1 * m[i] + (1.0 - b1) * gi
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi
                p[i] -= lr * (m[i] / c1) / (sqrt(v[i] / c2) + eps)
