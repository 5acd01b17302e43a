# cython: language_level=3
"""Compiled inner-loop kernel.

Mirrors ``gtsvrg._fallback`` operation for operation: every dot product is
accumulated in ascending index order starting from 0.0, and the module is
built with ``-ffp-contract=off`` so no fused multiply-adds are introduced.
"""

import numpy as np

cimport cython
from cython.parallel cimport prange
from libc.math cimport exp, isfinite
from libc.stdint cimport int64_t, uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _hash(uint64_t seed, uint64_t node, uint64_t t, uint64_t k) noexcept nogil:
    cdef uint64_t h = _mix(seed + GOLDEN)
    h = _mix(h + (node + 1) * GOLDEN)
    h = _mix(h + (t + 1) * GOLDEN)
    return _mix(h + (k + 1) * GOLDEN)


def draw_indices(uint64_t seed, int64_t t, int64_t k, const int64_t[::1] m):
    """Component index drawn by every node for the step leaving ``(t, k)``."""
    cdef Py_ssize_t n = m.shape[0], i
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    for i in range(n):
        o[i] = <int64_t>(_hash(seed, <uint64_t>i, <uint64_t>t, <uint64_t>k) % <uint64_t>m[i])
    return out


cdef inline void _component_grad(int family, int64_t c, Py_ssize_t p,
                                 const double* A, const double* vec, const double* labels,
                                 double lam, const double* x, double* g) noexcept nogil:
    cdef Py_ssize_t a, q
    cdef double acc, z, coef
    if family == 0:
        for a in range(p):
            acc = 0.0
            for q in range(p):
                acc = acc + A[(c * p + a) * p + q] * x[q]
            g[a] = acc + vec[c * p + a]
    else:
        acc = 0.0
        for q in range(p):
            acc = acc + vec[c * p + q] * x[q]
        z = labels[c] * acc
        coef = -labels[c] / (1.0 + exp(z))
        for q in range(p):
            g[q] = coef * vec[c * p + q] + lam * x[q]


cdef inline void _node_update(Py_ssize_t i, Py_ssize_t n, Py_ssize_t p, const double* W,
                              const double* xo, const double* yo, const double* vo,
                              double* xn, double* yn, double* vn,
                              const double* snap, const double* sgrad,
                              int family, const double* A, const double* vec,
                              const double* labels, double lam, const int64_t* offsets,
                              double alpha, uint64_t seed, int64_t t, int64_t k,
                              double* scratch) noexcept nogil:
    cdef Py_ssize_t r, q
    cdef double acc
    cdef int64_t m = offsets[i + 1] - offsets[i]
    cdef int64_t c
    cdef double* g1 = scratch + i * 2 * p
    cdef double* g2 = g1 + p
    # x+ = W x - alpha y
    for q in range(p):
        acc = 0.0
        for r in range(n):
            acc = acc + W[i * n + r] * xo[r * p + q]
        xn[i * p + q] = acc - alpha * yo[i * p + q]
    # v+ = grad f_is(x+) - grad f_is(snapshot) + full snapshot gradient
    c = offsets[i] + <int64_t>(_hash(seed, <uint64_t>i, <uint64_t>t, <uint64_t>k) % <uint64_t>m)
    _component_grad(family, c, p, A, vec, labels, lam, xn + i * p, g1)
    _component_grad(family, c, p, A, vec, labels, lam, snap + i * p, g2)
    for q in range(p):
        vn[i * p + q] = (g1[q] - g2[q]) + sgrad[i * p + q]
    # y+ = W y + v+ - v
    for q in range(p):
        acc = 0.0
        for r in range(n):
            acc = acc + W[i * n + r] * yo[r * p + q]
        yn[i * p + q] = (acc + vn[i * p + q]) - vo[i * p + q]


def gtsvrg_steps(const double[:, ::1] W,
                 double[:, ::1] x, double[:, ::1] y, double[:, ::1] v,
                 const double[:, ::1] snap_x, const double[:, ::1] snap_grad,
                 int family, const double[:, :, ::1] A, const double[:, ::1] vec,
                 const double[::1] labels, double lam, const int64_t[::1] offsets,
                 double alpha, uint64_t seed, int64_t t, int64_t k0, int64_t steps,
                 int num_threads=1):
    """Run ``steps`` inner iterations in place on ``x``, ``y``, ``v``.

    Returns the number of completed steps; fewer than ``steps`` means a
    non-finite iterate was detected and the arrays hold that iterate.
    """
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1]
    cdef Py_ssize_t i, q
    cdef int64_t s, done = 0
    cdef bint bad = False

    x2 = np.empty((n, p))
    y2 = np.empty((n, p))
    v2 = np.empty((n, p))
    scratch = np.empty(2 * n * p + 1)
    cdef double[:, ::1] x2v = x2, y2v = y2, v2v = v2
    cdef double[::1] scv = scratch

    cdef const double* Wp = &W[0, 0]
    cdef double* bufx[2]
    cdef double* bufy[2]
    cdef double* bufv[2]
    bufx[0] = &x[0, 0]; bufx[1] = &x2v[0, 0]
    bufy[0] = &y[0, 0]; bufy[1] = &y2v[0, 0]
    bufv[0] = &v[0, 0]; bufv[1] = &v2v[0, 0]
    cdef const double* sp = &snap_x[0, 0]
    cdef const double* sg = &snap_grad[0, 0]
    cdef const double* Ap = &A[0, 0, 0] if A.shape[0] > 0 else NULL
    cdef const double* vp = &vec[0, 0]
    cdef const double* lp = &labels[0] if labels.shape[0] > 0 else NULL
    cdef const int64_t* op = &offsets[0]
    cdef double* scp = &scv[0]
    cdef int src, dst

    with nogil:
        for s in range(steps):
            src = <int>(s & 1)
            dst = 1 - src
            if num_threads > 1:
                for i in prange(n, num_threads=num_threads, schedule="static"):
                    _node_update(i, n, p, Wp, bufx[src], bufy[src], bufv[src],
                                 bufx[dst], bufy[dst], bufv[dst], sp, sg,
                                 family, Ap, vp, lp, lam, op, alpha, seed, t, k0 + s, scp)
            else:
                for i in range(n):
                    _node_update(i, n, p, Wp, bufx[src], bufy[src], bufv[src],
                                 bufx[dst], bufy[dst], bufv[dst], sp, sg,
                                 family, Ap, vp, lp, lam, op, alpha, seed, t, k0 + s, scp)
            done = s + 1
            if (done & 1023) == 0 or done == steps:
                for q in range(n * p):
                    if not (isfinite(bufx[dst][q]) and isfinite(bufy[dst][q])):
                        bad = True
                        break
                if bad:
                    break

    if done & 1:
        x[...] = x2v
        y[...] = y2v
        v[...] = v2v
    return done
