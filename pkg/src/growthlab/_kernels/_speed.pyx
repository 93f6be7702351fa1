# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Fused one-dimensional step kernels over replica batches.

Input heights have shape (n, w+2) (one margin cell per side), `aux` and
`out` have shape (n, w).  Expression order matches numpy_backend so results
agree bit-for-bit wherever only exactly-rounded operations are involved.
"""

from libc.math cimport exp, fmax, fmin, log


def step_random_deposition(double[:, :] h, double[:, :] aux, double[:, :] out):
    cdef Py_ssize_t n = out.shape[0], w = out.shape[1], i, j
    with nogil:
        for i in range(n):
            for j in range(w):
                out[i, j] = h[i, j + 1] + aux[i, j]


def step_ballistic(double[:, :] h, double[:, :] aux, double[:, :] out):
    cdef Py_ssize_t n = out.shape[0], w = out.shape[1], i, j
    cdef double acc
    with nogil:
        for i in range(n):
            for j in range(w):
                acc = h[i, j + 1] + aux[i, j]
                acc = fmax(acc, h[i, j + 2])
                acc = fmax(acc, h[i, j])
                out[i, j] = acc


def step_lpp(double[:, :] h, double[:, :] aux, double[:, :] out):
    cdef Py_ssize_t n = out.shape[0], w = out.shape[1], i, j
    with nogil:
        for i in range(n):
            for j in range(w):
                out[i, j] = h[i, j + 2] + aux[i, j]


def step_polymer(double[:, :] h, double[:, :] aux, double[:, :] out, double beta):
    cdef Py_ssize_t n = out.shape[0], w = out.shape[1], i, j
    cdef double vp, vm, big, s
    with nogil:
        for i in range(n):
            for j in range(w):
                vp = h[i, j + 2]
                vm = h[i, j]
                big = fmax(vp, vm)
                s = exp(beta * (vp - big)) + exp(beta * (vm - big))
                out[i, j] = big + log(s) / beta + aux[i, j]


cdef inline double _rsos_value(double vp, double vm, double w) nogil:
    cdef double big = fmax(vp, vm)
    cdef double small = fmin(vp, vm)
    cdef double lo = big - 1.0
    cdef double hi = small + 1.0
    cdef double v = w * lo + (1.0 - w) * hi
    v = fmax(v, lo)
    return fmin(v, hi)


def step_rsos(double[:, :] h, double[:, :] aux, double[:, :] out):
    cdef Py_ssize_t n = out.shape[0], w = out.shape[1], i, j
    with nogil:
        for i in range(n):
            for j in range(w):
                out[i, j] = _rsos_value(h[i, j + 2], h[i, j], aux[i, j])


def step_rsos_alternating(double[:, :] h, double[:, :] aux, double[:, :] out,
                          unsigned char[:] upd):
    cdef Py_ssize_t n = out.shape[0], w = out.shape[1], i, j
    with nogil:
        for i in range(n):
            for j in range(w):
                if upd[j]:
                    out[i, j] = _rsos_value(h[i, j + 2], h[i, j], aux[i, j])
                else:
                    out[i, j] = h[i, j + 1]
