# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled tape kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, INFINITY, NAN, isfinite

cnp.import_array()

BACKEND = "cython"


cdef void _run(const int[:] ops, const int[:] a, const int[:] b, const double[:] c,
               int n_inputs, const double* x, double* regs) noexcept nogil:
    cdef Py_ssize_t k, r
    cdef int op
    cdef double v, d
    for k in range(n_inputs):
        regs[k] = x[k]
    r = n_inputs
    for k in range(ops.shape[0]):
        op = ops[k]
        if op == 0:
            v = c[k]
        elif op == 1:
            v = regs[a[k]] + regs[b[k]]
        elif op == 2:
            v = regs[a[k]] - regs[b[k]]
        elif op == 3:
            v = regs[a[k]] * regs[b[k]]
        elif op == 4:
            d = regs[b[k]]
            v = regs[a[k]] / d if d != 0.0 else INFINITY
        elif op == 5:
            v = sqrt(regs[a[k]]) if regs[a[k]] >= 0.0 else NAN
        elif op == 6:
            v = -regs[a[k]]
        else:
            v = pow(regs[a[k]], <double>b[k])
        regs[r] = v
        r += 1


def eval_tape(const int[:] ops, const int[:] a, const int[:] b, const double[:] c,
              int n_inputs, const int[:] outputs, x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] regs = np.empty(n_inputs + ops.shape[0] + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(outputs.shape[0])
    cdef Py_ssize_t i
    _run(ops, a, b, c, n_inputs, &xv[0], &regs[0])
    for i in range(outputs.shape[0]):
        out[i] = regs[outputs[i]]
    return out


def eval_tape_batch(const int[:] ops, const int[:] a, const int[:] b, const double[:] c,
                    int n_inputs, const int[:] outputs, xs):
    cdef double[:, ::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t m = xv.shape[0], i, j
    cdef double[::1] regs = np.empty(n_inputs + ops.shape[0] + 1)
    out_arr = np.empty((m, outputs.shape[0]))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(m):
            _run(ops, a, b, c, n_inputs, &xv[i, 0], &regs[0])
            for j in range(outputs.shape[0]):
                out[i, j] = regs[outputs[j]]
    return out_arr


def rk4(const int[:] ops, const int[:] a, const int[:] b, const double[:] c,
        int n_inputs, const int[:] outputs, x0, int n_state, double h, long n_steps, double guard):
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] y = np.array(x0, dtype=np.float64)
    cdef double[::1] regs = np.empty(n_inputs + ops.shape[0] + 1)
    cdef double[:, ::1] k = np.empty((4, n_state))
    out_arr = np.full((n_steps + 1, n_state), np.nan)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, s, st
    cdef long done = 0
    cdef bint bad = False
    cdef double[4] w = [0.5, 0.5, 1.0, 0.0]
    for i in range(n_state):
        out[0, i] = x[i]
    with nogil:
        for st in range(n_steps):
            for i in range(n_inputs):
                y[i] = x[i]
            for s in range(4):
                _run(ops, a, b, c, n_inputs, &y[0], &regs[0])
                for i in range(n_state):
                    k[s, i] = regs[outputs[i]]
                if s < 3:
                    for i in range(n_state):
                        y[i] = x[i] + w[s] * h * k[s, i]
            for i in range(n_state):
                x[i] += h / 6.0 * (k[0, i] + 2.0 * k[1, i] + 2.0 * k[2, i] + k[3, i])
                if not (fabs(x[i]) <= guard):
                    bad = True
            if bad:
                break
            for i in range(n_state):
                out[st + 1, i] = x[i]
            done = st + 1
    return out_arr, done
