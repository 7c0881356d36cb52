# cython: language_level=3
"""Compiled path-recursion kernels.

Semantics and floating-point evaluation order match _fte_py exactly; the
build disables fp-contraction so no fma creeps in. Tests assert bitwise
equality between the backends.
"""

from libc.math cimport sqrt

import numpy as np

BACKEND = "cython"


def fte_terminal(double v0, double k, double theta, double xi, double dt, double[:, ::1] dw):
    """Terminal tilde-v of the fully truncated Euler recursion."""
    cdef Py_ssize_t n_paths = dw.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    out_arr = np.empty(n_paths, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double v, vp
    with nogil:
        for i in range(n_paths):
            v = v0
            for j in range(n_steps):
                vp = v if v > 0.0 else 0.0
                v = v + k * (theta - vp) * dt + xi * sqrt(vp) * dw[i, j]
            out[i] = v
    return out_arr


def fte_trajectory(double v0, double k, double theta, double xi, double dt, double[:, ::1] dw):
    """Full tilde-v grid of the fully truncated Euler recursion."""
    cdef Py_ssize_t n_paths = dw.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    out_arr = np.empty((n_paths, n_steps + 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double v, vp
    with nogil:
        for i in range(n_paths):
            v = v0
            out[i, 0] = v0
            for j in range(n_steps):
                vp = v if v > 0.0 else 0.0
                v = v + k * (theta - vp) * dt + xi * sqrt(vp) * dw[i, j]
                out[i, j + 1] = v
    return out_arr
