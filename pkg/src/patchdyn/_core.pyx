# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled boundary-integral kernels.

Hot loops of the whole package: O(M*P) sums of exact per-segment log
integrals.  Mirrors ``_core_py`` bit-for-bit in exact arithmetic; the
accumulation order over segments is fixed, so results are deterministic.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, log
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef double TINY = 1e-300
cdef double INV_TWO_PI = 0.15915494309189535


cdef struct SegFrame:
    double* ax
    double* ay
    double* bx
    double* by
    double* ex
    double* ey
    double* ln


cdef int _build_frames(double[:, ::1] verts, SegFrame* f) except -1:
    cdef Py_ssize_t m = verts.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, l
    f.ax = <double*> malloc(7 * m * sizeof(double))
    if f.ax == NULL:
        raise MemoryError()
    f.ay = f.ax + m
    f.bx = f.ax + 2 * m
    f.by = f.ax + 3 * m
    f.ex = f.ax + 4 * m
    f.ey = f.ax + 5 * m
    f.ln = f.ax + 6 * m
    for i in range(m):
        j = i + 1
        if j == m:
            j = 0
        f.ax[i] = verts[i, 0]
        f.ay[i] = verts[i, 1]
        f.bx[i] = verts[j, 0]
        f.by[i] = verts[j, 1]
        dx = f.bx[i] - f.ax[i]
        dy = f.by[i] - f.ay[i]
        l = (dx * dx + dy * dy) ** 0.5
        f.ln[i] = l
        f.ex[i] = dx / l
        f.ey[i] = dy / l
    return 0


def induced_velocity(double[:, ::1] verts, double[:, ::1] pts):
    """Patch-induced velocity at each point: (P, 2) array."""
    cdef Py_ssize_t m = verts.shape[0]
    cdef Py_ssize_t n = pts.shape[0]
    out_arr = np.empty((n, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef SegFrame f
    _build_frames(verts, &f)
    cdef Py_ssize_t i, s
    cdef double px, py, dx, dy, fx, fy, t1, t2, r1sq, r2sq, h, length
    cdef double integral, ux, uy
    with nogil:
        for i in range(n):
            px = pts[i, 0]
            py = pts[i, 1]
            ux = 0.0
            uy = 0.0
            for s in range(m):
                dx = px - f.ax[s]
                dy = py - f.ay[s]
                fx = px - f.bx[s]
                fy = py - f.by[s]
                length = f.ln[s]
                t1 = -(dx * f.ex[s] + dy * f.ey[s])
                t2 = t1 + length
                r1sq = dx * dx + dy * dy
                r2sq = fx * fx + fy * fy
                if r1sq < TINY:
                    r1sq = TINY
                if r2sq < TINY:
                    r2sq = TINY
                h = f.ex[s] * dy - f.ey[s] * dx
                integral = (0.5 * (t2 * log(r2sq) - t1 * log(r1sq)) - length
                            + h * atan2(length * h, h * h + t1 * t2))
                ux += f.ex[s] * integral
                uy += f.ey[s] * integral
            out[i, 0] = -INV_TWO_PI * ux
            out[i, 1] = -INV_TWO_PI * uy
    free(f.ax)
    return out_arr


def log_potential(double[:, ::1] verts, double[:, ::1] pts):
    """Inner potential psi(x) = int_patch ln|x-y| dy at each point: (P,)."""
    cdef Py_ssize_t m = verts.shape[0]
    cdef Py_ssize_t n = pts.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef SegFrame f
    _build_frames(verts, &f)
    cdef Py_ssize_t i, s
    cdef double px, py, dx, dy, fx, fy, t1, t2, r1sq, r2sq, h, length
    cdef double integral, acc
    with nogil:
        for i in range(n):
            px = pts[i, 0]
            py = pts[i, 1]
            acc = 0.0
            for s in range(m):
                dx = px - f.ax[s]
                dy = py - f.ay[s]
                fx = px - f.bx[s]
                fy = py - f.by[s]
                length = f.ln[s]
                t1 = -(dx * f.ex[s] + dy * f.ey[s])
                t2 = t1 + length
                r1sq = dx * dx + dy * dy
                r2sq = fx * fx + fy * fy
                if r1sq < TINY:
                    r1sq = TINY
                if r2sq < TINY:
                    r2sq = TINY
                h = f.ex[s] * dy - f.ey[s] * dx
                integral = (0.5 * (t2 * log(r2sq) - t1 * log(r1sq)) - length
                            + h * atan2(length * h, h * h + t1 * t2))
                acc += h * (0.5 * integral - 0.25 * length)
            out[i] = acc
    free(f.ax)
    return out_arr
