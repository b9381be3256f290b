# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the O(N^6) reference kernels.

Same signatures and results as :mod:`landaulab._pykernels`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()


def direct_convolve(double[:, :, ::1] K, g):
    """``out[..., i] = sum_j K[(i - j) mod 2N] g[..., j]`` over three axes."""
    g = np.asarray(g, dtype=np.float64)
    cdef Py_ssize_t N = g.shape[g.ndim - 1]
    lead = g.shape[:-3]
    cdef double[:, :, :, ::1] gf = np.ascontiguousarray(g.reshape((-1, N, N, N)))
    cdef Py_ssize_t nb = gf.shape[0]
    out_arr = np.zeros((nb, N, N, N))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, i1, i2, i3, j1, j2, j3, k1, k2, n2 = 2 * N
    cdef double acc
    for b in range(nb):
        for i1 in range(N):
            for i2 in range(N):
                for i3 in range(N):
                    acc = 0.0
                    for j1 in range(N):
                        k1 = (i1 - j1 + n2) % n2
                        for j2 in range(N):
                            k2 = (i2 - j2 + n2) % n2
                            for j3 in range(N):
                                acc += K[k1, k2, (i3 - j3 + n2) % n2] * gf[b, j1, j2, j3]
                    out[b, i1, i2, i3] = acc
    return out_arr.reshape(lead + (N, N, N))


def dissipation_sum(double[:, ::1] points, double[::1] F, double[:, ::1] gradlog, double gamma):
    """Double sum ``1/2 sum_{i,j} F_i F_j d_ij^T a(v_i - v_j) d_ij``."""
    cdef Py_ssize_t n = F.shape[0], i, j
    cdef double z0, z1, z2, d0, d1, d2, r2, zd, dd, total = 0.0, row
    cdef double hg = 0.5 * gamma
    for i in range(n):
        row = 0.0
        for j in range(n):
            if j == i:
                continue
            z0 = points[i, 0] - points[j, 0]
            z1 = points[i, 1] - points[j, 1]
            z2 = points[i, 2] - points[j, 2]
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 == 0.0:
                continue
            d0 = gradlog[i, 0] - gradlog[j, 0]
            d1 = gradlog[i, 1] - gradlog[j, 1]
            d2 = gradlog[i, 2] - gradlog[j, 2]
            zd = z0 * d0 + z1 * d1 + z2 * d2
            dd = d0 * d0 + d1 * d1 + d2 * d2
            row += F[j] * pow(r2, hg) * (r2 * dd - zd * zd)
        total += F[i] * row
    return 0.5 * total
