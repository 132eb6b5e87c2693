# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled warp/blur kernel. Must stay in lockstep with ``_warp_py.py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


cdef inline void _taps(double c, Py_ssize_t n, Py_ssize_t* i0, Py_ssize_t* i1,
                       double* w0, double* w1) noexcept nogil:
    cdef double f, fl
    if c < 0.0:
        c = 0.0
    elif c > n - 1.0:
        c = n - 1.0
    fl = floor(c)
    f = c - fl
    i0[0] = <Py_ssize_t>fl
    i1[0] = i0[0] + 1 if i0[0] + 1 < n else n - 1
    w0[0] = 1.0 - f
    w1[0] = f


def blur_accumulate(const float[:, :, :, :, ::1] data, const double[:, ::1] pose_terms,
                    double focal, double baseline, double pc, double qc):
    cdef Py_ssize_t U = data.shape[0], V = data.shape[1], H = data.shape[2]
    cdef Py_ssize_t W = data.shape[3], C = data.shape[4]
    cdef Py_ssize_t n = pose_terms.shape[0]
    if C > 8:
        raise ValueError("at most 8 channels supported")
    out_arr = np.empty((U, V, H, W, C), dtype=np.float32)
    cdef float[:, :, :, :, ::1] out = out_arr
    cdef double cu = (U - 1) / 2.0, cv = (V - 1) / 2.0
    cdef double du, dv, dx, dy, xj, yj, uu, vv, xx, yy
    cdef double ang_u, ang_v, sp_x, sp_y, pz, cm1, sn
    cdef double acc[8]
    cdef double tap[8]
    cdef double wu[2], wv[2], wy[2], wx[2]
    cdef Py_ssize_t iu[2], iv[2], iy[2], ix[2]
    cdef double wuv, wuvy, w
    cdef Py_ssize_t u, v, y, x, p, c, a, b, e, d
    with nogil:
        for u in range(U):
            du = (u - cu) * baseline
            for v in range(V):
                dv = (v - cv) * baseline
                for y in range(H):
                    dy = <double>y - (qc + dv)
                    for x in range(W):
                        dx = <double>x - (pc + du)
                        for c in range(C):
                            acc[c] = 0.0
                        for p in range(n):
                            ang_u = pose_terms[p, 0]
                            ang_v = pose_terms[p, 1]
                            sp_x = pose_terms[p, 2]
                            sp_y = pose_terms[p, 3]
                            pz = pose_terms[p, 4]
                            cm1 = pose_terms[p, 5]
                            sn = pose_terms[p, 6]
                            xj = <double>x + (dx * cm1 - dy * sn)
                            yj = <double>y + (dx * sn + dy * cm1)
                            uu = <double>u + ang_u - (xj - pc) * pz
                            vv = <double>v + ang_v - (yj - qc) * pz
                            xx = xj + sp_x
                            yy = yj + sp_y
                            _taps(uu, U, &iu[0], &iu[1], &wu[0], &wu[1])
                            _taps(vv, V, &iv[0], &iv[1], &wv[0], &wv[1])
                            _taps(yy, H, &iy[0], &iy[1], &wy[0], &wy[1])
                            _taps(xx, W, &ix[0], &ix[1], &wx[0], &wx[1])
                            for c in range(C):
                                tap[c] = 0.0
                            for a in range(2):
                                for b in range(2):
                                    wuv = wu[a] * wv[b]
                                    for e in range(2):
                                        wuvy = wuv * wy[e]
                                        for d in range(2):
                                            w = wuvy * wx[d]
                                            for c in range(C):
                                                tap[c] = tap[c] + w * <double>data[iu[a], iv[b], iy[e], ix[d], c]
                            for c in range(C):
                                acc[c] = acc[c] + tap[c]
                        for c in range(C):
                            out[u, v, y, x, c] = <float>(acc[c] / n)
    return out_arr
