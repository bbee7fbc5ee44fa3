# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled twins of the numpy kernels in _kernels_py.

Semantics must stay identical to the numpy versions, including clamp
orders and degenerate-case rules; the test suite compares them
pointwise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, hypot, sin, sqrt

cnp.import_array()

cdef double EPS_DESIGN = 1e-3


def element_stiffness(double[:, :, :, ::1] C, double[:, :, ::1] B,
                      double[::1] w):
    cdef Py_ssize_t ne = C.shape[0], nq = C.shape[1]
    cdef Py_ssize_t e, q, i, a, b
    cdef double cb0, cb1, cb2, wq, ba0, ba1, ba2
    cdef double CB[3][18]
    out = np.zeros((ne, 18, 18))
    cdef double[:, :, ::1] K = out
    for e in range(ne):
        for q in range(nq):
            wq = w[q]
            for i in range(3):
                for b in range(18):
                    CB[i][b] = (C[e, q, i, 0] * B[q, 0, b]
                                + C[e, q, i, 1] * B[q, 1, b]
                                + C[e, q, i, 2] * B[q, 2, b])
            for a in range(18):
                ba0 = B[q, 0, a]
                ba1 = B[q, 1, a]
                ba2 = B[q, 2, a]
                for b in range(18):
                    K[e, a, b] += wq * (ba0 * CB[0][b] + ba1 * CB[1][b]
                                        + ba2 * CB[2][b])
    return out


def qp_strain(double[:, ::1] ue, double[:, :, ::1] B, double[::1] inv_h):
    cdef Py_ssize_t ne = ue.shape[0], nq = B.shape[0]
    cdef Py_ssize_t e, q, c, a
    cdef double acc, s
    out = np.empty((ne, nq, 3))
    cdef double[:, :, ::1] eps = out
    for e in range(ne):
        s = 2.0 * inv_h[e]
        for q in range(nq):
            for c in range(3):
                acc = 0.0
                for a in range(18):
                    acc += B[q, c, a] * ue[e, a]
                eps[e, q, c] = acc * s
    return out


def stress_to_params(double[:, ::1] sig, double l, double lam, double mu):
    cdef Py_ssize_t n = sig.shape[0]
    cdef Py_ssize_t k
    cdef double a, d, b, mean, r, la, lb, l1, l2, v0, v1, nrm, s, scale, th
    alpha_out = np.empty(n)
    m_out = np.empty(n)
    th_out = np.empty(n)
    s_out = np.empty(n)
    cdef double[::1] alpha = alpha_out, m = m_out, theta = th_out, S = s_out
    scale = sqrt((2.0 * mu + lam) / (4.0 * mu * (mu + lam) * l))
    for k in range(n):
        a = sig[k, 0]
        d = sig[k, 1]
        b = sig[k, 2]
        mean = 0.5 * (a + d)
        r = hypot(0.5 * (a - d), b)
        la = mean + r
        lb = mean - r
        if fabs(lb) > fabs(la):
            l1 = lb
            l2 = la
        else:
            l1 = la
            l2 = lb
        v0 = b
        v1 = l1 - a
        if fabs(l1 - d) + fabs(b) > fabs(v0) + fabs(v1):
            v0 = l1 - d
            v1 = b
        if fabs(v0) + fabs(v1) < 1e-14 * (1.0 if fabs(l1) < 1.0
                                          else fabs(l1)):
            v0 = 1.0
            v1 = 0.0
        nrm = hypot(v0, v1)
        v0 /= nrm
        v1 /= nrm
        if v0 < 0.0 or (v0 == 0.0 and v1 < 0.0):
            v0 = -v0
            v1 = -v1
        s = fabs(l1) + fabs(l2)
        if s == 0.0:
            alpha[k] = 0.0
            m[k] = 0.5
            theta[k] = EPS_DESIGN
            S[k] = 0.0
            continue
        alpha[k] = atan2(v1, v0)
        m[k] = fabs(l2) / s
        if m[k] < EPS_DESIGN:
            m[k] = EPS_DESIGN
        elif m[k] > 1.0 - EPS_DESIGN:
            m[k] = 1.0 - EPS_DESIGN
        th = scale * s
        if th > 1.0:
            th = 1.0
        if th < EPS_DESIGN:
            th = EPS_DESIGN
        theta[k] = th
        S[k] = s
    return alpha_out, m_out, th_out, s_out


def laminate_tensors(double[::1] alpha, double[::1] m, double[::1] theta,
                     double lam, double mu, double shear):
    cdef Py_ssize_t n = alpha.shape[0]
    cdef Py_ssize_t k, i, j, p, q
    cdef double kap = lam + mu
    cdef double den, f, c1111, c2222, c1122, c, s, th, mm
    cdef double M[3][3]
    cdef double Cb[3][3]
    cdef double T[3][3]
    out = np.empty((n, 3, 3))
    cdef double[:, :, ::1] C = out
    for k in range(n):
        mm = m[k]
        th = theta[k]
        den = 4.0 * kap * mu * mm * (1.0 - mm) * th * th \
            + (kap + mu) * (kap + mu) * (1.0 - th)
        f = 4.0 * kap * mu / den
        c1111 = f * (kap + mu) * th * (1.0 - th * (1.0 - mm)) * (1.0 - mm)
        c2222 = f * (kap + mu) * th * (1.0 - th * mm) * mm
        c1122 = f * lam * th * th * mm * (1.0 - mm)
        c = cos(alpha[k])
        s = sin(alpha[k])
        M[0][0] = c * c
        M[0][1] = s * s
        M[0][2] = -2.0 * c * s
        M[1][0] = s * s
        M[1][1] = c * c
        M[1][2] = 2.0 * c * s
        M[2][0] = c * s
        M[2][1] = -c * s
        M[2][2] = c * c - s * s
        Cb[0][0] = c1111
        Cb[0][1] = c1122
        Cb[0][2] = 0.0
        Cb[1][0] = c1122
        Cb[1][1] = c2222
        Cb[1][2] = 0.0
        Cb[2][0] = 0.0
        Cb[2][1] = 0.0
        Cb[2][2] = shear
        for i in range(3):
            for j in range(3):
                T[i][j] = (M[i][0] * Cb[0][j] + M[i][1] * Cb[1][j]
                           + M[i][2] * Cb[2][j])
        for i in range(3):
            for j in range(3):
                C[k, i, j] = (T[i][0] * M[j][0] + T[i][1] * M[j][1]
                              + T[i][2] * M[j][2])
    return out
