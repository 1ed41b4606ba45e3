# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled sphere-sum kernels; same contracts as grazelab._fallback."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, expm1, cos, sin, fabs, M_PI

cnp.import_array()

DEF KMAX = 32


cdef inline void _frame(double* om, double* e1, double* e2) noexcept nogil:
    cdef double rx = 0.0, ry = 0.0, dot, nrm
    if fabs(om[0]) < 0.9:
        rx = 1.0
    else:
        ry = 1.0
    dot = rx * om[0] + ry * om[1]
    e1[0] = rx - dot * om[0]
    e1[1] = ry - dot * om[1]
    e1[2] = -dot * om[2]
    nrm = sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2])
    e1[0] /= nrm
    e1[1] /= nrm
    e1[2] /= nrm
    e2[0] = om[1] * e1[2] - om[2] * e1[1]
    e2[1] = om[2] * e1[0] - om[0] * e1[2]
    e2[2] = om[0] * e1[1] - om[1] * e1[0]


cdef inline void _table(double x, int K, double* H, double* sq) noexcept nogil:
    cdef int n
    H[0] = 1.0
    if K >= 1:
        H[1] = x
    for n in range(1, K):
        H[n + 1] = (x * H[n] - sq[n] * H[n - 1]) / sq[n + 1]


cdef inline void _diff_table(double x, double d, int K, double* Hs, double* D, double* sq) noexcept nogil:
    cdef int n
    _table(x + d, K, Hs, sq)
    D[0] = 0.0
    if K >= 1:
        D[1] = d
    for n in range(1, K):
        D[n + 1] = (x * D[n] + d * Hs[n] - sq[n] * D[n - 1]) / sq[n + 1]


cdef inline void _poly_diff(const long* al, const double* c, int dim, int K,
                            double* x, double* d, double* sq,
                            double* p0, double* dp) noexcept nogil:
    """p(x) and p(x + d) - p(x) for p = sum c_a p_a, telescoping over axes."""
    cdef double H0[3][KMAX + 1]
    cdef double HS[3][KMAX + 1]
    cdef double D[3][KMAX + 1]
    cdef int i, a, i0, i1, i2
    cdef double acc0 = 0.0, acc1 = 0.0
    for i in range(3):
        _table(x[i], K, H0[i], sq)
        _diff_table(x[i], d[i], K, HS[i], D[i], sq)
    for a in range(dim):
        if c[a] == 0.0:
            continue
        i0 = al[3 * a]
        i1 = al[3 * a + 1]
        i2 = al[3 * a + 2]
        acc0 += c[a] * H0[0][i0] * H0[1][i1] * H0[2][i2]
        acc1 += c[a] * (D[0][i0] * HS[1][i1] * HS[2][i2]
                        + H0[0][i0] * D[1][i1] * HS[2][i2]
                        + H0[0][i0] * H0[1][i1] * D[2][i2])
    p0[0] = acc0
    dp[0] = acc1


def _sqrt_table(int K):
    if K > KMAX:
        raise ValueError("degree too large for the compiled kernel")
    return np.sqrt(np.arange(KMAX + 2, dtype=np.float64))


def sphere_gamma_sum(v, double[::1] zr, double[:, ::1] zomega, double[::1] zw,
                     double[::1] u, double[::1] wub, double[::1] phi, double[::1] wphi,
                     const long[:, ::1] alphas, const double[::1] cg, const double[::1] ch, int K):
    cdef double[::1] sqv = _sqrt_table(K)
    cdef double* sq = &sqv[0]
    cdef double vv[3]
    cdef double vs[3]
    cdef double md[3]
    cdef double dl[3]
    cdef double om[3]
    cdef double e1[3]
    cdef double e2[3]
    cdef int nr = zr.shape[0], nw = zomega.shape[0], nu = u.shape[0], nph = phi.shape[0]
    cdef int dim = alphas.shape[0]
    cdef double mu_norm = (2.0 * M_PI) ** -1.5
    cdef int i, j, k, l, c
    cdef double r, mu_star, inner, uu, tang, cp, sp, pg0, dpg, ph0, dph, total = 0.0
    cdef double[::1] cph = np.cos(np.asarray(phi))
    cdef double[::1] sph = np.sin(np.asarray(phi))
    for c in range(3):
        vv[c] = v[c]
    with nogil:
        for j in range(nw):
            for c in range(3):
                om[c] = zomega[j, c]
            _frame(om, e1, e2)
            for i in range(nr):
                r = zr[i]
                for c in range(3):
                    vs[c] = vv[c] - r * om[c]
                mu_star = exp(-0.5 * (vs[0] * vs[0] + vs[1] * vs[1] + vs[2] * vs[2])) * mu_norm
                inner = 0.0
                for k in range(nu):
                    uu = u[k]
                    tang = uu * sqrt(1.0 - uu * uu)
                    for l in range(nph):
                        cp = cph[l]
                        sp = sph[l]
                        for c in range(3):
                            dl[c] = r * (-uu * uu * om[c] + tang * (cp * e1[c] + sp * e2[c]))
                            md[c] = -dl[c]
                        _poly_diff(&alphas[0, 0], &cg[0], dim, K, vs, md, sq, &pg0, &dpg)
                        _poly_diff(&alphas[0, 0], &ch[0], dim, K, vv, dl, sq, &ph0, &dph)
                        inner += wub[k] * wphi[l] * (dpg * (ph0 + dph) + pg0 * dph)
                total += zw[i * nw + j] * mu_star * inner
    return total


def sphere_gauss_diff_sum(double[:, ::1] base, double[:, ::1] omega, double[::1] r, double[::1] w,
                          double[::1] u, double[::1] wub, double[::1] phi, double[::1] wphi,
                          const long[:, ::1] alphas, const double[::1] ch, int K, int power):
    cdef double[::1] sqv = _sqrt_table(K)
    cdef double* sq = &sqv[0]
    cdef double vb[3]
    cdef double dl[3]
    cdef double om[3]
    cdef double e1[3]
    cdef double e2[3]
    cdef int N = base.shape[0], nu = u.shape[0], nph = phi.shape[0]
    cdef int dim = alphas.shape[0]
    cdef double sq_norm = (2.0 * M_PI) ** -0.75
    cdef int n, k, l, c, pw
    cdef double rr, sqmu, inner, uu, tang, p0, dp, q, e, dh, term, total = 0.0
    cdef double[::1] cph = np.cos(np.asarray(phi))
    cdef double[::1] sph = np.sin(np.asarray(phi))
    with nogil:
        for n in range(N):
            for c in range(3):
                vb[c] = base[n, c]
                om[c] = omega[n, c]
            _frame(om, e1, e2)
            rr = r[n]
            sqmu = exp(-0.25 * (vb[0] * vb[0] + vb[1] * vb[1] + vb[2] * vb[2])) * sq_norm
            inner = 0.0
            for k in range(nu):
                uu = u[k]
                tang = uu * sqrt(1.0 - uu * uu)
                for l in range(nph):
                    q = 0.0
                    for c in range(3):
                        dl[c] = rr * (-uu * uu * om[c] + tang * (cph[l] * e1[c] + sph[l] * e2[c]))
                        q += dl[c] * (2.0 * vb[c] + dl[c])
                    _poly_diff(&alphas[0, 0], &ch[0], dim, K, vb, dl, sq, &p0, &dp)
                    e = expm1(-0.25 * q)
                    dh = sqmu * (p0 * e + dp * (1.0 + e))
                    term = 1.0
                    for pw in range(power):
                        term *= dh
                    inner += wub[k] * wphi[l] * term
            total += w[n] * inner
    return total
