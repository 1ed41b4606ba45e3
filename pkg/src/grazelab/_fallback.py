"""Pure-numpy versions of the compiled sphere-sum kernels."""

from __future__ import annotations

import numpy as np

_SQRT_MU_NORM = (2.0 * np.pi) ** -0.75
_MU_NORM = (2.0 * np.pi) ** -1.5


def _tables(x, K):
    H = np.empty(x.shape + (K + 1,))
    H[..., 0] = 1.0
    if K >= 1:
        H[..., 1] = x
    for n in range(1, K):
        H[..., n + 1] = (x * H[..., n] - np.sqrt(n) * H[..., n - 1]) / np.sqrt(n + 1)
    return H


def _diff_tables(x, d, K):
    Hs = _tables(x + d, K)
    D = np.empty(Hs.shape)
    D[..., 0] = 0.0
    if K >= 1:
        D[..., 1] = d
    for n in range(1, K):
        D[..., n + 1] = (x * D[..., n] + d * Hs[..., n] - np.sqrt(n) * D[..., n - 1]) / np.sqrt(n + 1)
    return Hs, D


def _poly_and_diff(alphas, c, K, x, d):
    """p(x) and p(x + d) - p(x) for p = sum c_a p_a; x, d broadcast to (..., 3)."""
    x, d = np.broadcast_arrays(x, d)
    H0 = [_tables(x[..., i], K) for i in range(3)]
    HS, D = zip(*(_diff_tables(x[..., i], d[..., i], K) for i in range(3)))
    a0, a1, a2 = alphas[:, 0], alphas[:, 1], alphas[:, 2]
    p0 = (H0[0][..., a0] * H0[1][..., a1] * H0[2][..., a2]) @ c
    dp = (D[0][..., a0] * HS[1][..., a1] * HS[2][..., a2]
          + H0[0][..., a0] * D[1][..., a1] * HS[2][..., a2]
          + H0[0][..., a0] * H0[1][..., a1] * D[2][..., a2]) @ c
    return p0, dp


def _frame(om):
    ref = np.zeros_like(om)
    use_x = np.abs(om[..., 0]) < 0.9
    ref[..., 0] = np.where(use_x, 1.0, 0.0)
    ref[..., 1] = np.where(use_x, 0.0, 1.0)
    e1 = ref - np.sum(ref * om, axis=-1, keepdims=True) * om
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    return e1, np.cross(om, e1)


def _displacements(om, r, u, phi):
    """(N, nu, nphi, 3) values of r(-u^2 om + u sqrt(1-u^2)(cos phi e1 + sin phi e2))."""
    e1, e2 = _frame(om)
    uu = u[None, :, None, None]
    tang = uu * np.sqrt(1.0 - uu * uu)
    c = np.cos(phi)[None, None, :, None]
    s = np.sin(phi)[None, None, :, None]
    d = (-uu * uu * om[:, None, None, :]
         + tang * (c * e1[:, None, None, :] + s * e2[:, None, None, :]))
    return r[:, None, None, None] * d


def sphere_gamma_sum(v, zr, zomega, zw, u, wub, phi, wphi, alphas, cg, ch, K):
    """sum_z zw mu(v_*) sum_sigma wub wphi [p_g(v'_*) p_h(v') - p_g(v_*) p_h(v)], v_* = v - z."""
    v = np.asarray(v, dtype=float)
    nr, nw = zr.size, zomega.shape[0]
    zw = zw.reshape(nr, nw)
    W = wub[:, None] * wphi[None, :]
    total = 0.0
    for i in range(nr):
        r = np.full(nw, zr[i])
        vstar = v[None, :] - zr[i] * zomega
        delta = _displacements(zomega, r, u, phi)
        pg0, dpg = _poly_and_diff(alphas, cg, K, vstar[:, None, None, :], -delta)
        ph0, dph = _poly_and_diff(alphas, ch, K, v[None, None, None, :], delta)
        integrand = dpg * (ph0 + dph) + pg0 * dph
        inner = np.einsum("nij,ij->n", integrand, W)
        mu_star = _MU_NORM * np.exp(-0.5 * np.sum(vstar * vstar, axis=-1))
        total += float(np.dot(zw[i] * mu_star, inner))
    return total


def sphere_gauss_diff_sum(base, omega, r, w, u, wub, phi, wphi, alphas, ch, K, power, chunk=256):
    """sum_n w_n sum_sigma wub wphi [h(v_n + delta) - h(v_n)]^power, h = p_h mu^{1/2}."""
    W = wub[:, None] * wphi[None, :]
    total = 0.0
    for s0 in range(0, base.shape[0], chunk):
        sl = slice(s0, s0 + chunk)
        vb = base[sl]
        delta = _displacements(omega[sl], r[sl], u, phi)
        p0, dp = _poly_and_diff(alphas, ch, K, vb[:, None, None, :], delta)
        # |v+d|^2 - |v|^2 = d.(2v + d)
        q = np.sum(delta * (2.0 * vb[:, None, None, :] + delta), axis=-1)
        e = np.expm1(-0.25 * q)
        sq = _SQRT_MU_NORM * np.exp(-0.25 * np.sum(vb * vb, axis=-1))
        dh = sq[:, None, None] * ((p0[:, None, None] if p0.ndim == 1 else p0) * e + dp * (1.0 + e))
        total += float(np.dot(w[sl], np.einsum("nij,ij->n", dh ** power, W)))
    return total
