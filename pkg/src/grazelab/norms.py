"""Discrete norm system: weighted L^2, Sobolev H^N_l, the three-part triple
norm and the coercivity functional N."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .hermite import BasisSpec, HermiteCoeffs, basis_polys, basis_spec
from .params import ModelParams, b_eps, bracket, sqrt_maxwellian, w_eps
from .quadrature import (SphericalShellSampler, UniformCubeGrid, build_ball_rule, build_gauss_hermite,
                         build_shell_sampler, build_sphere_rule, direction_rule, gauss_jacobi_interval,
                         shell_transform)


class GridTooSmall(ValueError):
    pass


class BandTruncation(ValueError):
    pass


@dataclass(frozen=True)
class TripleNormBreakdown:
    aniso_part: float
    fourier_part: float
    phase_part: float
    l: float
    eps: float

    @property
    def total(self) -> float:
        return math.sqrt(self.aniso_part ** 2 + self.fourier_part ** 2 + self.phase_part ** 2)


DEFAULT_GRID = UniformCubeGrid(12.0, 64)


def grid_for(K: int) -> UniformCubeGrid:
    """Cube wide enough that every degree-K mode decays below 1e-10 at the faces."""
    if K <= 6:
        return DEFAULT_GRID
    half = 13.0 if K <= 8 else 14.0 if K <= 10 else 16.0
    return UniformCubeGrid(half, 2 * math.ceil(half / 0.375))


def _sampler(sampler):
    return sampler or build_shell_sampler()


@lru_cache(maxsize=8)
def _shell_basis(K: int, R: float, n_r: int, l_max: int) -> np.ndarray:
    """psi_alpha on the shell nodes, shape (n_r, n_dir, dim)."""
    smp = build_shell_sampler(R, n_r, l_max)
    pts = smp.points
    return basis_polys(basis_spec(K), pts) * sqrt_maxwellian(pts)[..., None]


def shell_basis(spec: BasisSpec, sampler: SphericalShellSampler) -> np.ndarray:
    return _shell_basis(spec.K, sampler.R, sampler.radii.size, sampler.l_max)


def _radial(sampler: SphericalShellSampler) -> np.ndarray:
    return sampler.radii[:, None] * np.ones((1, sampler.directions.shape[0]))


# ---------------------------------------------------------------- Gram matrices

def weighted_l2_gram(spec: BasisSpec, weight_sq, sampler=None) -> np.ndarray:
    """M_ab = int weight_sq(|v|) psi_a psi_b dv on the shell rule."""
    smp = _sampler(sampler)
    B = shell_basis(spec, smp)
    w = smp.volume_weights * weight_sq(_radial(smp))
    M = np.einsum("rda,rd,rdb->ab", B, w, B, optimize=True)
    return 0.5 * (M + M.T)


def l2_gamma_gram(spec: BasisSpec, gamma: float, sampler=None) -> np.ndarray:
    return weighted_l2_gram(spec, lambda r: bracket(r) ** gamma, sampler)


def phase_gram(spec: BasisSpec, l: float, params: ModelParams, sampler=None) -> np.ndarray:
    return weighted_l2_gram(spec, lambda r: (w_eps(params, r) * bracket(r) ** l) ** 2, sampler)


def aniso_gram(spec: BasisSpec, l: float, params: ModelParams, sampler=None) -> np.ndarray:
    smp = _sampler(sampler)
    if spec.K > smp.l_max:
        raise BandTruncation("basis degree exceeds the harmonic band")
    B = shell_basis(spec, smp) * (bracket(_radial(smp)) ** l)[..., None]
    coef = np.einsum("rda,d,sd->ras", B, smp.wdir, smp.Y, optimize=True)  # (n_r, dim, n_sh)
    mult = w_eps(params, np.sqrt(smp.degrees * (smp.degrees + 1.0))) ** 2
    M = np.einsum("r,ras,s,rbs->ab", smp.wr, coef, mult, coef, optimize=True)
    return 0.5 * (M + M.T)


_FFT_CACHE: dict = {}


def _grid_spectra(spec: BasisSpec, l: float, grid: UniformCubeGrid, chunk: int = 8):
    key = (spec.K, float(l), grid.half_width, grid.n)
    if key in _FFT_CACHE:
        return _FFT_CACHE[key]
    if len(_FFT_CACHE) >= 2:
        _FFT_CACHE.clear()
    c = grid.coords
    X = grid.points()
    weight = bracket(X) ** l * sqrt_maxwellian(X)
    face = np.zeros(X.shape[:3], dtype=bool)
    face[[0, -1], :, :] = face[:, [0, -1], :] = face[:, :, [0, -1]] = True
    K = spec.K
    from .hermite import hermite_table

    H = [hermite_table(c, K) for _ in range(3)]
    a = spec.alphas
    out = np.empty((spec.dim, grid.n, grid.n, grid.n // 2 + 1), dtype=np.complex128)
    edge = 0.0
    for i in range(spec.dim):
        vals = (H[0][:, a[i, 0]][:, None, None] * H[1][:, a[i, 1]][None, :, None]
                * H[2][:, a[i, 2]][None, None, :]) * weight
        peak = np.max(np.abs(vals))
        edge = max(edge, float(np.max(np.abs(vals[face])) / peak))
        out[i] = np.fft.rfftn(vals)
    _FFT_CACHE[key] = (out, edge)
    return out, edge


def fourier_gram(spec: BasisSpec, l: float, params: ModelParams | None, grid: UniformCubeGrid | None = None,
                 tail_tol: float = 1e-10) -> np.ndarray:
    """Gram of ||W^eps(D) <v>^l f|| via the cube DFT; params=None uses the unit multiplier."""
    grid = grid or grid_for(spec.K)
    F, edge = _grid_spectra(spec, l, grid)
    if edge > tail_tol:
        raise GridTooSmall(f"boundary/peak ratio {edge:.2e} exceeds {tail_tol:.0e}")
    xi = grid.rfft_xi_norm()
    W2 = np.ones_like(xi) if params is None else w_eps(params, xi) ** 2
    wk = (W2 * grid.rfft_multiplicity()[None, None, :] * grid.parseval_scale()).ravel()
    Fr = F.reshape(spec.dim, -1)
    M = np.real((Fr * wk) @ Fr.conj().T)
    return 0.5 * (M + M.T)


def fourier_gram_hermite(spec: BasisSpec, params: ModelParams | None, sampler=None) -> np.ndarray:
    """l = 0 Gram from the Hermite eigenrelation: FT(psi_a)(xi) = (4 pi)^{3/2} (-i)^{|a|} psi_a(2 xi)."""
    smp = _sampler(sampler)
    B = shell_basis(spec, smp)
    W2 = np.ones_like(_radial(smp)) if params is None else w_eps(params, 0.5 * _radial(smp)) ** 2
    M = np.einsum("rda,rd,rdb->ab", B, smp.volume_weights * W2, B, optimize=True)
    d = spec.degrees
    phase = np.cos(0.5 * np.pi * (d[None, :] - d[:, None]))
    return M * phase


def triple_gram(spec: BasisSpec, l: float, params: ModelParams, grid: UniformCubeGrid | None = None,
                sampler=None) -> dict:
    parts = {
        "aniso": aniso_gram(spec, l, params, sampler),
        "fourier": fourier_gram(spec, l, params, grid),
        "phase": phase_gram(spec, l, params, sampler),
    }
    parts["total"] = parts["aniso"] + parts["fourier"] + parts["phase"]
    return parts


# ---------------------------------------------------------------- norms of single functions

def _coeff_norm(M: np.ndarray, c: np.ndarray) -> float:
    val = float(np.real(np.conj(c) @ M @ c))
    return math.sqrt(max(val, 0.0))


def weighted_l2_norm(f: HermiteCoeffs, l: float, sampler=None) -> float:
    smp = _sampler(sampler)
    vals = shell_basis(f.spec, smp) @ f.coeffs
    w = smp.volume_weights * bracket(_radial(smp)) ** (2 * l)
    return math.sqrt(float(np.sum(w * np.abs(vals) ** 2)))


def phase_part(f: HermiteCoeffs, l: float, params: ModelParams, sampler=None) -> float:
    """||W^eps <v>^l f||_{L^2} on the shell rule (radial Gauss-Legendre, 48 radii)."""
    smp = _sampler(sampler)
    vals = shell_basis(f.spec, smp) @ f.coeffs
    r = _radial(smp)
    w = smp.volume_weights * (w_eps(params, r) * bracket(r) ** l) ** 2
    return math.sqrt(float(np.sum(w * np.abs(vals) ** 2)))


def fourier_part(f: HermiteCoeffs, l: float, params: ModelParams | None, grid: UniformCubeGrid | None = None,
                 tail_tol: float = 1e-10) -> float:
    grid = grid or grid_for(f.spec.K)
    X = grid.points()
    vals = (basis_polys(f.spec, X) @ f.coeffs) * sqrt_maxwellian(X) * bracket(X) ** l
    face = np.concatenate([vals[[0, -1]].ravel(), vals[:, [0, -1]].ravel(), vals[:, :, [0, -1]].ravel()])
    peak = np.max(np.abs(vals))
    if peak > 0 and np.max(np.abs(face)) / peak > tail_tol:
        raise GridTooSmall("function not resolved inside the cube")
    F = np.fft.fftn(vals)
    k = 2 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
    xi = np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2)
    W2 = 1.0 if params is None else w_eps(params, xi) ** 2
    return math.sqrt(float(grid.parseval_scale() * np.sum(W2 * np.abs(F) ** 2)))


def aniso_part(f: HermiteCoeffs, l: float, params: ModelParams, sampler=None, band_tol: float = 1e-8) -> float:
    smp = _sampler(sampler)
    vals = (shell_basis(f.spec, smp) @ f.coeffs) * bracket(_radial(smp)) ** l
    coef = shell_transform(vals, smp)
    total = float(np.sum(smp.volume_weights * np.abs(vals) ** 2))
    kept = float(np.sum(smp.wr[:, None] * np.abs(coef) ** 2))
    if total > 0 and (total - kept) / total > band_tol:
        raise BandTruncation(f"discarded band carries {(total - kept) / total:.2e} of the mass")
    mult = w_eps(params, np.sqrt(smp.degrees * (smp.degrees + 1.0))) ** 2
    return math.sqrt(float(np.sum(smp.wr[:, None] * mult[None, :] * np.abs(coef) ** 2)))


def triple_norm(f: HermiteCoeffs, l: float, params: ModelParams, grid: UniformCubeGrid | None = None,
                sampler=None) -> TripleNormBreakdown:
    return TripleNormBreakdown(
        aniso_part=aniso_part(f, l, params, sampler),
        fourier_part=fourier_part(f, l, params, grid),
        phase_part=phase_part(f, l, params, sampler),
        l=l, eps=params.eps,
    )


def derivative_matrices(spec: BasisSpec) -> list[np.ndarray]:
    """d_i psi_a = (sqrt(a_i) psi_{a-e_i} - sqrt(a_i+1) psi_{a+e_i}) / 2, mapping degree K into K+1."""
    big = basis_spec(spec.K + 1)
    mats = []
    for i in range(3):
        D = np.zeros((big.dim, spec.dim))
        for b, alpha in enumerate(spec.alphas):
            up = alpha.copy()
            up[i] += 1
            D[big.index[tuple(int(c) for c in up)], b] -= 0.5 * math.sqrt(alpha[i] + 1)
            if alpha[i] > 0:
                dn = alpha.copy()
                dn[i] -= 1
                D[big.index[tuple(int(c) for c in dn)], b] += 0.5 * math.sqrt(alpha[i])
        mats.append(D)
    return mats


def sobolev_norm(f: HermiteCoeffs, N: int, l: float, sampler=None) -> float:
    """sum_{|beta| <= N} ||<v>^l d^beta f||_{L^2}."""
    total = 0.0
    frontier = {(0, 0, 0): f}
    for order in range(N + 1):
        nxt = {}
        for beta, g in frontier.items():
            total += weighted_l2_norm(g, l, sampler)
            if order < N:
                Ds = derivative_matrices(g.spec)
                for i in range(3):
                    b = list(beta)
                    b[i] += 1
                    key = tuple(b)
                    if key not in nxt:
                        nxt[key] = HermiteCoeffs(basis_spec(g.spec.K + 1), Ds[i] @ g.coeffs)
        frontier = nxt
    return total


# ---------------------------------------------------------------- coercivity functional

def _n_rules(params: ModelParams, sphere_kw, n_r, n_theta):
    sphere = build_sphere_rule(params, **(sphere_kw or {"panels": 12, "order": 8, "n_phi": 16}))
    return sphere, sphere.wu * b_eps(params, sphere.u)


def phi_radial(params: ModelParams, rho, reach: float = 11.0, n_r: int = 32, n_theta: int = 24,
               sphere_kw: dict | None = None) -> np.ndarray:
    """Phi(|v_*|) = int |v - v_*|^gamma b (mu^{1/2}(v') - mu^{1/2}(v))^2 dsigma dv.

    Phi is radial in v_*; with v_* on the polar axis the z-directions need only
    one azimuth, weighted by 2 pi.
    """
    sphere, wub = _n_rules(params, sphere_kw, n_r, n_theta)
    spec = basis_spec(0)
    one = np.ones(1)
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    om = np.stack([np.sqrt(1 - ct * ct), np.zeros_like(ct), ct], axis=-1)
    out = []
    for p in np.atleast_1d(rho):
        r, wr = gauss_jacobi_interval(n_r, 2.0 + params.gamma, float(p) + reach)
        base = np.array([0.0, 0.0, float(p)])[None, :] + (r[:, None, None] * om[None]).reshape(-1, 3)
        omega = np.tile(om, (r.size, 1))
        rr = np.repeat(r, om.shape[0])
        w = (wr[:, None] * wt[None, :] * 2 * np.pi).ravel()
        out.append(kernels.sphere_gauss_diff_sum(base, omega, rr, w, sphere.u, wub, sphere.phi, sphere.wphi,
                                                 spec.alphas, one, 0, 2))
    return params.c_b * np.array(out)


def n_matrix(spec: BasisSpec, params: ModelParams, sampler=None, **kw) -> np.ndarray:
    """N_ab with N(f, mu^{1/2}) = c^T N c, N_ab = int psi_a psi_b Phi(|v|) dv."""
    smp = _sampler(sampler)
    phi = phi_radial(params, smp.radii, **kw)
    B = shell_basis(spec, smp)
    M = np.einsum("rda,rd,rdb->ab", B, smp.volume_weights * phi[:, None], B, optimize=True)
    return 0.5 * (M + M.T)


def n_functional(g: HermiteCoeffs, h: HermiteCoeffs, params: ModelParams, n_vstar: int = 5, reach: float = 11.0,
                 n_r: int = 24, n_theta: int = 12, n_phi: int = 24, sphere_kw: dict | None = None) -> float:
    """int b |v - v_*|^gamma g_*^2 (h' - h)^2 for g = p_g mu^{1/2}, h = p_h mu^{1/2}.

    g_*^2 = p_g^2 mu carries the Gaussian weight of the outer v_* rule.
    """
    if not np.any(h.coeffs) or not np.any(g.coeffs):
        return 0.0
    sphere, wub = _n_rules(params, sphere_kw, n_r, n_theta)
    rule_v = build_gauss_hermite(n_axis=n_vstar)
    pg = basis_polys(g.spec, rule_v.nodes) @ g.coeffs
    total = 0.0
    for x, wx, p in zip(rule_v.nodes, rule_v.weights, pg):
        if p == 0.0:
            continue
        ball = build_ball_rule(params.gamma, float(np.linalg.norm(x)) + reach, n_r, n_theta, n_phi)
        nr, nw = ball.r.size, ball.omega.shape[0]
        total += wx * p * p * kernels.sphere_gauss_diff_sum(
            x[None, :] + ball.points, np.tile(ball.omega, (nr, 1)), np.repeat(ball.r, nw), ball.weights,
            sphere.u, wub, sphere.phi, sphere.wphi, h.spec.alphas, h.coeffs, h.spec.K, 2)
    return params.c_b * total
