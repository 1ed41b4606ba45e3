"""Hermite-Galerkin basis psi_alpha = p_alpha mu^{1/2} with p_alpha orthonormal in L^2(mu dv)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .params import sqrt_maxwellian


class DegreeTooLow(ValueError):
    pass


# ---------------------------------------------------------------- 1-D tables

def hermite_table(x, K: int) -> np.ndarray:
    """h_0..h_K at x, shape (*x.shape, K+1); h_{n+1} = (x h_n - sqrt(n) h_{n-1}) / sqrt(n+1)."""
    x = np.asarray(x, dtype=float)
    H = np.empty(x.shape + (K + 1,))
    H[..., 0] = 1.0
    if K >= 1:
        H[..., 1] = x
    for n in range(1, K):
        H[..., n + 1] = (x * H[..., n] - math.sqrt(n) * H[..., n - 1]) / math.sqrt(n + 1)
    return H


def hermite_diff_table(x, delta, K: int):
    """Tables of h_n(x + delta) and D_n = h_n(x + delta) - h_n(x).

    D obeys the same recurrence with the forcing delta * h_n(x + delta), which
    keeps full relative accuracy when delta is small.
    """
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    shape = np.broadcast(x, delta).shape
    Hs = hermite_table(x + delta, K)
    D = np.empty(shape + (K + 1,))
    D[..., 0] = 0.0
    if K >= 1:
        D[..., 1] = delta
    for n in range(1, K):
        D[..., n + 1] = (x * D[..., n] + delta * Hs[..., n] - math.sqrt(n) * D[..., n - 1]) / math.sqrt(n + 1)
    return Hs, D


# ---------------------------------------------------------------- index bookkeeping

@dataclass(frozen=True)
class BasisSpec:
    K: int

    @cached_property
    def alphas(self) -> np.ndarray:
        out = []
        for d in range(self.K + 1):
            for a in range(d, -1, -1):
                for b in range(d - a, -1, -1):
                    out.append((a, b, d - a - b))
        return np.array(out, dtype=np.int64)

    @property
    def dim(self) -> int:
        return math.comb(self.K + 3, 3)

    @cached_property
    def index(self) -> dict:
        return {tuple(int(c) for c in a): i for i, a in enumerate(self.alphas)}

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.alphas.sum(axis=1)

    def embed(self, coeffs: np.ndarray, target: "BasisSpec") -> np.ndarray:
        """Copy coefficients into a larger (or equal) basis."""
        out = np.zeros(target.dim, dtype=np.asarray(coeffs).dtype)
        for i, a in enumerate(self.alphas):
            out[target.index[tuple(int(c) for c in a)]] = coeffs[i]
        return out


@lru_cache(maxsize=16)
def basis_spec(K: int) -> BasisSpec:
    return BasisSpec(K)


@dataclass
class HermiteCoeffs:
    spec: BasisSpec
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)
        if self.coeffs.shape != (self.spec.dim,):
            raise ValueError(f"expected {self.spec.dim} coefficients, got {self.coeffs.shape}")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.coeffs)

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coeffs)[0]
        return int(self.spec.degrees[nz].max()) if nz.size else 0

    def __call__(self, v):
        return evaluate(self, v)


def mode(spec: BasisSpec, alpha) -> HermiteCoeffs:
    c = np.zeros(spec.dim)
    c[spec.index[tuple(alpha)]] = 1.0
    return HermiteCoeffs(spec, c)


# ---------------------------------------------------------------- evaluation

def basis_polys(spec: BasisSpec, v) -> np.ndarray:
    """p_alpha(v) for every alpha, shape (*v.shape[:-1], dim)."""
    v = np.asarray(v, dtype=float)
    K = spec.K
    Hx, Hy, Hz = (hermite_table(v[..., i], K) for i in range(3))
    a = spec.alphas
    return Hx[..., a[:, 0]] * Hy[..., a[:, 1]] * Hz[..., a[:, 2]]


def basis_poly_diffs(spec: BasisSpec, v, delta) -> np.ndarray:
    """p_alpha(v + delta) - p_alpha(v) for every alpha, by telescoping over axes."""
    v = np.asarray(v, dtype=float)
    delta = np.asarray(delta, dtype=float)
    K = spec.K
    a = spec.alphas
    H0 = [hermite_table(v[..., i], K) for i in range(3)]
    HS, D = zip(*(hermite_diff_table(v[..., i], delta[..., i], K) for i in range(3)))
    return (D[0][..., a[:, 0]] * HS[1][..., a[:, 1]] * HS[2][..., a[:, 2]]
            + H0[0][..., a[:, 0]] * D[1][..., a[:, 1]] * HS[2][..., a[:, 2]]
            + H0[0][..., a[:, 0]] * H0[1][..., a[:, 1]] * D[2][..., a[:, 2]])


def basis_poly_grads(spec: BasisSpec, v) -> np.ndarray:
    """d p_alpha / d v_i, shape (*v.shape[:-1], dim, 3), using h_n' = sqrt(n) h_{n-1}."""
    v = np.asarray(v, dtype=float)
    K = spec.K
    H = [hermite_table(v[..., i], K) for i in range(3)]
    dH = [_derivative_table(h) for h in H]
    a = spec.alphas
    g0 = dH[0][..., a[:, 0]] * H[1][..., a[:, 1]] * H[2][..., a[:, 2]]
    g1 = H[0][..., a[:, 0]] * dH[1][..., a[:, 1]] * H[2][..., a[:, 2]]
    g2 = H[0][..., a[:, 0]] * H[1][..., a[:, 1]] * dH[2][..., a[:, 2]]
    return np.stack([g0, g1, g2], axis=-1)


def basis_poly_hessians(spec: BasisSpec, v) -> np.ndarray:
    """Second derivatives of p_alpha, shape (*v.shape[:-1], dim, 3, 3)."""
    v = np.asarray(v, dtype=float)
    K = spec.K
    H = [hermite_table(v[..., i], K) for i in range(3)]
    dH = [_derivative_table(h) for h in H]
    d2H = [_derivative_table(h) for h in dH]
    a = spec.alphas
    tabs = [H, dH, d2H]
    out = np.empty(v.shape[:-1] + (spec.dim, 3, 3))
    for i in range(3):
        for j in range(3):
            order = [0, 0, 0]
            order[i] += 1
            order[j] += 1
            out[..., i, j] = (tabs[order[0]][0][..., a[:, 0]] * tabs[order[1]][1][..., a[:, 1]]
                              * tabs[order[2]][2][..., a[:, 2]])
    return out


def _derivative_table(H: np.ndarray) -> np.ndarray:
    K = H.shape[-1] - 1
    dH = np.zeros_like(H)
    if K >= 1:
        dH[..., 1:] = np.sqrt(np.arange(1, K + 1)) * H[..., :-1]
    return dH


def evaluate_poly(f: HermiteCoeffs, v):
    return basis_polys(f.spec, v) @ f.coeffs


def evaluate(f: HermiteCoeffs, v):
    """sum c_alpha p_alpha(v) mu^{1/2}(v)."""
    return evaluate_poly(f, v) * sqrt_maxwellian(v)


def evaluate_grad(f: HermiteCoeffs, v):
    v = np.asarray(v, dtype=float)
    p = evaluate_poly(f, v)
    gp = np.einsum("...ai,a->...i", basis_poly_grads(f.spec, v), f.coeffs)
    return (gp - 0.5 * v * p[..., None]) * sqrt_maxwellian(v)[..., None]


def evaluate_hess(f: HermiteCoeffs, v):
    v = np.asarray(v, dtype=float)
    p = evaluate_poly(f, v)
    gp = np.einsum("...ai,a->...i", basis_poly_grads(f.spec, v), f.coeffs)
    hp = np.einsum("...aij,a->...ij", basis_poly_hessians(f.spec, v), f.coeffs)
    eye = np.eye(3)
    outer_vg = v[..., :, None] * gp[..., None, :]
    hess = (hp - 0.5 * (outer_vg + np.swapaxes(outer_vg, -1, -2))
            - 0.5 * p[..., None, None] * eye
            + 0.25 * p[..., None, None] * v[..., :, None] * v[..., None, :])
    return hess * sqrt_maxwellian(v)[..., None, None]


# ---------------------------------------------------------------- collision invariants

def collision_invariant_coeffs(spec: BasisSpec) -> np.ndarray:
    """Orthonormal basis of span{1, v_1, v_2, v_3, |v|^2} mu^{1/2}, shape (5, dim)."""
    if spec.K < 2:
        raise DegreeTooLow("collision invariants need K >= 2")
    E = np.zeros((5, spec.dim))
    E[0, spec.index[(0, 0, 0)]] = 1.0
    for i in range(3):
        a = [0, 0, 0]
        a[i] = 1
        E[1 + i, spec.index[tuple(a)]] = 1.0
        a[i] = 2
        E[4, spec.index[tuple(a)]] = 1.0 / math.sqrt(3.0)
    return E


def projection_matrix(spec: BasisSpec) -> np.ndarray:
    E = collision_invariant_coeffs(spec)
    return E.T @ E


def project_P(f: HermiteCoeffs) -> HermiteCoeffs:
    """(a + b.v + c|v|^2) mu^{1/2} from the moment formulas, evaluated by Gauss-Hermite."""
    from .quadrature import build_gauss_hermite

    spec = f.spec
    rule = build_gauss_hermite(degree=spec.K + 2)
    v = rule.nodes
    pf = basis_polys(spec, v) @ f.coeffs
    v2 = np.sum(v * v, axis=-1)
    w = rule.weights * pf
    a = w @ (2.5 - 0.5 * v2)
    b = w @ v
    c = w @ (v2 / 6.0 - 0.5)
    # 1 -> e0, v_i -> e_i, |v|^2 -> 3 e0 + sqrt(2) sum e_{2i}
    out = np.zeros(spec.dim, dtype=np.result_type(f.coeffs, float))
    out[spec.index[(0, 0, 0)]] = a + 3.0 * c
    for i in range(3):
        e = [0, 0, 0]
        e[i] = 1
        out[spec.index[tuple(e)]] = b[i]
        e[i] = 2
        out[spec.index[tuple(e)]] = math.sqrt(2.0) * c
    return HermiteCoeffs(spec, out)


# ---------------------------------------------------------------- transport

def transport_matrices(spec: BasisSpec) -> list[np.ndarray]:
    """(V_j)_{ab} = <v_j psi_b, psi_a> from v_j p_a = sqrt(a_j+1) p_{a+e_j} + sqrt(a_j) p_{a-e_j}."""
    mats = []
    for j in range(3):
        V = np.zeros((spec.dim, spec.dim))
        for b, alpha in enumerate(spec.alphas):
            up = alpha.copy()
            up[j] += 1
            key = tuple(int(c) for c in up)
            if key in spec.index:
                a = spec.index[key]
                V[a, b] = V[b, a] = math.sqrt(alpha[j] + 1)
        mats.append(V)
    return mats
