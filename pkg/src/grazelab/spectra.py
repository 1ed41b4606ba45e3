"""Restricted generalized eigenproblems on the micro space, gap scans in eps
and the Maxwell-molecule eigenvalue oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg, special

from .hermite import BasisSpec, basis_spec, collision_invariant_coeffs
from .norms import l2_gamma_gram, triple_gram
from .operators import OperatorMatrix, angular_blocks, assemble_L_eps, assemble_L_landau
from .params import ModelParams, validate_params


class IndefiniteGram(np.linalg.LinAlgError):
    pass


class EigFailure(np.linalg.LinAlgError):
    pass


def gram_matrix(kind: str, spec: BasisSpec, params: ModelParams, grid=None, sampler=None):
    """Gram matrix of a norm on the basis, with an eigenvalue floor repair.

    kind: "l2", "l2_gamma" (weight <v>^{gamma}) or "triple" (|.|_{eps, gamma/2}).
    Returns (M, info) where info records whether the floor was applied.
    """
    if kind == "l2":
        M = np.eye(spec.dim)
    elif kind == "l2_gamma":
        M = l2_gamma_gram(spec, params.gamma, sampler)
    elif kind == "triple":
        M = triple_gram(spec, 0.5 * params.gamma, params, grid, sampler)["total"]
    else:
        raise ValueError(f"unknown Gram kind {kind!r}")
    M = 0.5 * (M + M.T)
    w, U = np.linalg.eigh(M)
    floor = 1e-12 * np.trace(M) / spec.dim
    info = {"repaired": False, "repair_mass": 0.0}
    if w.min() < floor:
        lifted = np.maximum(w, floor)
        mass = float(np.sum(lifted - w) / np.sum(np.abs(w)))
        if mass > 1e-8:
            raise IndefiniteGram(f"repair would move {mass:.2e} of the spectral mass")
        M = (U * lifted) @ U.T
        info = {"repaired": True, "repair_mass": mass}
    return M, info


def micro_basis(M: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Orthonormal basis Z of {x : E M x = 0}."""
    C = E @ M
    _, s, Vt = np.linalg.svd(C)
    rank = int(np.sum(s > 1e-12 * s[0]))
    return Vt[rank:].T


def restricted_min_eig(A, M: np.ndarray, E: np.ndarray | None = None):
    """min x^T A x / x^T M x over x M-orthogonal to the rows of E.

    Returns (lambda_min, x) with x normalized in the M-norm.
    """
    A = A.entries if isinstance(A, OperatorMatrix) else np.asarray(A)
    if E is None:
        return _min_eig(A, M)
    Z = micro_basis(M, E)
    lam, y = _min_eig(Z.T @ A @ Z, Z.T @ M @ Z)
    x = Z @ y
    x /= math.sqrt(float(x @ M @ x))
    return lam, x


def restricted_spectrum(A, M: np.ndarray, E: np.ndarray | None = None) -> np.ndarray:
    A = A.entries if isinstance(A, OperatorMatrix) else np.asarray(A)
    if E is None:
        return linalg.eigh(A, M, eigvals_only=True)
    Z = micro_basis(M, E)
    return linalg.eigh(Z.T @ A @ Z, Z.T @ M @ Z, eigvals_only=True)


def _min_eig(A, M):
    A = 0.5 * (A + A.T)
    M = 0.5 * (M + M.T)
    try:
        w, V = linalg.eigh(A, M, subset_by_index=[0, 0])
    except linalg.LinAlgError as exc:  # pragma: no cover
        raise EigFailure(str(exc)) from exc
    return float(w[0]), V[:, 0]


def deflation_residual(x: np.ndarray, M: np.ndarray, E: np.ndarray) -> float:
    return float(np.max(np.abs(E @ M @ x)))


# ---------------------------------------------------------------- gap scans

@dataclass
class GapRow:
    eps: float
    lambda_min_l2gamma: float
    lambda_min_triple: float
    K: int
    asym_residual: float


@dataclass
class GapReport:
    gamma: float
    s: float
    K: int
    rows: list[GapRow] = field(default_factory=list)

    def ratio(self, column: str = "lambda_min_triple") -> float:
        vals = np.array([getattr(r, column) for r in self.rows if r.eps > 0])
        return float(vals.max() / vals.min())

    def as_table(self) -> tuple[list[str], list[list]]:
        header = ["eps", "lambda_min_l2gamma", "lambda_min_triple", "K", "asym_residual"]
        return header, [[r.eps, r.lambda_min_l2gamma, r.lambda_min_triple, r.K, r.asym_residual] for r in self.rows]


def gap_scan(gamma: float, s: float, eps_list, K: int = 8, lambda_landau: float = math.pi,
             include_landau: bool = True, mapper=map) -> GapReport:
    """Restricted lambda_min per eps under both Grams, plus a Landau row (eps = 0).

    ``mapper`` runs the independent per-eps solves (e.g. an executor's map);
    row order follows eps_list regardless.
    """
    spec = basis_spec(K)
    E = collision_invariant_coeffs(spec)
    report = GapReport(gamma, s, K)
    base = validate_params(gamma, s, max(eps_list), lambda_landau)
    M_l2g, _ = gram_matrix("l2_gamma", spec, base)
    angular_blocks(spec, gamma)  # shared by every eps

    def row(eps):
        p = base.with_eps(eps)
        A = assemble_L_eps(spec, p)
        M_tr, _ = gram_matrix("triple", spec, p)
        return GapRow(eps, restricted_min_eig(A, M_l2g, E)[0], restricted_min_eig(A, M_tr, E)[0],
                      K, A.meta["asymmetry"])

    report.rows.extend(mapper(row, list(eps_list)))
    if include_landau and gamma >= -2.0:
        AL = assemble_L_landau(spec, base)
        # eps -> 0: W^eps = <.> on the whole resolved range
        M_tr, _ = gram_matrix("triple", spec, base.with_eps(1e-6))
        report.rows.append(GapRow(0.0, restricted_min_eig(AL, M_l2g, E)[0], restricted_min_eig(AL, M_tr, E)[0],
                                  K, AL.meta["asymmetry"]))
    return report


# ---------------------------------------------------------------- Maxwell-molecule oracle

def _legendre_power_poly(l: int, n: int) -> Polynomial:
    """t^n * x^l P_l(x) written as a polynomial in t = x^2."""
    c = special.legendre(l).coeffs[::-1]  # ascending powers of x
    coef = np.zeros(l + 1)
    for k, ck in enumerate(c):
        if ck != 0.0:
            coef[(k + l) // 2] += ck
    return Polynomial(coef) * Polynomial([0, 1]) ** n


def maxwell_eigenvalue(params: ModelParams, n: int, l: int) -> float:
    """int_cap b [1 + d_{n0} d_{l0} - x^{2n+l} P_l(x) - y^{2n+l} P_l(y)] dsigma, x = cos(t/2), y = sin(t/2).

    The bracket is a polynomial G(u^2) with G(0) = 0, so G(y)/y is integrated
    exactly by Gauss-Jacobi with weight u^{1-2s}.
    """
    T = _legendre_power_poly(l, n)
    one_minus = Polynomial([1.0, -1.0])
    G = Polynomial([1.0 + (1.0 if n == 0 and l == 0 else 0.0)]) - T(one_minus) - T
    Q = Polynomial(G.coef[1:]) if G.coef.size > 1 else Polynomial([0.0])
    eps, s = params.eps, params.s
    npts = Q.degree() + 2
    xj, wj = special.roots_jacobi(npts, 0.0, 1.0 - 2.0 * s)
    u = 0.5 * eps * (xj + 1.0)
    pref = 2.0 * np.pi * 4.0 * (1.0 - s) * eps ** (2 * s - 2) * (0.5 * eps) ** (2.0 - 2.0 * s)
    return params.c_b * pref * float(wj @ Q(u * u))


def maxwell_spectrum(params: ModelParams, K: int) -> list[tuple[float, int, int, int]]:
    """(lambda_nl, n, l, multiplicity) for 2n + l <= K, sorted by eigenvalue."""
    out = []
    for n in range(K // 2 + 1):
        for l in range(K - 2 * n + 1):
            out.append((maxwell_eigenvalue(params, n, l), n, l, 2 * l + 1))
    return sorted(out)


def maxwell_gap(params: ModelParams, K: int, tol: float = 1e-12) -> float:
    vals = [lam for lam, *_ in maxwell_spectrum(params, K)]
    scale = max(abs(v) for v in vals)
    return min(v for v in vals if v > tol * scale)
