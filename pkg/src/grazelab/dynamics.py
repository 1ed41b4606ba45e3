"""Linear semigroup evolution of Hermite coefficients and decay-envelope fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .hermite import BasisSpec, HermiteCoeffs, collision_invariant_coeffs, transport_matrices
from .operators import OperatorMatrix
from .params import DecaySchedule


class StepControlFailure(RuntimeError):
    pass


class WindowTooShort(ValueError):
    pass


@dataclass
class DecayTrace:
    times: np.ndarray
    norms: np.ndarray
    k: tuple = (0, 0, 0)
    label: str = ""
    initial: dict = field(default_factory=dict)

    def as_table(self):
        return ["t", "norm"], [[float(t), float(n)] for t, n in zip(self.times, self.norms)]


@dataclass
class EnvelopeFit:
    lambda_fit: float
    kappa_fit: float
    transition_estimate: float
    residuals: dict
    windows: dict
    early_nonlinear: bool

    def as_table(self):
        header = ["lambda_fit", "kappa_fit", "transition_estimate", "early_rms", "late_rms", "early_nonlinear"]
        return header, [[self.lambda_fit, self.kappa_fit, self.transition_estimate,
                         self.residuals["early"], self.residuals["late"], int(self.early_nonlinear)]]


def geometric_times(t_min: float, t_max: float, per_decade: int = 64, include_zero: bool = True) -> np.ndarray:
    n = max(2, int(math.ceil(per_decade * math.log10(t_max / t_min))) + 1)
    t = np.geomspace(t_min, t_max, n)
    return np.concatenate([[0.0], t]) if include_zero else t


def default_initial(spec: BasisSpec, M: np.ndarray | None = None, damping: float | None = None) -> HermiteCoeffs:
    """Normalized degree-3 mode, M-orthogonal to the collision invariants.

    damping multiplies coefficient a by exp(-damping * |a|), a coefficient-space
    stand-in for a W_{l,q} weight.
    """
    if spec.K < 3:
        raise ValueError("default initial data needs K >= 3")
    M = np.eye(spec.dim) if M is None else M
    c = np.zeros(spec.dim)
    c[spec.index[(3, 0, 0)]] = 1.0
    c[spec.index[(1, 1, 1)]] = 1.0
    if damping is not None:
        c *= np.exp(-damping * spec.degrees)
    E = collision_invariant_coeffs(spec)
    G = E @ M @ E.T
    c -= E.T @ np.linalg.solve(G, E @ M @ c)
    c /= math.sqrt(c @ M @ c)
    return HermiteCoeffs(spec, c)


def _norms(C: np.ndarray, M: np.ndarray | None) -> np.ndarray:
    """Norms of the columns of C."""
    if M is None:
        return np.sqrt(np.sum(np.abs(C) ** 2, axis=0))
    return np.sqrt(np.maximum(np.real(np.einsum("it,ij,jt->t", C.conj(), M, C)), 0.0))


def evolve_coeffs(A, f0, times, k=(0, 0, 0), method: str = "auto", rtol: float = 1e-8, atol: float = 1e-8):
    """Coefficient history c(t) for dc/dt = -(A + i k.V) c, shape (dim, len(times))."""
    A = A.entries if isinstance(A, OperatorMatrix) else np.asarray(A)
    c0 = f0.coeffs if isinstance(f0, HermiteCoeffs) else np.asarray(f0)
    times = np.asarray(times, dtype=float)
    kvec = np.asarray(k, dtype=float)
    if method == "auto":
        method = "eig" if not np.any(kvec) else "rk"
    if method == "eig":
        if np.any(kvec):
            raise ValueError("the eigendecomposition path is for k = 0 only")
        w, U = np.linalg.eigh(0.5 * (A + A.T))
        return U @ (np.exp(-np.outer(w, times)) * (U.T @ c0)[:, None])
    dim = A.shape[0]
    spec = _spec_for_dim(dim)
    G = A.astype(complex)
    if np.any(kvec):
        V = transport_matrices(spec)
        G = G + 1j * sum(kj * Vj for kj, Vj in zip(kvec, V))
    y0 = np.asarray(c0, dtype=complex)
    sol = solve_ivp(lambda t, y: -(G @ y), (times[0], times[-1]), y0, method="RK45", t_eval=times,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise StepControlFailure(sol.message)
    return sol.y


def _spec_for_dim(dim: int) -> BasisSpec:
    from .hermite import basis_spec

    for K in range(0, 33):
        if (K + 1) * (K + 2) * (K + 3) // 6 == dim:
            return basis_spec(K)
    raise ValueError(f"no basis of dimension {dim}")


def evolve(A, f0, times, k=(0, 0, 0), M: np.ndarray | None = None, method: str = "auto",
           label: str | None = None, initial: dict | None = None) -> DecayTrace:
    """Norm trace of the linear flow from f0; M is the Gram of the reported norm (None = L^2)."""
    C = evolve_coeffs(A, f0, times, k, method)
    lab = label if label is not None else getattr(A, "label", "matrix")
    return DecayTrace(np.asarray(times, dtype=float), _norms(C, M), tuple(int(x) for x in k), lab, initial or {})


# ---------------------------------------------------------------- envelope fits

def _linfit(x, y):
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    return coef, float(np.sqrt(np.mean(res ** 2))), float(np.linalg.cond(X))


def fit_envelope(trace: DecayTrace, schedule: DecaySchedule, early_tol: float = 1e-3,
                 min_points: int = 5) -> EnvelopeFit:
    """Exponential rate on [0, T/2] and stretched exponent on [2T, end]; T = T_eps.

    The early residual is the RMS misfit of log N relative to the total drop
    of log N over the window; above early_tol the window is flagged non-linear.
    """
    T = schedule.t_eps
    t, n = trace.times, trace.norms
    if t[-1] < 2.0 * T:
        raise WindowTooShort(f"trace ends at {t[-1]:.3g} < 2 T_eps = {2 * T:.3g}")
    logn = np.log(n)
    early = t <= 0.5 * T
    late = (t >= 2.0 * T) & (t > 0)
    if early.sum() < min_points or late.sum() < min_points:
        raise WindowTooShort("fewer than the minimum number of samples in a fit window")
    (a, slope), rms_e, cond_e = _linfit(t[early], logn[early])
    lam = -slope
    drop = abs(logn[early][-1] - logn[early][0]) or 1.0
    log0 = logn[0] if t[0] == 0 else a
    depth = log0 - logn[late]
    if np.any(depth <= 0):
        raise WindowTooShort("no decay inside the late window")
    (b, kap), rms_l, cond_l = _linfit(np.log(t[late]), np.log(depth))
    # kappa = 1 means no regime change, so there is no crossover to report
    if lam > 0 and abs(1.0 - kap) > 1e-6:
        cross = (math.exp(b) / lam) ** (1.0 / (1.0 - kap))
    else:
        cross = math.nan
    return EnvelopeFit(float(lam), float(kap), float(cross),
                       {"early": rms_e / drop, "late": rms_l, "cond_early": cond_e, "cond_late": cond_l},
                       {"early": (float(t[early][0]), float(t[early][-1])),
                        "late": (float(t[late][0]), float(t[late][-1]))},
                       bool(rms_e / drop > early_tol))
