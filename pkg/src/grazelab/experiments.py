"""Landau-constant calibration, grazing-limit rate scans, the toy decay model,
the envelope lower-bound sweep and empirical norm constants."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import integrate

from .dynamics import DecayTrace, EnvelopeFit, default_initial, evolve_coeffs, fit_envelope, geometric_times
from .hermite import BasisSpec, HermiteCoeffs, basis_spec
from .norms import l2_gamma_gram, n_matrix, triple_gram, weighted_l2_gram
from .operators import angular_blocks, collision_moments, q_landau_pointwise, trilinear_blocks
from .params import (DecaySchedule, ModelParams, a_eps_toy, b_eps_toy, bracket, kappa, maxwellian, t_eps,
                     validate_params, w_eps)
from .quadrature import beta_coefficients, gauss_hermite_exp, landau_beta

PAIRS_FILE = "test_pairs.csv"
PAIRS_SEED = 20240611


class CalibrationUnstable(RuntimeError):
    pass


class QuadratureFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- seeded test data

def generate_test_pairs(seed: int = PAIRS_SEED, n_pairs: int = 3, degree: int = 3) -> list[tuple[HermiteCoeffs, HermiteCoeffs]]:
    """Random degree <= 3 combinations with unit coefficient norm."""
    rng = np.random.default_rng(seed)
    spec = basis_spec(degree)
    out = []
    for _ in range(n_pairs):
        g, h = rng.standard_normal(spec.dim), rng.standard_normal(spec.dim)
        out.append((HermiteCoeffs(spec, g / np.linalg.norm(g)), HermiteCoeffs(spec, h / np.linalg.norm(h))))
    return out


def write_test_pairs(path, pairs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair", "role", "a1", "a2", "a3", "coeff"])
        for k, (g, h) in enumerate(pairs):
            for role, f in (("g", g), ("h", h)):
                for alpha, c in zip(f.spec.alphas, f.coeffs):
                    w.writerow([k, role, *(int(a) for a in alpha), format(float(c), ".17g")])


def load_test_pairs(path=None) -> list[tuple[HermiteCoeffs, HermiteCoeffs]]:
    if path is None:
        text = resources.files("grazelab").joinpath("data", PAIRS_FILE).read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = list(csv.DictReader(text.splitlines()))
    K = max(int(r["a1"]) + int(r["a2"]) + int(r["a3"]) for r in rows)
    spec = basis_spec(K)
    n = max(int(r["pair"]) for r in rows) + 1
    coeffs = {(k, role): np.zeros(spec.dim) for k in range(n) for role in "gh"}
    for r in rows:
        a = (int(r["a1"]), int(r["a2"]), int(r["a3"]))
        coeffs[(int(r["pair"]), r["role"])][spec.index[a]] = float(r["coeff"])
    return [(HermiteCoeffs(spec, coeffs[(k, "g")]), HermiteCoeffs(spec, coeffs[(k, "h")])) for k in range(n)]


# ---------------------------------------------------------------- Landau constant

@dataclass
class PairMoments:
    """Legendre moments S_l of one pair on the L^2 rule; Q = mu sum beta_l S_l."""

    points: np.ndarray
    weights: np.ndarray  # weights for int F(v)^2 dv with F = mu * (...)
    S: np.ndarray

    def q_values(self, beta: np.ndarray) -> np.ndarray:
        return self.S @ beta[: self.S.shape[1]]


def pair_moments(g: HermiteCoeffs, h: HermiteCoeffs, gamma: float, n_axis: int = 5, **rule_kw) -> PairMoments:
    X, w = gauss_hermite_exp(n_axis)  # weight e^{-|v|^2} = (2 pi)^3 mu^2
    S = collision_moments(g, h, X, gamma, **rule_kw)
    return PairMoments(X, w * (2 * np.pi) ** -3, S)


@dataclass
class CalibrationResult:
    lambda_landau: float
    per_pair: np.ndarray
    eps: float

    @property
    def spread(self) -> float:
        return float((self.per_pair.max() - self.per_pair.min()) / self.lambda_landau)


def calibrate_lambda(params: ModelParams, pairs=None, n_axis: int = 5, moments=None, tol: float = 0.05,
                     **rule_kw) -> CalibrationResult:
    """Least-squares Lambda with Q^L_Lambda = Lambda Q^L_1 fitted to Q^eps.

    Q^eps uses the Legendre route, Q^L_1 the divergence-form route, so the
    fit compares two independent discretizations.
    """
    if params.eps > 1e-2:
        raise ValueError("calibration needs eps <= 1e-2")
    pairs = load_test_pairs() if pairs is None else pairs
    if len(pairs) < 3:
        raise ValueError("calibration needs at least 3 test pairs")
    unit = ModelParams(params.gamma, params.s, params.eps, 1.0, params.c_b)
    num = den = 0.0
    per = []
    for k, (g, h) in enumerate(pairs):
        pm = moments[k] if moments is not None else pair_moments(g, h, params.gamma, n_axis, **rule_kw)
        q_eps = pm.q_values(beta_coefficients(params, pm.S.shape[1] - 1))
        # q_landau_pointwise returns Q itself; divide out mu to match q_values
        q_lan = q_landau_pointwise(g, h, pm.points, unit) / maxwellian(pm.points)
        a = float(np.sum(pm.weights * q_eps * q_lan))
        b = float(np.sum(pm.weights * q_lan * q_lan))
        per.append(a / b)
        num += a
        den += b
    res = CalibrationResult(num / den, np.array(per), params.eps)
    if res.spread > tol:
        raise CalibrationUnstable(f"per-pair Lambda spread {res.spread:.3%} exceeds {tol:.0%}")
    return res


# ---------------------------------------------------------------- grazing-limit rates

@dataclass
class SlopeReport:
    mode: str
    eps: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    r2: float
    meta: dict = field(default_factory=dict)

    def as_table(self):
        return ["eps", "error"], [[float(e), float(v)] for e, v in zip(self.eps, self.errors)]


def loglog_fit(eps, errors, mode: str = "", meta: dict | None = None) -> SlopeReport:
    eps = np.asarray(eps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        raise ValueError("errors must be positive")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps must be strictly decreasing")
    x, y = np.log(eps), np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    fit = intercept + slope * x
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeReport(mode, eps, errors, float(slope), float(intercept), r2, meta or {})


DEFAULT_LIMIT_EPS = (0.2, 0.1, 0.05, 0.025)


def limit_scan(mode: str, params: ModelParams, eps_list=DEFAULT_LIMIT_EPS, lambda_landau: float | None = None,
               f=None, K: int = 6, horizon: float = 5.0, n_times: int = 51, n_axis: int = 5,
               moments: PairMoments | None = None, **rule_kw) -> SlopeReport:
    """Error between the eps model and the Landau model as eps shrinks.

    operator: ||Q^eps(F, F) - Q^L(F, F)||_{L^2}, F = mu^{1/2} f;
    matrix: ||A^eps - A^L||_F at degree K;
    semigroup: sup_{t <= horizon} ||f^eps(t) - f^L(t)||_{L^2} of the linear flows.
    """
    lam = params.lambda_landau if lambda_landau is None else lambda_landau
    eps_list = np.asarray(eps_list, dtype=float)
    meta = {"lambda_landau": lam, "gamma": params.gamma, "s": params.s}
    errs = []
    if mode == "operator":
        if moments is None:
            f = load_test_pairs()[0][0] if f is None else f
            moments = pair_moments(f, f, params.gamma, n_axis, **rule_kw)
        lmax = moments.S.shape[1] - 1
        qL = moments.q_values(landau_beta(lam, lmax))
        for eps in eps_list:
            qe = moments.q_values(beta_coefficients(params.with_eps(eps), lmax))
            errs.append(math.sqrt(float(np.sum(moments.weights * (qe - qL) ** 2))))
    elif mode in ("matrix", "semigroup"):
        spec = basis_spec(K)
        blocks = angular_blocks(spec, params.gamma)
        AL = blocks.combine(landau_beta(lam, blocks.lmax))
        meta["K"] = K
        if mode == "semigroup":
            f0 = default_initial(spec) if f is None else f
            times = np.linspace(0.0, horizon, n_times)
            cL = evolve_coeffs(AL, f0, times, method="eig")
            meta["horizon"] = horizon
        for eps in eps_list:
            Ae = blocks.combine(beta_coefficients(params.with_eps(eps), blocks.lmax))
            if mode == "matrix":
                errs.append(float(np.linalg.norm(Ae - AL)))
            else:
                ce = evolve_coeffs(Ae, f0, times, method="eig")
                errs.append(float(np.max(np.linalg.norm(ce - cL, axis=0))))
    else:
        raise ValueError(f"unknown limit mode {mode!r}")
    return loglog_fit(eps_list, errs, mode, meta)


# ---------------------------------------------------------------- toy model

def _toy_log_integrand(params: ModelParams, lam: float, q: float, theta: float, t: float):
    def phi(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return (math.log(4 * math.pi) + 2 * np.log(r) - 2 * lam * t * a_eps_toy(params, r)
                    - 2 * q * bracket(r) ** theta)
    return phi


def toy_log_norm(params: ModelParams, lam: float, q: float, theta: float, t: float) -> float:
    """log N(t), N(t)^2 = int exp(-2 lam a_eps(v) t - 2 q <v>^theta) dv, in log space.

    The radial integrand is scaled by its peak value and split at the peak and
    at the cutoff band [1/(2 eps), 1/eps] before adaptive quadrature.
    """
    phi = _toy_log_integrand(params, lam, q, theta, t)
    grid = np.geomspace(1e-4, 1e12, 4000)
    vals = phi(grid)
    k = int(np.argmax(vals))
    peak, r_peak = float(vals[k]), float(grid[k])
    tail = np.nonzero((grid > r_peak) & (vals < peak - 80.0))[0]
    r_hi = float(grid[tail[0]]) if tail.size else float(grid[-1])
    breaks = sorted({0.0, r_peak, 0.5 / params.eps, 1.0 / params.eps, r_hi})
    breaks = [b for b in breaks if b <= r_hi]
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        val, err, info = integrate.quad(lambda r: math.exp(float(phi(r)) - peak) if r > 0 else 0.0, a, b,
                                        limit=400, epsabs=0.0, epsrel=1e-11, full_output=True)[:3]
        if not math.isfinite(val) or err > 1e-6 * max(val, 1e-300) + 1e-14:
            raise QuadratureFailure(f"radial integral did not converge on [{a:.3g}, {b:.3g}]")
        total += val
    return 0.5 * (peak + math.log(total))


def toy_initial_norm_oracle(q: float, theta: float, dps: int = 30) -> float:
    """N(0) in extended precision."""
    import mpmath as mp

    with mp.workdps(dps):
        f = lambda r: 4 * mp.pi * r ** 2 * mp.exp(-2 * q * mp.sqrt(1 + r * r) ** theta)
        return float(mp.sqrt(mp.quad(f, [0, 1, 10, 100, mp.inf])))


@dataclass
class ToyRun:
    params: ModelParams
    lam: float
    q: float
    theta: float
    trace: DecayTrace
    fit: EnvelopeFit | None
    schedule: DecaySchedule


def toy_times(params: ModelParams, theta: float = 1.0, span: float = 100.0, t_min: float = 1e-2) -> np.ndarray:
    return geometric_times(t_min, span * t_eps(params, theta))


def toy_run(params: ModelParams, lam: float = 0.05, q: float = 0.2, theta: float = 1.0, times=None,
            fit: bool = True) -> ToyRun:
    if not 0 < theta <= 2:
        raise ValueError("theta must lie in (0, 2]")
    if not q > 2 * lam:
        raise ValueError("q > 2 lambda is required")
    times = toy_times(params, theta) if times is None else np.asarray(times, dtype=float)
    logn = np.array([toy_log_norm(params, lam, q, theta, float(t)) for t in times])
    trace = DecayTrace(times, np.exp(logn), (0, 0, 0), "toy",
                       {"profile": "exp(-q <v>^theta)", "q": q, "theta": theta, "log_norms": logn})
    schedule = DecaySchedule(params, lam, theta)
    env = None
    if fit:
        env = fit_envelope(_log_trace(trace), schedule)
    return ToyRun(params, lam, q, theta, trace, env, schedule)


def _log_trace(trace: DecayTrace) -> DecayTrace:
    """Trace rescaled by N(0) so late values stay representable."""
    logn = trace.initial.get("log_norms", np.log(trace.norms))
    return DecayTrace(trace.times, np.exp(logn - logn[0]), trace.k, trace.label, trace.initial)


# ---------------------------------------------------------------- envelope lower bound

def b_lower_bound_sweep(params: ModelParams, theta: float = 1.0, t_grid=None, v_grid=None) -> dict:
    """Count grid points where a_eps(v) t + <v>^theta < min{t, (t / eps^{2(1-s)})^kappa}."""
    if not -2.0 <= params.gamma <= 0.0:
        raise ValueError("the sweep covers gamma in [-2, 0]")
    t = np.geomspace(1e-4, 1e8, 241) if t_grid is None else np.asarray(t_grid, dtype=float)
    v = np.concatenate([[0.0], np.geomspace(1e-3, 1e8, 241)]) if v_grid is None else np.asarray(v_grid, dtype=float)
    T, V = np.meshgrid(t, v, indexing="ij")
    lhs = b_eps_toy(params, T, V, theta)
    k = kappa(params, theta)
    rhs = np.minimum(T, (T / params.eps ** (2 * (1 - params.s))) ** k)
    margin = lhs / rhs
    fails = int(np.sum(lhs < rhs))
    return {"checked": int(lhs.size), "failures": fails, "min_ratio": float(margin.min())}


# ---------------------------------------------------------------- empirical constants

@dataclass
class ConstantsRow:
    K: int
    eps: float
    coercivity: float
    upper: float
    trilinear: float


def _random_unit(rng, dim, n):
    X = rng.standard_normal((dim, n))
    return X / np.linalg.norm(X, axis=0)


def empirical_constants(gamma: float, s: float, eps_list=(0.3, 0.1, 0.03), K_list=(6, 8), seed: int = 7,
                        n_f: int = 100, n_triples: int = 200) -> list[ConstantsRow]:
    """Sampled constants of three norm inequalities.

    coercivity: min over random f of (<L f, f> + |f|^2_{L^2_{g/2}}) / |f|^2_{eps, g/2};
    upper: max over random f of N(f, mu^{1/2}) / |W^eps f|^2_{L^2_{g/2}};
    trilinear: max over random triples of |<Gamma(g, h), f>| / (|g|_{L^2} |h|_{eps, g/2} |f|_{eps, g/2}).
    """
    rows = []
    for K in K_list:
        spec = basis_spec(K)
        rng = np.random.default_rng([seed, K])
        F = _random_unit(rng, spec.dim, n_f)
        Gt, Ht, Ft = (_random_unit(rng, spec.dim, n_triples) for _ in range(3))
        blocks = angular_blocks(spec, gamma)
        tri = trilinear_blocks(spec, gamma, Gt, Ht)
        Mg = l2_gamma_gram(spec, gamma)
        for eps in eps_list:
            p = validate_params(gamma, s, eps)
            A = blocks.combine(beta_coefficients(p, blocks.lmax))
            Mt = triple_gram(spec, 0.5 * gamma, p)["total"]
            quad = lambda M, X: np.einsum("ak,ab,bk->k", X, M, X)
            coer = float(np.min((quad(A, F) + quad(Mg, F)) / quad(Mt, F)))
            Nm = n_matrix(spec, p)
            Mw = weighted_l2_gram(spec, lambda r, p=p: w_eps(p, r) ** 2 * bracket(r) ** gamma)
            upper = float(np.max(quad(Nm, F) / quad(Mw, F)))
            b = np.tensordot(beta_coefficients(p, K), tri, axes=1)  # (dim, n_triples)
            num = np.abs(np.sum(b * Ft, axis=0))
            den = np.sqrt(quad(Mt, Ht) * quad(Mt, Ft))  # |g|_{L^2} = 1
            rows.append(ConstantsRow(K, eps, coer, upper, float(np.max(num / den))))
    return rows


def constants_spread(rows: list[ConstantsRow]) -> dict:
    """max / min of each constant over all (K, eps) rows."""
    out = {}
    for name in ("coercivity", "upper", "trilinear"):
        v = np.array([getattr(r, name) for r in rows])
        out[name] = float(v.max() / v.min())
    return out
