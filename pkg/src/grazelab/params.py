"""Closed-form kernel quantities: parameters, cutoff, angular kernel, Landau
matrix, characteristic weight, decay schedule and scalar identities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class ConstraintViolation(ValueError):
    """A model parameter lies outside its admissible range."""

    def __init__(self, which: str, message: str):
        super().__init__(f"{which}: {message}")
        self.which = which


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    s: float
    eps: float
    lambda_landau: float = math.pi
    c_b: float = 1.0

    @property
    def gs(self) -> float:
        return self.gamma + 2.0 * self.s

    def with_eps(self, eps: float) -> "ModelParams":
        return validate_params(self.gamma, self.s, eps, self.lambda_landau, self.c_b)


def validate_params(gamma, s, eps, lambda_landau=math.pi, c_b=1.0) -> ModelParams:
    gamma, s, eps = float(gamma), float(s), float(eps)
    if not (-3.0 < gamma <= 0.0):
        raise ConstraintViolation("gamma", f"need -3 < gamma <= 0, got {gamma}")
    if not (0.5 < s < 1.0):
        raise ConstraintViolation("s", f"need 1/2 < s < 1, got {s}")
    if not (gamma + 2.0 * s > -1.0):
        raise ConstraintViolation("gamma+2s", f"need gamma + 2s > -1, got {gamma + 2 * s}")
    if not (0.0 < eps <= 0.5):
        raise ConstraintViolation("eps", f"need 0 < eps <= 1/2, got {eps}")
    if lambda_landau <= 0 or c_b <= 0:
        raise ConstraintViolation("lambda_landau" if lambda_landau <= 0 else "c_b", "must be positive")
    return ModelParams(gamma, s, eps, float(lambda_landau), float(c_b))


def require_landau_range(params: ModelParams) -> None:
    if params.gamma < -2.0:
        raise ConstraintViolation("gamma", "Landau path requires gamma >= -2")


# ---------------------------------------------------------------- cutoff

def _phi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def zeta(r):
    """Smooth cutoff: 1 on [0, 1/2], 0 on [1, inf), strictly decreasing between."""
    r = np.asarray(r, dtype=float)
    a = _phi(1.0 - r)
    b = _phi(r - 0.5)
    mid = a / np.where(a + b > 0, a + b, 1.0)
    out = np.where(r <= 0.5, 1.0, np.where(r >= 1.0, 0.0, mid))
    return out if out.ndim else float(out)


def bracket(x):
    """Japanese bracket <x> = sqrt(1 + |x|^2); x may be a scalar radius or a vector array (last axis)."""
    x = np.asarray(x, dtype=float)
    if x.ndim >= 1 and x.shape[-1] == 3:
        return np.sqrt(1.0 + np.sum(x * x, axis=-1))
    return np.sqrt(1.0 + x * x)


def _radius(y):
    y = np.asarray(y, dtype=float)
    if y.ndim >= 1 and y.shape[-1] == 3:
        return np.linalg.norm(y, axis=-1)
    return np.abs(y)


# ---------------------------------------------------------------- kernels

def b_eps(params: ModelParams, u):
    """Rescaled angular kernel as a function of u = sin(theta/2)."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("b_eps needs sin(theta/2) > 0")
    s, eps = params.s, params.eps
    val = (1.0 - s) * eps ** (2 * s - 2) * u ** (-2.0 - 2.0 * s)
    out = np.where(u <= eps, val, 0.0)
    return out if out.ndim else float(out)


def kernel_B_eps(params: ModelParams, z, sigma) -> float:
    z = np.asarray(z, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        raise DomainError("kernel_B_eps undefined at z = 0")
    cos_t = float(np.dot(z, sigma)) / (nz * float(np.linalg.norm(sigma)))
    if cos_t < 0.0:
        return 0.0
    u = math.sqrt(max(0.0, (1.0 - cos_t) / 2.0))
    if u == 0.0:
        return math.inf
    return params.c_b * nz ** params.gamma * b_eps(params, u)


def landau_a(params: ModelParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        raise DomainError("landau_a undefined at z = 0")
    zh = z / nz
    return params.lambda_landau * nz ** (params.gamma + 2) * (np.eye(3) - np.outer(zh, zh))


def landau_div_a(params: ModelParams, z) -> np.ndarray:
    """sum_i d_i a_ij(z) = -2 Lambda |z|^gamma z_j."""
    z = np.asarray(z, dtype=float)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        raise DomainError("landau_div_a undefined at z = 0")
    return -2.0 * params.lambda_landau * nz ** params.gamma * z


# ---------------------------------------------------------------- Maxwellian

def maxwellian(v):
    v = np.asarray(v, dtype=float)
    return (2 * np.pi) ** -1.5 * np.exp(-0.5 * np.sum(v * v, axis=-1))


def sqrt_maxwellian(v):
    v = np.asarray(v, dtype=float)
    return (2 * np.pi) ** -0.75 * np.exp(-0.25 * np.sum(v * v, axis=-1))


def grad_sqrt_maxwellian(v):
    v = np.asarray(v, dtype=float)
    return -0.5 * v * sqrt_maxwellian(v)[..., None]


# ---------------------------------------------------------------- weights

def w_eps(params: ModelParams, y):
    """Characteristic weight W^eps, radial; y is a radius or an array of 3-vectors."""
    r = _radius(y)
    eps, s = params.eps, params.s
    zt = zeta(eps * r)
    br = np.sqrt(1.0 + r * r)
    big = math.sqrt(1.0 + eps ** -2) ** (1 - s) * br ** s
    out = zt * br + (1.0 - zt) * big
    return out if np.ndim(out) else float(out)


def a_eps_toy(params: ModelParams, v):
    r = _radius(v)
    eps, s, g = params.eps, params.s, params.gamma
    zt = zeta(eps * r)
    br = np.sqrt(1.0 + r * r)
    out = zt * br ** (g + 2) + (1.0 - zt) * br ** (g + 2 * s) / eps ** (2 * (1 - s))
    return out if np.ndim(out) else float(out)


def b_eps_toy(params: ModelParams, t, v, theta: float = 1.0):
    """a_eps(v) t + <v>^theta."""
    return a_eps_toy(params, v) * t + bracket(_radius(v)) ** theta


def weight_lq(v, l: float, q: float):
    b = bracket(v)
    return b ** l * np.exp(q * b)


def symbol_E_closed(params: ModelParams, xi_norm):
    xi = np.asarray(xi_norm, dtype=float)
    eps, s = params.eps, params.s
    hi = eps ** (2 * s - 2) * ((xi ** (2 * s) - eps ** (-2 * s)) / s + eps ** (-2 * s))
    out = np.where(xi <= 1.0 / eps, xi * xi, hi)
    return out if out.ndim else float(out)


def lambda_e(params: ModelParams, b=None, breaks=()) -> float:
    """int_0^{pi/2} b(cos t) sin t (1 - cos t) dt by adaptive quadrature.

    ``b`` is an optional replacement angular function of theta; by default the
    rescaled kernel is used, whose theta^{1-2s} endpoint behaviour is passed to
    the integrator as an algebraic weight. ``breaks`` lists angles where a
    supplied ``b`` jumps.
    """
    s, eps = params.s, params.eps
    if b is None:
        if eps > math.sin(math.pi / 4):
            raise DomainError("cutoff support leaves [0, pi/2]")
        tmax = 2.0 * math.asin(eps)

        # sin t (1 - cos t) = 4 u^3 cos(t/2), so the integrand is u^{1-2s} times smooth
        def smooth(t):
            ratio = 0.5 * float(np.sinc(t / (2 * math.pi)))  # sin(t/2) / t
            return 4 * (1 - s) * eps ** (2 * s - 2) * ratio ** (1 - 2 * s) * math.cos(t / 2)

        val, _ = integrate.quad(smooth, 0.0, tmax, weight="alg", wvar=(1 - 2 * s, 0.0),
                                epsabs=0.0, epsrel=1e-13, limit=200)
        return val
    # t = x^4 smooths integrable endpoint singularities up to t^{-3/4}
    def f(x):
        t = x ** 4
        return 8 * x ** 3 * b(t) * math.sin(t) * math.sin(0.5 * t) ** 2

    pts = tuple(t ** 0.25 for t in breaks) or None
    val, _ = integrate.quad(f, 0.0, (math.pi / 2) ** 0.25, epsabs=0.0, epsrel=1e-12, limit=400, points=pts)
    return val


def cancellation_constant(params: ModelParams) -> float:
    """Closed form of the cancellation-lemma constant for the kernel |z|^gamma b^eps.

    C = int b^eps(cos t) [cos^{-3-gamma}(t/2) - 1] dsigma, integrated exactly in u.
    """
    s, eps, g = params.s, params.eps, params.gamma
    def smooth(u):
        # 4u b(u) [..] = 4(1-s) eps^{2s-2} u^{1-2s} * ([..] / u^2)
        x = u * u
        bracket_over_x = (math.expm1(-0.5 * (3 + g) * math.log1p(-x)) / x) if x > 0 else 0.5 * (3 + g)
        return 4 * (1 - s) * eps ** (2 * s - 2) * bracket_over_x
    val, _ = integrate.quad(smooth, 0.0, eps, weight="alg", wvar=(1 - 2 * s, 0.0), epsabs=0.0, epsrel=1e-13)
    return params.c_b * 2 * math.pi * val


# ---------------------------------------------------------------- decay schedule

@dataclass(frozen=True)
class DecaySchedule:
    params: ModelParams
    lam: float = 0.05
    theta: float = 1.0

    @property
    def kappa(self) -> float:
        return kappa(self.params, self.theta)

    @property
    def t_eps(self) -> float:
        return t_eps(self.params, self.theta)

    def __call__(self, t):
        return decay_schedule(self.params, t, self.theta)


def kappa(params: ModelParams, theta: float = 1.0) -> float:
    return theta / (theta + abs(params.gs))


def t_eps(params: ModelParams, theta: float = 1.0) -> float:
    gs = abs(params.gs)
    if gs == 0:
        return math.inf
    return (1.0 / params.eps) ** (2 * theta * (1 - params.s) / gs)


def decay_schedule(params: ModelParams, t, theta: float = 1.0):
    t = np.asarray(t, dtype=float)
    T = t_eps(params, theta)
    k = kappa(params, theta)
    zt = zeta(t / T)
    late = (t / params.eps ** (2 * (1 - params.s))) ** k
    out = zt * t + (1 - zt) * late
    return out if out.ndim else float(out)
