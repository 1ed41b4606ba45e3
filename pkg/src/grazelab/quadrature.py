"""Quadrature rules: graded cap rule for the grazing kernel, Gauss-Hermite
tensor rules, a uniform cube grid for discrete Fourier norms, a spherical
shell sampler with a real spherical-harmonic transform, and radial rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .params import ModelParams, b_eps


class QuadratureDivergence(RuntimeError):
    pass


# ---------------------------------------------------------------- 1-D building blocks

def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def trapezoid_circle(n: int, offset: float = 0.0):
    phi = offset + 2.0 * np.pi * np.arange(n) / n
    return phi, np.full(n, 2.0 * np.pi / n)


def gauss_jacobi_interval(n: int, power: float, R: float):
    """Nodes/weights with sum w F(r_i) = int_0^R r^power F(r) dr for smooth F."""
    x, w = special.roots_jacobi(n, 0.0, power)
    r = 0.5 * R * (x + 1.0)
    return r, (0.5 * R) ** (power + 1.0) * w


def radial_gauss_gaussian(n: int, power: float):
    """Rule for int_0^inf P(r^2) r^power exp(-r^2/4) dr, exact for deg P <= 2n-1.

    Uses generalized Gauss-Laguerre in x = r^2/4.
    """
    alpha = 0.5 * (power - 1.0)
    x, w = special.roots_genlaguerre(n, alpha)
    return 2.0 * np.sqrt(x), 2.0 ** power * w


def orthonormal_frame(omega):
    """Two unit vectors completing omega (..., 3) to a right-handed frame."""
    omega = np.asarray(omega, dtype=float)
    ref = np.zeros_like(omega)
    use_x = np.abs(omega[..., 0]) < 0.9
    ref[..., 0] = np.where(use_x, 1.0, 0.0)
    ref[..., 1] = np.where(use_x, 0.0, 1.0)
    e1 = ref - np.sum(ref * omega, axis=-1, keepdims=True) * omega
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(omega, e1)
    return e1, e2


# ---------------------------------------------------------------- graded cap rule

@dataclass(frozen=True)
class SphereRule:
    """Rule on the cap {sin(theta/2) <= eps} around a pole direction.

    ``wu`` integrates against 4u du on [0, eps]; the full weights are
    ``wu[:, None] * wphi[None, :]`` and carry the surface measure.
    """

    u: np.ndarray
    wu: np.ndarray
    phi: np.ndarray
    wphi: np.ndarray
    eps: float
    s: float
    panels: int
    order: int
    n_phi: int
    inner_mass_fraction: float

    @property
    def weights(self) -> np.ndarray:
        return (self.wu[:, None] * self.wphi[None, :]).ravel()

    @property
    def size(self) -> int:
        return self.u.size * self.phi.size

    def integrate(self, f) -> float:
        """Integrate f(u, phi) (broadcasting callable) over the cap."""
        vals = f(self.u[:, None], self.phi[None, :])
        vals = np.broadcast_to(vals, (self.u.size, self.phi.size))
        return float(self.wu @ vals @ self.wphi)

    def displacement(self, omega, r):
        """delta = v' - v = (r/2)(sigma - omega) for every node.

        omega: (..., 3) unit vectors, r: (...) radii. Returns (..., nu, nphi, 3),
        built without forming sigma - omega so small angles keep full precision.
        """
        omega = np.asarray(omega, dtype=float)
        r = np.asarray(r, dtype=float)
        e1, e2 = orthonormal_frame(omega)
        u = self.u[:, None, None]
        c = np.cos(self.phi)[None, :, None]
        sn = np.sin(self.phi)[None, :, None]
        tang = u * np.sqrt(1.0 - u * u)
        om = omega[..., None, None, :]
        d = -u * u * om + tang * (c * e1[..., None, None, :] + sn * e2[..., None, None, :])
        return r[..., None, None, None] * d

    def sigma(self, omega):
        omega = np.asarray(omega, dtype=float)
        e1, e2 = orthonormal_frame(omega)
        u = self.u[:, None, None]
        c = np.cos(self.phi)[None, :, None]
        sn = np.sin(self.phi)[None, :, None]
        om = omega[..., None, None, :]
        return (1 - 2 * u * u) * om + 2 * u * np.sqrt(1 - u * u) * (
            c * e1[..., None, None, :] + sn * e2[..., None, None, :])


def build_sphere_rule(params: ModelParams, panels: int = 30, order: int = 8, n_phi: int = 16,
                      extra_breaks=()) -> SphereRule:
    """Dyadic Gauss-Legendre panels on [eps 2^{-j-1}, eps 2^{-j}], j < panels, and a
    Gauss-Jacobi panel with weight u^{1-2s} on [0, eps 2^{-panels}].

    The inner panel integrates b^eps * O(u^2) integrands to full order, so no
    mass is dropped; ``inner_mass_fraction`` reports the share of the order-2
    moment it carries. ``extra_breaks`` splits panels at interior kinks.
    """
    if panels < 1 or order < 2 or n_phi < 4:
        raise ValueError("need panels >= 1, order >= 2, n_phi >= 4")
    eps, s = params.eps, params.s
    edges = eps * 2.0 ** -np.arange(panels + 1, dtype=float)
    cuts = [float(b) for b in extra_breaks if 0.0 < b < eps]
    edges = np.unique(np.concatenate([edges, cuts]))
    us, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(order, a, b)
        us.append(x)
        ws.append(4.0 * x * w)
    a0 = edges[0]
    xj, wj = special.roots_jacobi(order, 0.0, 1.0 - 2.0 * s)
    uin = 0.5 * a0 * (xj + 1.0)
    us.insert(0, uin)
    ws.insert(0, (0.5 * a0) ** (2.0 - 2.0 * s) * wj * 4.0 * uin ** (2.0 * s))
    phi, wphi = trapezoid_circle(n_phi)
    return SphereRule(
        u=np.concatenate(us), wu=np.concatenate(ws), phi=phi, wphi=wphi,
        eps=eps, s=s, panels=panels, order=order, n_phi=n_phi,
        inner_mass_fraction=(a0 / eps) ** (2.0 - 2.0 * s),
    )


def order2_integral(params: ModelParams, rule: SphereRule | None = None) -> float:
    """int b^eps sin^2(theta/2) dsigma on the graded rule (exact value 4 pi)."""
    rule = rule or build_sphere_rule(params)
    return params.c_b * rule.integrate(lambda u, phi: b_eps(params, u) * u * u)


def symbol_E_quadrature(params: ModelParams, xi_norm, panels: int = 30, order: int = 8, n_phi: int = 16) -> np.ndarray:
    """E^eps(xi) = (1/4pi) int b^eps min{|xi|^2 sin^2(theta/2), 1} dsigma.

    The rule is split at the kink u = 1/|xi|.
    """
    xi = np.atleast_1d(np.asarray(xi_norm, dtype=float))
    out = np.empty_like(xi)
    for k, x in enumerate(xi):
        brk = (1.0 / x,) if x > 0 else ()
        rule = build_sphere_rule(params, panels, order, n_phi, extra_breaks=brk)
        out[k] = rule.integrate(lambda u, phi: b_eps(params, u) * np.minimum(x * x * u * u, 1.0)) / (4 * np.pi)
    return out if np.ndim(xi_norm) else float(out[0])


# ---------------------------------------------------------------- Gauss-Hermite

@dataclass(frozen=True)
class GaussHermiteRule:
    """Tensor rule with sum w f(v_i) = int f mu dv, exact to total degree ``degree``."""

    nodes: np.ndarray
    weights: np.ndarray
    degree: int
    n_axis: int


@lru_cache(maxsize=32)
def _gh_axis(n: int):
    x, w = special.roots_hermitenorm(n)
    return x, w / math.sqrt(2.0 * math.pi)


def tensor_rule(x, w):
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    return X, W


def build_gauss_hermite(degree: int | None = None, n_axis: int | None = None) -> GaussHermiteRule:
    if n_axis is None:
        if degree is None or degree < 1:
            raise ValueError("degree must be >= 1")
        n_axis = (degree + 2) // 2
    x, w = _gh_axis(n_axis)
    X, W = tensor_rule(x, w)
    return GaussHermiteRule(X, W, 2 * n_axis - 1, n_axis)


def gauss_hermite_exp(n_axis: int, scale: float = 1.0):
    """Tensor rule for int F(V) exp(-|V|^2 / scale^2) dV."""
    x, w = special.roots_hermite(n_axis)
    X, W = tensor_rule(scale * x, scale * w)
    return X, W


# ---------------------------------------------------------------- relative-velocity rule

@dataclass(frozen=True)
class BallRule:
    """Rule for int_{|z|<R} |z|^gamma F(z) dz in spherical coordinates about z = 0."""

    r: np.ndarray
    omega: np.ndarray
    weights: np.ndarray
    wr: np.ndarray
    womega: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return (self.r[:, None, None] * self.omega[None, :, :]).reshape(-1, 3)


def direction_rule(n_theta: int, n_phi: int, phi_offset: float = 0.0):
    ct, wt = gauss_legendre(n_theta)
    phi, wp = trapezoid_circle(n_phi, phi_offset)
    st = np.sqrt(1.0 - ct * ct)
    om = np.stack([
        (st[:, None] * np.cos(phi)[None, :]).ravel(),
        (st[:, None] * np.sin(phi)[None, :]).ravel(),
        np.repeat(ct, n_phi),
    ], axis=-1)
    return om, (wt[:, None] * wp[None, :]).ravel()


def build_ball_rule(gamma: float, R: float, n_r: int = 24, n_theta: int = 12, n_phi: int = 24) -> BallRule:
    r, wr = gauss_jacobi_interval(n_r, 2.0 + gamma, R)
    om, wo = direction_rule(n_theta, n_phi)
    return BallRule(r, om, (wr[:, None] * wo[None, :]).ravel(), wr, wo)


# ---------------------------------------------------------------- cube grid

@dataclass(frozen=True)
class UniformCubeGrid:
    half_width: float = 8.0
    n: int = 64

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def coords(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.n)

    @property
    def freq_spacing(self) -> float:
        return math.pi / self.half_width

    def points(self) -> np.ndarray:
        c = self.coords
        return np.stack(np.meshgrid(c, c, c, indexing="ij"), axis=-1)

    def rfft_xi_norm(self) -> np.ndarray:
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        return np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2 + kr[None, None, :] ** 2)

    def rfft_multiplicity(self) -> np.ndarray:
        """Weights that turn sums over the half spectrum into full-spectrum sums."""
        m = np.full(self.n // 2 + 1, 2.0)
        m[0] = 1.0
        if self.n % 2 == 0:
            m[-1] = 1.0
        return m

    def parseval_scale(self) -> float:
        """||f||^2 ~ h^3 sum |f|^2 = scale * sum |F_k|^2."""
        return self.h ** 3 / self.n ** 3


# ---------------------------------------------------------------- spherical shells

def real_sph_harm(lmax: int, theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Real orthonormal harmonics, rows ordered (l, m) with m = -l..l.

    Returns (Y, degrees) where Y has shape (n_sh, *theta.shape).
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    rows, degs = [], []
    for l in range(lmax + 1):
        for m in range(-l, l + 1):
            y = special.sph_harm_y(l, abs(m), theta, phi)
            if m == 0:
                rows.append(y.real)
            elif m > 0:
                rows.append(math.sqrt(2.0) * (-1) ** m * y.real)
            else:
                rows.append(math.sqrt(2.0) * (-1) ** m * y.imag)
            degs.append(l)
    return np.array(rows), np.array(degs)


@dataclass(frozen=True)
class SphericalShellSampler:
    radii: np.ndarray
    wr: np.ndarray
    directions: np.ndarray
    wdir: np.ndarray
    l_max: int
    Y: np.ndarray
    degrees: np.ndarray
    R: float

    @property
    def points(self) -> np.ndarray:
        return (self.radii[:, None, None] * self.directions[None, :, :])

    @property
    def volume_weights(self) -> np.ndarray:
        return self.wr[:, None] * self.wdir[None, :]


@lru_cache(maxsize=8)
def build_shell_sampler(R: float = 8.0, n_r: int = 48, l_max: int = 24) -> SphericalShellSampler:
    r, w = gauss_legendre(n_r, 0.0, R)
    n_t, n_p = l_max + 1, 2 * l_max + 2
    ct, wt = gauss_legendre(n_t)
    ph, wp = trapezoid_circle(n_p)
    theta = np.repeat(np.arccos(ct), n_p)
    phi = np.tile(ph, n_t)
    st = np.sin(theta)
    dirs = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)
    Y, degs = real_sph_harm(l_max, theta, phi)
    return SphericalShellSampler(r, w * r * r, dirs, (wt[:, None] * wp[None, :]).ravel(),
                                 l_max, Y, degs, R)


def shell_transform(field, sampler: SphericalShellSampler) -> np.ndarray:
    """Coefficients f_lm(r_i) = int Y_lm(sigma) f(r_i sigma) dsigma, shape (n_r, n_sh).

    ``field`` is a callable on (..., 3) points or a precomputed (n_r, n_dir) array.
    """
    vals = field(sampler.points) if callable(field) else np.asarray(field)
    return (vals * sampler.wdir[None, :]) @ sampler.Y.T


def shell_synthesize(coeffs: np.ndarray, sampler: SphericalShellSampler) -> np.ndarray:
    return coeffs @ sampler.Y


# ---------------------------------------------------------------- angular moments of b^eps

def _legendre_minus_one_over_x(l: int, u: np.ndarray) -> np.ndarray:
    """(P_l(1 - 2u^2) - 1) / u^2 without cancellation at small u."""
    u = np.asarray(u, dtype=float)
    x = u * u
    out = np.empty_like(u)
    small = u < 0.1
    if np.any(small):
        xs = x[small]
        acc = np.zeros_like(xs)
        term_pow = np.ones_like(xs)
        for k in range(1, l + 1):
            acc += (-1) ** k * math.comb(l, k) * math.comb(l + k, k) * term_pow
            term_pow = term_pow * xs
        out[small] = acc
    big = ~small
    if np.any(big):
        out[big] = (special.eval_legendre(l, 1.0 - 2.0 * x[big]) - 1.0) / x[big]
    return out


def beta_coefficients(params: ModelParams, lmax: int) -> np.ndarray:
    """beta_l = C_B int_cap b^eps (P_l(cos theta) - 1) dsigma for l = 0..lmax.

    The integrand is u^{1-2s} times a polynomial in u, so a Gauss-Jacobi rule
    with lmax + 2 nodes is exact.
    """
    eps, s = params.eps, params.s
    n = lmax + 2
    xj, wj = special.roots_jacobi(n, 0.0, 1.0 - 2.0 * s)
    u = 0.5 * eps * (xj + 1.0)
    pref = 2.0 * np.pi * 4.0 * (1.0 - s) * eps ** (2 * s - 2) * (0.5 * eps) ** (2.0 - 2.0 * s)
    out = np.zeros(lmax + 1)
    for l in range(1, lmax + 1):
        out[l] = pref * float(wj @ _legendre_minus_one_over_x(l, u))
    return params.c_b * out


def landau_beta(lambda_landau: float, lmax: int) -> np.ndarray:
    """Angular eigenvalues of the Landau limit, -4 Lambda l(l+1)."""
    l = np.arange(lmax + 1, dtype=float)
    return -4.0 * lambda_landau * l * (l + 1.0)
