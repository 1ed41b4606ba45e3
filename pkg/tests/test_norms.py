import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grazelab.hermite import HermiteCoeffs, basis_spec, mode
from grazelab.norms import (aniso_gram, aniso_part, derivative_matrices, fourier_gram, fourier_gram_hermite,
                            fourier_part, grid_for, n_functional, n_matrix, phase_gram, phase_part, sobolev_norm,
                            triple_gram, triple_norm, weighted_l2_norm)
from grazelab.params import validate_params, w_eps

SMALL = validate_params(-1.0, 0.75, 0.01)
MID = validate_params(-1.0, 0.75, 0.1)


def _random(spec, seed):
    c = np.random.default_rng(seed).normal(size=spec.dim)
    return HermiteCoeffs(spec, c / np.linalg.norm(c))


def test_phase_part_of_constant_mode():
    one = mode(basis_spec(2), (0, 0, 0))
    assert phase_part(one, 0.0, SMALL) == pytest.approx(2.0, rel=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_phase_part_lower_bounds(seed):
    f = _random(basis_spec(4), seed)
    p0, p1 = phase_part(f, 0.0, MID), phase_part(f, 1.0, MID)
    assert p1 >= p0
    assert p0 >= weighted_l2_norm(f, 0.0)
    assert triple_norm(f, -0.5, MID).total >= weighted_l2_norm(f, -0.5)


def test_fourier_part_of_constant_mode_is_h1_norm():
    spec = basis_spec(2)
    one = mode(spec, (0, 0, 0))
    grads = [D @ one.coeffs for D in derivative_matrices(spec)]
    h1 = math.sqrt(1.0 + sum(float(g @ g) for g in grads))
    assert fourier_part(one, 0.0, SMALL) == pytest.approx(h1, rel=1e-6)
    assert h1 == pytest.approx(math.sqrt(1.75), rel=1e-14)


@pytest.mark.parametrize("l", [0.0, -0.5, 1.0])
def test_fourier_part_plancherel(l):
    f = _random(basis_spec(4), 7)
    assert fourier_part(f, l, None) == pytest.approx(weighted_l2_norm(f, l), rel=1e-8)


def test_fourier_part_homogeneous_and_parity_invariant():
    spec = basis_spec(4)
    f = _random(spec, 11)
    base = fourier_part(f, -0.5, MID)
    assert fourier_part(HermiteCoeffs(spec, 3.0 * f.coeffs), -0.5, MID) == pytest.approx(3 * base, rel=1e-12)
    assert fourier_part(HermiteCoeffs(spec, -f.coeffs), -0.5, MID) == pytest.approx(base, rel=1e-12)
    parity = (-1.0) ** spec.degrees  # psi_a(-v) = (-1)^{|a|} psi_a(v)
    assert fourier_part(HermiteCoeffs(spec, parity * f.coeffs), -0.5, MID) == pytest.approx(base, rel=1e-8)


def test_aniso_part_radial_and_single_band():
    spec = basis_spec(2)
    radial = HermiteCoeffs(spec, np.where([tuple(a) in {(0, 0, 0), (2, 0, 0), (0, 2, 0), (0, 0, 2)}
                                           for a in spec.alphas], 1.0, 0.0))
    assert aniso_part(radial, 0.5, MID) == pytest.approx(weighted_l2_norm(radial, 0.5), rel=1e-10)
    v3 = mode(spec, (0, 0, 1))
    assert aniso_part(v3, 0.5, MID) == pytest.approx(w_eps(MID, math.sqrt(2)) * weighted_l2_norm(v3, 0.5),
                                                     rel=1e-10)


def test_aniso_part_eps_independent_on_low_band():
    f = _random(basis_spec(4), 5)  # bands l <= 4, sqrt(20) < 1/(2 eps) for eps <= 0.1
    assert aniso_part(f, -0.5, MID) == pytest.approx(aniso_part(f, -0.5, SMALL), rel=1e-12)


def test_grams_reproduce_norms():
    spec = basis_spec(4)
    f = _random(spec, 2)
    c = f.coeffs
    assert math.sqrt(c @ phase_gram(spec, -0.5, MID) @ c) == pytest.approx(phase_part(f, -0.5, MID), rel=1e-10)
    assert math.sqrt(c @ aniso_gram(spec, -0.5, MID) @ c) == pytest.approx(aniso_part(f, -0.5, MID), rel=1e-10)
    assert math.sqrt(c @ fourier_gram(spec, -0.5, MID) @ c) == pytest.approx(fourier_part(f, -0.5, MID),
                                                                              rel=1e-8)
    parts = triple_gram(spec, -0.5, MID)
    b = triple_norm(f, -0.5, MID)
    assert c @ parts["total"] @ c == pytest.approx(b.total ** 2, rel=1e-8)
    assert b.total ** 2 == pytest.approx(b.aniso_part ** 2 + b.fourier_part ** 2 + b.phase_part ** 2)
    assert b.total >= b.phase_part


def test_fourier_gram_hermite_cross_check():
    spec = basis_spec(4)
    a = fourier_gram(spec, 0.0, MID)
    b = fourier_gram_hermite(spec, MID)
    assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(a))


def test_grid_grows_with_degree():
    assert grid_for(6).half_width < grid_for(8).half_width < grid_for(12).half_width


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(-3.0, 3.0))
def test_triple_parts_are_seminorms(seed, scale):
    spec = basis_spec(3)
    parts = triple_gram(spec, -0.5, MID)
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, spec.dim))
    for name in ("aniso", "fourier", "phase"):
        M = parts[name]
        n = lambda c: math.sqrt(max(c @ M @ c, 0.0))
        assert n(scale * x) == pytest.approx(abs(scale) * n(x), rel=1e-10, abs=1e-14)
        assert n(x + y) <= n(x) + n(y) + 1e-12


def test_sobolev_norm_of_constant_mode():
    one = mode(basis_spec(2), (0, 0, 0))
    assert sobolev_norm(one, 0, 0.0) == pytest.approx(1.0, rel=1e-10)
    assert sobolev_norm(one, 1, 0.0) == pytest.approx(2.5, rel=1e-10)


def test_derivative_matrices_match_quadrature(rng):
    from grazelab.hermite import evaluate, evaluate_grad

    spec = basis_spec(3)
    f = HermiteCoeffs(spec, rng.normal(size=spec.dim))
    big = basis_spec(4)
    v = rng.normal(size=(10, 3))
    g = evaluate_grad(f, v)
    for i, D in enumerate(derivative_matrices(spec)):
        assert np.allclose(evaluate(HermiteCoeffs(big, D @ f.coeffs), v), g[:, i], atol=1e-12)


def test_n_functional_matches_matrix_form():
    spec = basis_spec(2)
    f = _random(spec, 9)
    one = mode(spec, (0, 0, 0))
    assert n_functional(f, HermiteCoeffs(spec, np.zeros(spec.dim)), MID) == 0.0
    val = n_functional(f, one, MID)
    assert val > 0.0
    assert val == pytest.approx(float(f.coeffs @ n_matrix(spec, MID) @ f.coeffs), rel=1e-2)
