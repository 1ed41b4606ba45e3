import math

import numpy as np
import pytest
from scipy import special
from hypothesis import given, settings
from hypothesis import strategies as st

from grazelab.hermite import (DegreeTooLow, HermiteCoeffs, basis_polys, basis_spec, collision_invariant_coeffs,
                              evaluate, evaluate_grad, evaluate_hess, mode, project_P, projection_matrix,
                              transport_matrices)
from grazelab.params import sqrt_maxwellian
from grazelab.quadrature import build_gauss_hermite


@pytest.mark.parametrize("K", [0, 2, 4, 8, 12])
def test_index_bookkeeping(K):
    spec = basis_spec(K)
    assert spec.dim == math.comb(K + 3, 3)
    assert len({tuple(a) for a in spec.alphas}) == spec.dim
    assert spec.degrees.max() == K
    for i, a in enumerate(spec.alphas):
        assert spec.index[tuple(int(c) for c in a)] == i


def test_constant_mode_is_sqrt_maxwellian(rng):
    v = rng.normal(size=(20, 3))
    assert np.allclose(evaluate(mode(basis_spec(4), (0, 0, 0)), v), sqrt_maxwellian(v), rtol=1e-14)


def test_orthonormal_up_to_degree_four():
    spec = basis_spec(4)
    rule = build_gauss_hermite(degree=8)
    P = basis_polys(spec, rule.nodes)
    G = (P * rule.weights[:, None]).T @ P
    assert np.allclose(G, np.eye(spec.dim), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_coefficient_norm_is_function_norm(seed):
    spec = basis_spec(5)
    c = np.random.default_rng(seed).normal(size=spec.dim)
    rule = build_gauss_hermite(degree=10)
    vals = basis_polys(spec, rule.nodes) @ c
    # int (p mu^{1/2})^2 dv = int p^2 mu dv
    assert float(rule.weights @ vals ** 2) == pytest.approx(float(c @ c), rel=1e-10)


def test_gradient_and_hessian_match_finite_differences(rng):
    spec = basis_spec(5)
    f = HermiteCoeffs(spec, rng.normal(size=spec.dim))
    h = 1e-5
    for v in rng.normal(size=(20, 3)):
        fd = np.array([(evaluate(f, v + h * e) - evaluate(f, v - h * e)) / (2 * h) for e in np.eye(3)])
        g = evaluate_grad(f, v)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1e-3)
        fdh = np.array([(evaluate_grad(f, v + h * e) - evaluate_grad(f, v - h * e)) / (2 * h) for e in np.eye(3)])
        H = evaluate_hess(f, v)
        assert np.allclose(H, H.T, atol=1e-14)
        assert np.linalg.norm(H - fdh) <= 1e-6 * max(np.linalg.norm(H), 1e-3)


def test_collision_invariants():
    spec = basis_spec(6)
    E = collision_invariant_coeffs(spec)
    assert np.allclose(E @ E.T, np.eye(5), atol=1e-12)
    assert E[0, spec.index[(0, 0, 0)]] == 1.0
    assert np.all(E[:, spec.degrees == 3] == 0.0)
    with pytest.raises(DegreeTooLow):
        collision_invariant_coeffs(basis_spec(1))


def test_invariants_span_expected_functions(rng):
    spec = basis_spec(4)
    E = collision_invariant_coeffs(spec)
    v = rng.normal(size=(30, 3))
    vals = (basis_polys(spec, v) @ E.T)  # polynomial parts
    target = np.column_stack([np.ones(30), v, np.sum(v * v, axis=1)])
    coef, *_ = np.linalg.lstsq(target, vals, rcond=None)
    assert np.allclose(target @ coef, vals, atol=1e-12)


def test_projection_examples(rng):
    spec = basis_spec(5)
    f = mode(spec, (1, 0, 0))
    assert np.allclose(project_P(f).coeffs, f.coeffs, atol=1e-13)
    assert np.allclose(project_P(mode(spec, (2, 1, 0))).coeffs, 0.0, atol=1e-13)
    g = HermiteCoeffs(spec, rng.normal(size=spec.dim))
    pg = project_P(g)
    assert np.allclose(project_P(pg).coeffs, pg.coeffs, atol=1e-12)
    assert np.allclose(pg.coeffs, projection_matrix(spec) @ g.coeffs, atol=1e-12)


def test_projector_properties():
    P = projection_matrix(basis_spec(6))
    assert np.allclose(P, P.T) and np.allclose(P @ P, P)
    assert np.linalg.matrix_rank(P) == 5


@pytest.mark.parametrize("K", [4, 8, 9])
def test_gaussian_tail_dominance(K, rng):
    # worst unit coefficient vector at a point is the norm of the basis vector there
    spec = basis_spec(K)
    d = rng.normal(size=(500, 3))
    v = 12.0 * d / np.linalg.norm(d, axis=1, keepdims=True)
    worst = np.linalg.norm(basis_polys(spec, v), axis=1) * sqrt_maxwellian(v)
    assert worst.max() < 1e-9


def test_gaussian_tail_worst_case_grows_past_degree_nine():
    v = np.array([[12.0, 0.0, 0.0]])
    worst = [float(np.linalg.norm(basis_polys(basis_spec(K), v)) * sqrt_maxwellian(v)[0]) for K in (9, 10, 12)]
    assert worst[0] < 1e-9 < worst[1] < worst[2] < 1e-7


@pytest.mark.parametrize("K", [2, 4, 6, 8])
def test_transport_matrices(K):
    spec = basis_spec(K)
    V = transport_matrices(spec)
    # each V_j is a direct sum of Hermite Jacobi matrices; the largest has size K + 1
    top = special.roots_hermitenorm(K + 1)[0].max()
    for Vj in V:
        assert np.allclose(Vj, Vj.T)
        assert np.linalg.norm(Vj, 2) == pytest.approx(top, rel=1e-12)
    e0 = mode(spec, (0, 0, 0)).coeffs
    assert np.allclose(V[0] @ e0, mode(spec, (1, 0, 0)).coeffs)


def test_transport_matches_quadrature():
    spec = basis_spec(4)
    rule = build_gauss_hermite(degree=10)
    P = basis_polys(spec, rule.nodes)
    V = transport_matrices(spec)
    for j in range(3):
        Q = (P * (rule.weights * rule.nodes[:, j])[:, None]).T @ P
        # truncation only touches the degree-K boundary block
        low = spec.degrees < spec.K
        assert np.allclose(Q[np.ix_(low, low)], V[j][np.ix_(low, low)], atol=1e-12)


def test_wrong_length_rejected():
    with pytest.raises(ValueError):
        HermiteCoeffs(basis_spec(2), np.zeros(3))
