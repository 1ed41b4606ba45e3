import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grazelab.hermite import basis_spec, collision_invariant_coeffs
from grazelab.operators import assemble_L_eps
from grazelab.params import validate_params
from grazelab.spectra import (GapReport, GapRow, deflation_residual, gap_scan, gram_matrix, maxwell_eigenvalue,
                              maxwell_gap, maxwell_spectrum, micro_basis, restricted_min_eig, restricted_spectrum)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_restricted_min_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, k = 12, 3
    X = rng.normal(size=(n, n))
    A = X @ X.T
    Y = rng.normal(size=(n, n))
    M = Y @ Y.T + n * np.eye(n)
    E = rng.normal(size=(k, n))
    lam, x = restricted_min_eig(A, M, E)
    assert x @ M @ x == pytest.approx(1.0, rel=1e-10)
    assert deflation_residual(x, M, E) <= 1e-10 * np.max(np.abs(E @ M))
    assert x @ A @ x == pytest.approx(lam, rel=1e-9, abs=1e-12)
    # every admissible direction has a larger Rayleigh quotient
    Z = micro_basis(M, E)
    for y in rng.normal(size=(20, Z.shape[1])):
        z = Z @ y
        assert (z @ A @ z) / (z @ M @ z) >= lam * (1 - 1e-10) - 1e-12


def test_gram_kinds():
    spec = basis_spec(3)
    p = validate_params(-1.0, 0.75, 0.1)
    I, info = gram_matrix("l2", spec, p)
    assert np.array_equal(I, np.eye(spec.dim)) and not info["repaired"]
    Mg, _ = gram_matrix("l2_gamma", spec, p)
    Mt, _ = gram_matrix("triple", spec, p)
    # <v>^{-1} <= 1 and the triple norm dominates the weighted L^2 norm
    assert np.linalg.eigvalsh(np.eye(spec.dim) - Mg).min() >= -1e-12
    assert np.linalg.eigvalsh(Mt - Mg).min() >= -1e-10
    with pytest.raises(ValueError):
        gram_matrix("h1", spec, p)


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
def test_maxwell_spectrum_matches_matrix(s):
    K = 6
    spec = basis_spec(K)
    p = validate_params(0.0, s, 0.1)
    w = np.linalg.eigvalsh(assemble_L_eps(spec, p).entries)
    oracle = np.sort(np.concatenate([[lam] * m for lam, _, _, m in maxwell_spectrum(p, K)]))
    assert w.size == oracle.size
    assert np.allclose(w, oracle, atol=1e-9 * np.max(np.abs(oracle)))


def test_maxwell_invariants_are_zero_modes():
    p = validate_params(0.0, 0.75, 0.1)
    for n, l in [(0, 0), (0, 1), (1, 0)]:
        assert abs(maxwell_eigenvalue(p, n, l)) < 1e-10
    assert maxwell_eigenvalue(p, 0, 2) > 0


def test_maxwell_gap_ordering():
    p = validate_params(0.0, 0.75, 0.1)
    gap = maxwell_gap(p, 8)
    assert gap == pytest.approx(min(maxwell_eigenvalue(p, 1, 1), maxwell_eigenvalue(p, 2, 0)), rel=1e-12)
    # the two lowest nonzero modes coincide
    assert maxwell_eigenvalue(p, 1, 1) == pytest.approx(maxwell_eigenvalue(p, 2, 0), rel=1e-10)


def test_restricted_spectrum_drops_invariants():
    spec = basis_spec(4)
    p = validate_params(-1.0, 0.75, 0.1)
    A = assemble_L_eps(spec, p)
    E = collision_invariant_coeffs(spec)
    full = np.linalg.eigvalsh(A.entries)
    micro = restricted_spectrum(A, np.eye(spec.dim), E)
    assert micro.size == spec.dim - 5
    assert np.allclose(np.sort(full)[5:], micro, rtol=1e-8)


def test_gap_scan_small():
    rep = gap_scan(-1.0, 0.75, [0.3, 0.1], K=4)
    assert [r.eps for r in rep.rows] == [0.3, 0.1, 0.0]
    assert all(r.lambda_min_triple > 0 and r.lambda_min_l2gamma > 0 for r in rep.rows)
    assert rep.ratio() >= 1.0
    header, rows = rep.as_table()
    assert header[0] == "eps" and len(rows) == 3


def test_gap_scan_mapper_does_not_change_results():
    from concurrent.futures import ThreadPoolExecutor

    a = gap_scan(-1.0, 0.75, [0.3, 0.1], K=3, include_landau=False)
    with ThreadPoolExecutor(2) as ex:
        b = gap_scan(-1.0, 0.75, [0.3, 0.1], K=3, include_landau=False, mapper=ex.map)
    assert a.as_table() == b.as_table()


def test_gap_report_ratio_ignores_landau_row():
    rep = GapReport(-1.0, 0.75, 4, [GapRow(0.3, 1.0, 2.0, 4, 0.0), GapRow(0.1, 1.0, 3.0, 4, 0.0),
                                    GapRow(0.0, 1.0, 100.0, 4, 0.0)])
    assert rep.ratio() == pytest.approx(1.5)
