import math

import numpy as np
import pytest

from grazelab.experiments import (CalibrationUnstable, b_lower_bound_sweep, calibrate_lambda, constants_spread,
                                  empirical_constants, generate_test_pairs, limit_scan, load_test_pairs,
                                  loglog_fit, pair_moments, toy_initial_norm_oracle, toy_log_norm, toy_run,
                                  write_test_pairs)
from grazelab.params import ModelParams, kappa, t_eps, validate_params


def test_published_pairs_match_generator(tmp_path):
    pub = load_test_pairs()
    gen = generate_test_pairs()
    assert len(pub) == 3
    for (g0, h0), (g1, h1) in zip(pub, gen):
        assert np.array_equal(g0.coeffs, g1.coeffs) and np.array_equal(h0.coeffs, h1.coeffs)
        assert np.linalg.norm(g0.coeffs) == pytest.approx(1.0) and g0.spec.K == 3
    path = tmp_path / "pairs.csv"
    write_test_pairs(path, gen)
    again = load_test_pairs(path)
    assert all(np.array_equal(a.coeffs, b.coeffs) for p, q in zip(again, gen) for a, b in zip(p, q))


def test_loglog_fit_exact_power():
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    rep = loglog_fit(eps, 3.0 * eps ** 1.5)
    assert rep.slope == pytest.approx(1.5) and rep.r2 == pytest.approx(1.0)
    assert rep.intercept == pytest.approx(math.log(3.0))
    with pytest.raises(ValueError):
        loglog_fit(eps, -eps)
    with pytest.raises(ValueError):
        loglog_fit(eps[::-1], eps)


@pytest.mark.parametrize("mode", ["matrix", "semigroup"])
def test_limit_errors_shrink_with_eps(mode):
    p = validate_params(-1.0, 0.75, 0.2)
    rep = limit_scan(mode, p, lambda_landau=math.pi, K=4)
    assert np.all(np.diff(rep.errors) < 0)
    assert rep.meta["K"] == 4


def test_limit_operator_mode_with_small_rule():
    p = validate_params(-1.0, 0.75, 0.2)
    g = load_test_pairs()[0][0]
    m = pair_moments(g, g, p.gamma, n_axis=3)
    rep = limit_scan("operator", p, lambda_landau=math.pi, moments=m)
    assert np.all(np.diff(rep.errors) < 0)
    with pytest.raises(ValueError):
        limit_scan("bogus", p)


@pytest.fixture(scope="module")
def small_moments():
    gamma = -1.0
    return [pair_moments(g, h, gamma, n_axis=3) for g, h in load_test_pairs()]


@pytest.mark.slow
def test_calibration_properties(small_moments):
    p = validate_params(-1.0, 0.75, 1e-2)
    a = calibrate_lambda(p, n_axis=3, moments=small_moments)
    assert a.spread <= 0.05
    b = calibrate_lambda(p.with_eps(3e-3), n_axis=3, moments=small_moments)
    assert abs(b.lambda_landau / a.lambda_landau - 1) <= 0.02
    doubled = ModelParams(p.gamma, p.s, p.eps, p.lambda_landau, 2.0)
    c = calibrate_lambda(doubled, n_axis=3, moments=small_moments)
    assert c.lambda_landau == pytest.approx(2 * a.lambda_landau, rel=1e-12)


def test_calibration_preconditions():
    p = validate_params(-1.0, 0.75, 0.1)
    with pytest.raises(ValueError):
        calibrate_lambda(p)
    with pytest.raises(ValueError):
        calibrate_lambda(p.with_eps(1e-2), pairs=load_test_pairs()[:2])
    assert issubclass(CalibrationUnstable, RuntimeError)


def test_toy_initial_norm_against_extended_precision():
    p = validate_params(-2.0, 0.75, 0.1)
    ref = toy_initial_norm_oracle(0.2, 1.0)
    assert math.exp(toy_log_norm(p, 0.05, 0.2, 1.0, 0.0)) == pytest.approx(ref, rel=1e-12)


def test_toy_norm_decreasing_and_log_convex():
    p = validate_params(-2.0, 0.75, 0.1)
    t = np.geomspace(0.1, 500.0, 40)
    run = toy_run(p, times=t, fit=False)
    logn = run.trace.initial["log_norms"]
    assert np.all(np.diff(logn) < 0)
    # second divided differences on the nonuniform grid
    d1 = np.diff(logn) / np.diff(t)
    d2 = np.diff(d1) / (t[2:] - t[:-2])
    assert np.all(d2 >= -1e-12)


def test_toy_requires_q_above_two_lambda():
    with pytest.raises(ValueError):
        toy_run(validate_params(-2.0, 0.75, 0.1), lam=0.1, q=0.2)


@pytest.mark.parametrize("eps", [0.3, 0.1, 0.03])
def test_b_lower_bound_sweep_has_no_failures(eps):
    res = b_lower_bound_sweep(validate_params(-2.0, 0.75, eps))
    assert res["failures"] == 0 and res["checked"] > 10000 and res["min_ratio"] >= 1.0


def test_b_lower_bound_at_rest_and_branch_meeting():
    p = validate_params(-2.0, 0.75, 0.1)
    t = np.geomspace(1e-3, 1e3, 31)
    res = b_lower_bound_sweep(p, t_grid=t, v_grid=[0.0])
    assert res["failures"] == 0
    T = t_eps(p)
    assert (T / p.eps ** (2 * (1 - p.s))) ** kappa(p) == pytest.approx(T, rel=1e-12)


def test_empirical_constants_structure():
    rows = empirical_constants(-1.0, 0.75, eps_list=(0.3, 0.1), K_list=(3,), n_f=10, n_triples=10)
    assert [(r.K, r.eps) for r in rows] == [(3, 0.3), (3, 0.1)]
    assert all(r.coercivity > 0 and r.upper > 0 and r.trilinear > 0 for r in rows)
    spread = constants_spread(rows)
    assert set(spread) == {"coercivity", "upper", "trilinear"} and all(v >= 1.0 for v in spread.values())
