"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from grazelab import cli
from grazelab.experiments import (b_lower_bound_sweep, calibrate_lambda, constants_spread, empirical_constants,
                                  limit_scan, toy_run)
from grazelab.hermite import basis_spec, collision_invariant_coeffs
from grazelab.operators import assemble_L_eps, assemble_L_landau
from grazelab.params import lambda_e, symbol_E_closed, validate_params
from grazelab.quadrature import order2_integral, symbol_E_quadrature
from grazelab.spectra import gap_scan, restricted_min_eig

EPS_GRID = (0.3, 0.1, 0.03)
S_GRID = (0.6, 0.75, 0.9)

pytestmark = pytest.mark.slow


def _micro_min(A, spec):
    return restricted_min_eig(A, np.eye(spec.dim), collision_invariant_coeffs(spec))[0]


def test_01_angular_identity(record_criterion):
    t0 = time.perf_counter()
    worst = max(abs(order2_integral(validate_params(-1.0, s, e)) / (4 * math.pi) - 1)
                for e in EPS_GRID for s in S_GRID)
    dt = time.perf_counter() - t0
    ok = record_criterion(1, "angular identity", worst <= 1e-8 and dt < 1.0,
                          f"max rel error {worst:.2e} <= 1e-8, runtime {dt:.2f} s < 1 s")
    assert ok


def test_02_symbol_closed_form(record_criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for e in EPS_GRID:
        for s in S_GRID:
            p = validate_params(-1.0, s, e)
            xi = np.array([1.0, 5.0, 1 / e, 2 / e, 5 / e])
            worst = max(worst, float(np.max(np.abs(symbol_E_quadrature(p, xi) / symbol_E_closed(p, xi) - 1))))
    dt = time.perf_counter() - t0
    ok = record_criterion(2, "symbol closed form", worst <= 1e-6 and dt < 1.0,
                          f"max rel error {worst:.2e} <= 1e-6, runtime {dt:.2f} s < 1 s")
    assert ok


def test_03_lambda_e_invariance(record_criterion):
    t0 = time.perf_counter()
    worst = max(abs(lambda_e(validate_params(-1.0, s, e)) - 4.0)
                for e in EPS_GRID + (0.01,) for s in S_GRID)
    dt = time.perf_counter() - t0
    ok = record_criterion(3, "lambda_e invariance", worst <= 1e-8 and dt < 1.0,
                          f"max |lambda_e - 4| {worst:.2e} <= 1e-8, runtime {dt:.2f} s < 1 s")
    assert ok


def test_04_operator_structure(record_criterion):
    spec = basis_spec(8)
    t0 = time.perf_counter()
    A = assemble_L_eps(spec, validate_params(-1.0, 0.75, 0.1))
    dt = time.perf_counter() - t0
    asym = A.meta["asymmetry"]
    null = float(np.max(A.null_residuals()))
    lam = _micro_min(A, spec)
    slack = -1e-6 * np.linalg.norm(A.entries)
    ok = asym <= 1e-6 and null <= 1e-5 and lam >= slack and dt <= 600
    ok = record_criterion(4, "operator structure", ok,
                          f"asymmetry {asym:.1e}, null residual {null:.1e}, micro lambda_min {lam:.4g}, "
                          f"assembly {dt:.1f} s")
    assert ok


def test_05_maxwell_cross_check(record_criterion):
    spec = basis_spec(8)
    A = assemble_L_eps(spec, validate_params(0.0, 0.75, 0.1))
    w = np.linalg.eigvalsh(A.entries)
    nonzero = w[w > 1e-8 * np.max(np.abs(w))]
    lam = float(nonzero.min())
    ok = record_criterion(5, "Maxwell cross-check", abs(lam / 4.0 - 1) <= 0.10,
                          f"smallest nonzero eigenvalue {lam:.5g} vs lambda_e = 4 (10% band)")
    assert ok


def test_06_gap_uniformity(record_criterion):
    t0 = time.perf_counter()
    rep = gap_scan(-1.0, 0.75, [0.3, 0.1, 0.03, 0.01], K=8, include_landau=False)
    dt = time.perf_counter() - t0
    vals = [r.lambda_min_triple for r in rep.rows]
    ratio = rep.ratio()
    ok = min(vals) > 0 and ratio <= 2.0 and dt <= 3600
    ok = record_criterion(6, "gap uniformity", ok,
                          f"triple-norm lambda_min {min(vals):.4g}..{max(vals):.4g}, ratio {ratio:.4f} <= 2, "
                          f"runtime {dt:.0f} s")
    assert ok


def test_07_landau_gap(record_criterion):
    spec = basis_spec(8)
    A = assemble_L_landau(spec, validate_params(-2.0, 0.75, 0.1))
    w = np.linalg.eigvalsh(A.entries)
    psd = w.min() >= -1e-10 * np.linalg.norm(A.entries)
    null = float(np.max(A.null_residuals()))
    lam = _micro_min(A, spec)
    ok = bool(psd) and null <= 1e-12 and lam > 0
    ok = record_criterion(7, "Landau gap", ok,
                          f"min eigenvalue {w.min():.1e}, null residual {null:.1e}, micro lambda_min {lam:.4g} > 0")
    assert ok


def test_08_grazing_limit_rate(record_criterion):
    base = validate_params(-1.0, 0.75, 0.2)
    cal = calibrate_lambda(base.with_eps(1e-2), tol=math.inf)
    op = limit_scan("operator", base, lambda_landau=cal.lambda_landau)
    sg = limit_scan("semigroup", base, lambda_landau=cal.lambda_landau, horizon=5.0)
    in_band = lambda r: 0.8 <= r.slope <= 1.2 and r.r2 >= 0.98
    ok = cal.spread <= 0.05 and in_band(op) and in_band(sg)
    ok = record_criterion(8, "grazing-limit rate", ok,
                          f"Lambda {cal.lambda_landau:.5g} (spread {cal.spread:.2%}); operator slope "
                          f"{op.slope:.3f} R2 {op.r2:.4f}; semigroup slope {sg.slope:.3f} R2 {sg.r2:.4f}; "
                          f"band [0.8, 1.2]")
    assert ok


def test_09_decay_transition(record_criterion):
    t0 = time.perf_counter()
    lam, q = 0.05, 0.2
    a = toy_run(validate_params(-2.0, 0.75, 0.1), lam, q)
    b = toy_run(validate_params(-2.0, 0.75, 0.01), lam, q)
    dt = time.perf_counter() - t0
    T = a.schedule.t_eps
    fa = a.fit
    shift = b.fit.transition_estimate / fa.transition_estimate
    checks = {
        "lambda": abs(fa.lambda_fit / lam - 1) <= 0.10,
        "kappa": abs(fa.kappa_fit / a.schedule.kappa - 1) <= 0.05,
        "crossover": T / 3 <= fa.transition_estimate <= 3 * T,
        "shift": 5.0 <= shift <= 20.0,
        "runtime": dt < 60.0,
    }
    failed = [k for k, v in checks.items() if not v]
    ok = record_criterion(9, "decay transition", not failed,
                          f"lambda_fit {fa.lambda_fit:.4g}, kappa_fit {fa.kappa_fit:.4g} (target 0.6667), "
                          f"crossover {fa.transition_estimate:.4g} in [{T / 3:.3g}, {3 * T:.3g}], shift {shift:.3g} "
                          f"in [5, 20], runtime {dt:.1f} s" + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert ok


def test_10_envelope_inequality(record_criterion):
    results = [b_lower_bound_sweep(validate_params(-2.0, 0.75, e)) for e in EPS_GRID]
    fails = sum(r["failures"] for r in results)
    checked = sum(r["checked"] for r in results)
    ok = record_criterion(10, "envelope inequality", fails == 0,
                          f"{fails} failures over {checked} grid points, min ratio "
                          f"{min(r['min_ratio'] for r in results):.4g}")
    assert ok


def test_11_constant_stability(record_criterion):
    rows = empirical_constants(-1.0, 0.75, EPS_GRID, (6, 8))
    spread = constants_spread(rows)
    ok = record_criterion(11, "empirical-constant stability", max(spread.values()) <= 1.5,
                          ", ".join(f"{k} max/min {v:.3f}" for k, v in spread.items()) + " (limit 1.5)")
    assert ok


def test_12_determinism(record_criterion, tmp_path):
    argsets = {
        "gap": ["gap", "--gamma", "-1", "--s", "0.75", "--eps", "0.3,0.1,0.03", "--K", "6"],
        "toy": ["toy", "--gamma", "-2", "--s", "0.75", "--eps", "0.1,0.01", "--lambda", "0.05", "--q", "0.2"],
    }
    mismatched = []
    for name, args in argsets.items():
        dirs = []
        for threads in (1, 4):
            out = tmp_path / f"{name}-{threads}"
            cli.run(args + ["--threads", str(threads), "--out", str(out)])
            dirs.append(out)
        files = sorted(p.name for p in dirs[0].glob("*.csv"))
        if not files or files != sorted(p.name for p in dirs[1].glob("*.csv")):
            mismatched.append(f"{name}: file sets differ")
            continue
        mismatched += [f"{name}/{f}" for f in files if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes()]
    ok = record_criterion(12, "determinism", not mismatched,
                          "CSVs byte-identical for --threads 1 vs 4 (gap, toy)" if not mismatched
                          else "differing: " + ", ".join(mismatched))
    assert ok
