"""Compare the compiled sphere-sum kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from grazelab import kernels
from grazelab.hermite import basis_spec
from grazelab.params import b_eps, validate_params
from grazelab.quadrature import build_ball_rule, build_sphere_rule


def _best(fn, repeat):
    best, val = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        val = fn()
        best = min(best, time.perf_counter() - t0)
    return best, val


def gamma_case(K=3, seed=0):
    p = validate_params(-1.0, 0.75, 0.1)
    spec = basis_spec(K)
    rng = np.random.default_rng(seed)
    cg, ch = rng.standard_normal(spec.dim), rng.standard_normal(spec.dim)
    sphere = build_sphere_rule(p, panels=10, order=6, n_phi=16)
    wub = sphere.wu * b_eps(p, sphere.u)
    v = np.array([0.3, -0.5, 0.8])
    ball = build_ball_rule(p.gamma, float(np.linalg.norm(v)) + 9.0, 8, 6, 12)
    args = (v, ball.r, ball.omega, ball.weights, sphere.u, wub, sphere.phi, sphere.wphi, spec.alphas, cg, ch, K)
    return args


def diff_case(K=3, n=400, seed=1):
    p = validate_params(-1.0, 0.75, 0.1)
    spec = basis_spec(K)
    rng = np.random.default_rng(seed)
    ch = rng.standard_normal(spec.dim)
    sphere = build_sphere_rule(p, panels=12, order=8, n_phi=16)
    wub = sphere.wu * b_eps(p, sphere.u)
    base = rng.standard_normal((n, 3))
    om = rng.standard_normal((n, 3))
    om /= np.linalg.norm(om, axis=1, keepdims=True)
    r = rng.uniform(0.1, 4.0, n)
    w = rng.uniform(0.0, 1.0, n)
    return (base, om, r, w, sphere.u, wub, sphere.phi, sphere.wphi, spec.alphas, ch, K, 2)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"active backend: {kernels.BACKEND}")
    cases = [("sphere_gamma_sum", kernels.sphere_gamma_sum, gamma_case()),
             ("sphere_gauss_diff_sum", kernels.sphere_gauss_diff_sum, diff_case())]
    print(f"{'kernel':<24}{'compiled [s]':>14}{'numpy [s]':>12}{'speedup':>10}{'rel diff':>12}")
    for name, fn, a in cases:
        tc, vc = _best(lambda: fn(*a), args.repeat)
        tn, vn = _best(lambda: fn(*a, backend="numpy"), args.repeat)
        rel = abs(vc - vn) / max(abs(vn), 1e-300)
        print(f"{name:<24}{tc:>14.4f}{tn:>12.4f}{tn / tc:>10.1f}{rel:>12.2e}")


if __name__ == "__main__":
    main()
