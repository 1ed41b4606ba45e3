"""Command-line entry point: ``grazelab <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 parameter validation failure,
3 numerical acceptance failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as gio
from .params import ConstraintViolation, DomainError, validate_params

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = ("validate", "symbol", "gap", "limit", "decay", "toy", "calibrate-lambda", "constants")

# key -> (parser, default); shared by flags and config files
SCHEMA = {
    "gamma": (float, -1.0),
    "s": (float, 0.75),
    "eps": (str, "0.1"),
    "K": (int, None),
    "landau_lambda": (float, None),
    "lambda": (float, 0.05),
    "q": (float, 0.2),
    "theta": (float, 1.0),
    "mode": (str, "operator"),
    "horizon": (float, 5.0),
    "calibration_eps": (float, 0.01),
    "out": (str, "grazelab-out"),
    "format": (str, "csv"),
    "seed": (int, 7),
    "threads": (int, None),
    "export_matrices": (int, 0),
}

COMMAND_DEFAULT_K = {"validate": 4, "gap": 8, "limit": 6, "decay": 6, "constants": 6}


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


def pmap(cfg, fn, items) -> list:
    """Ordered map over independent tasks on up to --threads workers."""
    items = list(items)
    if cfg["threads"] <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=min(cfg["threads"], len(items))) as ex:
        return list(ex.map(fn, items))


@dataclass
class Result:
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    charts: dict = field(default_factory=dict)   # name -> kwargs for svg_line_chart
    checks: list = field(default_factory=list)   # (name, passed, detail)
    matrices: dict = field(default_factory=dict)  # name -> (entries, label, K)

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append((name, bool(passed), detail))


# ---------------------------------------------------------------- config

def parse_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config line {n}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SCHEMA:
            raise UsageError(f"--config line {n}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value):
    kind = SCHEMA[key][0]
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--{key.replace('_', '-')}: cannot parse {value!r}") from exc


def resolve_config(command: str, flags: dict, config_path=None) -> dict:
    cfg = {k: d for k, (_, d) in SCHEMA.items()}
    if config_path:
        cfg.update({k: _coerce(k, v) for k, v in parse_config_file(config_path).items()})
    cfg.update({k: _coerce(k, v) for k, v in flags.items() if v is not None})
    if cfg["K"] is None:
        cfg["K"] = COMMAND_DEFAULT_K.get(command, 6)
    if cfg["threads"] is None:
        cfg["threads"] = os.cpu_count() or 1
    try:
        cfg["eps_list"] = [float(x) for x in str(cfg["eps"]).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"--eps: cannot parse {cfg['eps']!r}") from exc
    if not cfg["eps_list"]:
        raise UsageError("--eps: empty list")
    formats = {f.strip() for f in str(cfg["format"]).split(",") if f.strip()}
    if not formats <= {"csv", "svg"}:
        raise UsageError(f"--format: unsupported {sorted(formats - {'csv', 'svg'})}")
    cfg["formats"] = sorted(formats | {"csv"})
    if cfg["threads"] < 1:
        raise UsageError("--threads: must be >= 1")
    cfg["command"] = command
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grazelab", description="Grazing-limit collision operator experiments.")
    sub = p.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key = value file; flags override it")
        sp.add_argument("--gamma", default=None)
        sp.add_argument("--s", default=None)
        sp.add_argument("--eps", default=None, help="value or comma-separated list")
        sp.add_argument("--K", default=None)
        sp.add_argument("--landau-lambda", dest="landau_lambda", default=None,
                        help="Landau constant; calibrated when omitted (limit)")
        sp.add_argument("--lambda", dest="lambda", default=None, help="toy decay rate")
        sp.add_argument("--q", default=None)
        sp.add_argument("--theta", default=None)
        sp.add_argument("--mode", default=None, help="limit: operator, matrix, semigroup or all")
        sp.add_argument("--horizon", default=None)
        sp.add_argument("--calibration-eps", dest="calibration_eps", default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", default=None, help="csv, svg or csv,svg")
        sp.add_argument("--seed", default=None)
        sp.add_argument("--threads", default=None)
        sp.add_argument("--export-matrices", dest="export_matrices", default=None)
    return p


# ---------------------------------------------------------------- commands

def _params(cfg, eps=None, **kw):
    return validate_params(cfg["gamma"], cfg["s"], cfg["eps_list"][0] if eps is None else eps, **kw)


def cmd_validate(cfg) -> Result:
    from .hermite import basis_spec
    from .operators import assemble_L_eps
    from .params import lambda_e, symbol_E_closed
    from .quadrature import order2_integral, symbol_E_quadrature

    res = Result()
    rows = []
    for eps in cfg["eps_list"]:
        p = _params(cfg, eps)
        o2 = order2_integral(p)
        rows.append([eps, "order2_integral", o2, 4 * math.pi, abs(o2 / (4 * math.pi) - 1)])
        xi = np.array([1.0, 5.0, 1 / eps, 2 / eps, 5 / eps])
        sym = float(np.max(np.abs(symbol_E_quadrature(p, xi) / symbol_E_closed(p, xi) - 1)))
        rows.append([eps, "symbol_check", sym, 0.0, sym])
        le = lambda_e(p)
        rows.append([eps, "lambda_e", le, 4.0, abs(le / 4 - 1)])
        A = assemble_L_eps(basis_spec(cfg["K"]), p)
        nr = float(np.max(A.null_residuals()))
        rows.append([eps, "null_space_residuals", nr, 0.0, nr])
        tol = {"order2_integral": 1e-8, "symbol_check": 1e-6, "lambda_e": 1e-8, "null_space_residuals": 1e-5}
        for r in rows[-4:]:
            res.check(f"{r[1]}[eps={eps:g}]", r[4] <= tol[r[1]], f"error {r[4]:.3e} <= {tol[r[1]]:.0e}")
    res.tables["validate"] = (["eps", "check", "value", "target", "rel_error"], rows)
    return res


def cmd_symbol(cfg) -> Result:
    from .params import symbol_E_closed
    from .quadrature import symbol_E_quadrature

    res = Result()
    rows, series = [], {}
    for eps in cfg["eps_list"]:
        p = _params(cfg, eps)
        xi = np.unique(np.concatenate([np.geomspace(0.5, 20 / eps, 25), [1.0, 5.0, 1 / eps, 2 / eps, 5 / eps]]))
        quad = symbol_E_quadrature(p, xi)
        closed = symbol_E_closed(p, xi)
        err = np.abs(quad / closed - 1)
        rows += [[eps, x, a, b, e] for x, a, b, e in zip(xi, quad, closed, err)]
        res.check(f"symbol[eps={eps:g}]", err.max() <= 1e-6, f"max rel error {err.max():.3e}")
        series[f"eps={eps:g}"] = (xi, quad)
    res.tables["symbol"] = (["eps", "xi", "quadrature", "closed_form", "rel_error"], rows)
    res.charts["symbol"] = dict(series=series, title="E(xi)", xlabel="|xi|", ylabel="E", logx=True, logy=True)
    return res


def cmd_gap(cfg) -> Result:
    from .hermite import basis_spec
    from .operators import assemble_L_eps
    from .spectra import gap_scan

    res = Result()
    for eps in cfg["eps_list"]:
        _params(cfg, eps)
    lam = cfg["landau_lambda"] if cfg["landau_lambda"] is not None else math.pi
    rep = gap_scan(cfg["gamma"], cfg["s"], cfg["eps_list"], cfg["K"], lam,
                   mapper=lambda fn, xs: pmap(cfg, fn, xs))
    res.tables["gap"] = rep.as_table()
    eps_rows = [r for r in rep.rows if r.eps > 0]
    res.check("gap_positive", all(r.lambda_min_triple > 0 for r in eps_rows), "lambda_min(triple) > 0 for all eps")
    if len(eps_rows) > 1:
        ratio = rep.ratio()
        res.check("gap_uniform", ratio <= 2.0, f"max/min ratio {ratio:.4f} <= 2")
    landau = [r for r in rep.rows if r.eps == 0]
    if landau:
        res.check("landau_gap_positive", landau[0].lambda_min_l2gamma > 0,
                  f"lambda_min = {landau[0].lambda_min_l2gamma:.6g}")
    res.charts["gap"] = dict(series={"triple": ([r.eps for r in eps_rows], [r.lambda_min_triple for r in eps_rows]),
                                     "L2_gamma": ([r.eps for r in eps_rows], [r.lambda_min_l2gamma for r in eps_rows])},
                             title="restricted lambda_min", xlabel="eps", ylabel="lambda_min", logx=True)
    if cfg["export_matrices"]:
        spec = basis_spec(cfg["K"])
        for eps in cfg["eps_list"]:
            A = assemble_L_eps(spec, _params(cfg, eps))
            res.matrices[f"L_eps_{eps:g}"] = (A.entries, A.label, spec.K)
    return res


def cmd_calibrate(cfg) -> Result:
    from .experiments import calibrate_lambda

    res = Result()
    p = _params(cfg)
    cal = calibrate_lambda(p, tol=math.inf)
    rows = [[k, v] for k, v in enumerate(cal.per_pair)] + [["combined", cal.lambda_landau]]
    res.tables["calibrate_lambda"] = (["pair", "lambda_landau"], rows)
    res.check("calibration_spread", cal.spread <= 0.05, f"per-pair spread {cal.spread:.3e} <= 5%")
    return res


def cmd_limit(cfg) -> Result:
    from .experiments import calibrate_lambda, limit_scan

    res = Result()
    for eps in cfg["eps_list"]:
        _params(cfg, eps)
    modes = ("operator", "matrix", "semigroup") if cfg["mode"] == "all" else (cfg["mode"],)
    if any(m not in ("operator", "matrix", "semigroup") for m in modes):
        raise UsageError(f"--mode: unknown mode {cfg['mode']!r}")
    lam = cfg["landau_lambda"]
    if lam is None:
        cal = calibrate_lambda(_params(cfg, cfg["calibration_eps"]), tol=math.inf)
        lam = cal.lambda_landau
        res.tables["calibrate_lambda"] = (["pair", "lambda_landau"],
                                          [[k, v] for k, v in enumerate(cal.per_pair)] + [["combined", lam]])
        res.check("calibration_spread", cal.spread <= 0.05, f"per-pair spread {cal.spread:.3e} <= 5%")
    eps_list = cfg["eps_list"] if len(cfg["eps_list"]) > 1 else [0.2, 0.1, 0.05, 0.025]
    base = _params(cfg, eps_list[0])
    series = {}
    summary_rows = []
    for m in modes:
        rep = limit_scan(m, base, eps_list, lam, K=cfg["K"], horizon=cfg["horizon"])
        res.tables[f"limit_{m}"] = rep.as_table()
        summary_rows.append([m, rep.slope, rep.intercept, rep.r2, lam])
        series[m] = (rep.eps, rep.errors)
        ok = 0.8 <= rep.slope <= 1.2 and rep.r2 >= 0.98
        res.check(f"limit_{m}_rate", ok, f"slope {rep.slope:.4f} in [0.8, 1.2], R^2 {rep.r2:.4f} >= 0.98")
        res.check(f"limit_{m}_monotone", bool(np.all(np.diff(rep.errors) < 0)), "error decreases as eps shrinks")
    res.tables["limit_fit"] = (["mode", "slope", "intercept", "r2", "lambda_landau"], summary_rows)
    res.charts["limit"] = dict(series=series, title="eps model vs Landau model", xlabel="eps", ylabel="error",
                               logx=True, logy=True)
    return res


def cmd_decay(cfg) -> Result:
    from .dynamics import default_initial, evolve, geometric_times
    from .hermite import basis_spec, collision_invariant_coeffs
    from .operators import assemble_L_eps
    from .spectra import restricted_min_eig

    res = Result()
    spec = basis_spec(cfg["K"])
    f0 = default_initial(spec)
    E = collision_invariant_coeffs(spec)
    times = geometric_times(1e-2, cfg["horizon"])
    rows, rates, series = [], [], {}
    for eps in cfg["eps_list"]:
        p = _params(cfg, eps)
        A = assemble_L_eps(spec, p)
        tr = evolve(A, f0, times)
        rows += [[eps, t, n] for t, n in zip(tr.times, tr.norms)]
        lam_min = restricted_min_eig(A, np.eye(spec.dim), E)[0]
        early = tr.times <= 0.5 * min(cfg["horizon"], 1.0)
        rate = -np.polyfit(tr.times[early], np.log(tr.norms[early]), 1)[0]
        rates.append([eps, spec.K, rate, lam_min])
        series[f"eps={eps:g}"] = (tr.times[1:], tr.norms[1:])
        res.check(f"decay_monotone[eps={eps:g}]", bool(np.all(np.diff(tr.norms) <= 1e-10)), "norm non-increasing")
    res.tables["decay_trace"] = (["eps", "t", "norm"], rows)
    res.tables["decay_rates"] = (["eps", "K", "early_rate", "lambda_min_l2"], rates)
    res.charts["decay"] = dict(series=series, title="truncated Galerkin decay (k = 0)", xlabel="t",
                               ylabel="||f(t)||", logx=True, logy=True)
    return res


def cmd_toy(cfg) -> Result:
    from .experiments import toy_run

    res = Result()
    lam, q, theta = cfg["lambda"], cfg["q"], cfg["theta"]
    if not q > 2 * lam:
        raise ValidationFailure(f"q > 2 lambda required (q = {q:g}, lambda = {lam:g})")
    if not 0 < theta <= 2:
        raise ValidationFailure("theta must lie in (0, 2]")
    rows, fits, series = [], [], {}
    params = [_params(cfg, eps) for eps in cfg["eps_list"]]
    runs = pmap(cfg, lambda p: toy_run(p, lam, q, theta), params)
    for eps, run in zip(cfg["eps_list"], runs):
        logn = run.trace.initial["log_norms"]
        rows += [[eps, t, math.exp(v), v] for t, v in zip(run.trace.times, logn)]
        f = run.fit
        T = run.schedule.t_eps
        fits.append([eps, T, run.schedule.kappa, f.lambda_fit, f.kappa_fit, f.transition_estimate,
                     f.residuals["early"], f.residuals["late"]])
        series[f"eps={eps:g}"] = (run.trace.times[1:], np.exp(logn[1:] - logn[0]))
        res.check(f"toy_lambda[eps={eps:g}]", abs(f.lambda_fit / lam - 1) <= 0.10,
                  f"lambda_fit {f.lambda_fit:.5g} within 10% of {lam:g}")
        res.check(f"toy_kappa[eps={eps:g}]", abs(f.kappa_fit / run.schedule.kappa - 1) <= 0.05,
                  f"kappa_fit {f.kappa_fit:.5g} within 5% of {run.schedule.kappa:.5g}")
        res.check(f"toy_crossover[eps={eps:g}]", T / 3 <= f.transition_estimate <= 3 * T,
                  f"crossover {f.transition_estimate:.5g} in [{T / 3:.4g}, {3 * T:.4g}]")
    if len(runs) > 1:
        shift = runs[-1].fit.transition_estimate / runs[0].fit.transition_estimate
        pred = runs[-1].schedule.t_eps / runs[0].schedule.t_eps
        res.check("toy_crossover_shift", 0.5 * pred <= shift <= 2.0 * pred,
                  f"shift {shift:.4g} vs predicted {pred:.4g}")
    res.tables["toy_trace"] = (["eps", "t", "norm", "log_norm"], rows)
    res.tables["toy_fit"] = (["eps", "t_eps", "kappa", "lambda_fit", "kappa_fit", "transition_estimate",
                              "early_rms", "late_rms"], fits)
    res.charts["toy"] = dict(series=series, title="toy model N(t)/N(0)", xlabel="t", ylabel="N/N0",
                             logx=True, logy=True)
    return res


def cmd_constants(cfg) -> Result:
    from .experiments import constants_spread, empirical_constants

    res = Result()
    for eps in cfg["eps_list"]:
        _params(cfg, eps)
    Ks = sorted({cfg["K"], 8} if cfg["K"] < 8 else {cfg["K"]})
    rows = empirical_constants(cfg["gamma"], cfg["s"], cfg["eps_list"], tuple(Ks), seed=cfg["seed"])
    res.tables["constants"] = (["K", "eps", "coercivity", "upper", "trilinear"],
                               [[r.K, r.eps, r.coercivity, r.upper, r.trilinear] for r in rows])
    for name, spread in constants_spread(rows).items():
        res.check(f"constant_{name}_stable", spread <= 1.5, f"max/min {spread:.4f} <= 1.5")
    return res


HANDLERS = {"validate": cmd_validate, "symbol": cmd_symbol, "gap": cmd_gap, "limit": cmd_limit,
            "decay": cmd_decay, "toy": cmd_toy, "calibrate-lambda": cmd_calibrate, "constants": cmd_constants}


# ---------------------------------------------------------------- driver

def _emit(cfg, res: Result) -> None:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in res.tables.items():
        gio.write_csv(out / f"{name}.csv", header, rows)
        for row in rows:
            print(name + ": " + ", ".join(f"{h}={gio.format_value(v)}" for h, v in zip(header, row)))
    if "svg" in cfg["formats"]:
        for name, kw in res.charts.items():
            gio.write_svg(out / f"{name}.svg", **kw)
    for name, (A, label, K) in res.matrices.items():
        gio.write_matrix(out / f"{name}.glopmat", A, label, K)
        if A.shape[0] <= 64:
            gio.write_matrix_csv(out / f"{name}_matrix.csv", A)
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in res.checks]
    gio.write_summary(out, lines)
    manifest = {k: v for k, v in cfg.items() if k not in ("threads",)}
    manifest["rng"] = {"generator": "numpy.random.PCG64", "seed": cfg["seed"]}
    gio.write_manifest(out, manifest)
    for line in lines:
        print(line)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = resolve_config(args.command, flags, args.config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    from threadpoolctl import threadpool_limits

    try:
        # each task runs single-threaded so results do not depend on --threads
        with threadpool_limits(limits=1):
            res = HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConstraintViolation, DomainError, ValidationFailure) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(cfg, res)
    return EXIT_OK if all(ok for _, ok, _ in res.checks) else EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
