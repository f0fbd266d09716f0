"""Command-line experiment runner.

    apgnc run <cfg> [--out DIR] [--seed-override N]
    apgnc compare <cfg> [--out DIR] [--seed-override N]
    apgnc check [--full]

Exit codes: 0 success, 1 invariant failure, 2 config error, 3 every run
diverged.
"""

import argparse
import configparser
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import algorithms as alg
from . import svrg
from .checks import run_checks
from .core import DivergenceError
from .diagnostics import fit_linear_rate, format_report
from .problems import (generate_nnpca, load_nnpca, nnpca_objective, quadratic_problem,
                       quartic_problem, random_feasible_point)

CONFIG_HELP = """\
config file: sectioned key=value text

[problem]
  kind        nnpca | quadratic | quartic | file
  n, d        nnpca sample count and dimension (quartic: d only)
  gamma       nnpca regularizer (default 1e-3)
  seed        instance seed (default 0)
  radius      ball radius of the nnpca feasible set, or 'none' for the bare
              orthant (default 1); quartic: start box radius (default 1)
  eigs        quadratic eigenvalues, comma separated
  constraint  quadratic g: nonneg | none (default nonneg)
  path        instance file for kind=file
  x0_scale    norm of the random nonnegative start point (default 0.5);
              quartic runs start from the corner (radius, ..., radius)

[run]
  seeds         comma-separated run seeds (default 0); each seed fixes the
                start point and the solver's random streams
  budget        effective passes per run (required, > 0)
  residual_tol  stopping tolerance of the deterministic solvers (default 0)

[solver.<label>]  one section per solver
  kind        pg | apg | mapg | apgnc | apgnc_plus | inexact_apgnc | prox_svrg |
              svrg_apgnc | svrg_apgnc_plus | inexact_svrg_apgnc (default <label>)
  eta         absolute step size
  eta_scale   step size as a multiple of 1/L (default 0.05; SVRG 1/(8m))
  rho         SVRG step rho/L (must be < 1/2)
  m           SVRG epoch length (default n)
  beta0       adaptive momentum start (default 0.5)
  t_shrink    adaptive momentum factor (default 0.5)
  momentum    override: none | ratio_k | adaptive
  prox_error  none | cubic (1/(100k^3)) | capped_cubic (min(1/(100k^3), 1e-7)) | <float>
  grad_error  gradient error norm, constant (default 0)
  band_floor  lower end of the realized prox gap, fraction of eps (default 0.25)

[output]
  dir         output directory (default out)
"""

TRACE_HEADER = ("solver,seed,k,passes,F_x,F_y,step_norm,residual,beta,"
                "chose_extrapolation,eps_realized,grad_err_realized")

DETERMINISTIC = {
    "pg": (alg.run_proximal_gradient, "none", 1),
    "apg": (alg.run_apg, "nesterov_t", 1),
    "mapg": (alg.run_mapg, "nesterov_t", 2),
    "apgnc": (alg.run_apgnc, "ratio_k", 1),
    "apgnc_plus": (alg.run_apgnc_plus, "adaptive", 1),
    "inexact_apgnc": (alg.run_inexact_apgnc, "ratio_k", 1),
}
STOCHASTIC = {
    "prox_svrg": (svrg.run_prox_svrg, "none"),
    "svrg_apgnc": (svrg.run_svrg_apgnc, "ratio_k"),
    "svrg_apgnc_plus": (svrg.run_svrg_apgnc_plus, "adaptive"),
    "inexact_svrg_apgnc": (svrg.run_inexact_svrg_apgnc, "ratio_k"),
}
SOLVER_KEYS = {"kind", "eta", "eta_scale", "rho", "m", "beta0", "t_shrink", "momentum",
               "prox_error", "grad_error", "band_floor"}
PROBLEM_KEYS = {"kind", "n", "d", "gamma", "seed", "radius", "eigs", "constraint", "path",
                "x0_scale"}


class ConfigError(Exception):
    pass


@dataclass
class SolverEntry:
    label: str
    kind: str
    opts: dict


@dataclass
class ExperimentConfig:
    problem: dict
    solvers: list
    budget: float
    seeds: list
    output_dir: str
    residual_tol: float = 0.0
    extra: dict = field(default_factory=dict)


def _num(section, key, value, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {value!r} as {kind.__name__}") from None


def load_config(path):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:1: missing section header") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else 0
        raise ConfigError(f"{path}:{lineno}:1: cannot parse line") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    for sec in cp.sections():
        if sec not in ("problem", "run", "output") and not sec.startswith("solver."):
            raise ConfigError(f"unknown section [{sec}]")
    if not cp.has_section("problem"):
        raise ConfigError("missing [problem] section")
    problem = dict(cp["problem"])
    unknown = set(problem) - PROBLEM_KEYS
    if unknown:
        raise ConfigError(f"[problem] unknown keys: {', '.join(sorted(unknown))}")

    solvers = []
    for sec in cp.sections():
        if not sec.startswith("solver."):
            continue
        label = sec[len("solver."):]
        opts = dict(cp[sec])
        unknown = set(opts) - SOLVER_KEYS
        if unknown:
            raise ConfigError(f"[{sec}] unknown keys: {', '.join(sorted(unknown))}")
        kind = opts.pop("kind", label)
        if kind not in DETERMINISTIC and kind not in STOCHASTIC:
            raise ConfigError(f"[{sec}] unknown solver kind {kind!r}")
        if not label or "," in label or "/" in label:
            raise ConfigError(f"[{sec}] invalid solver label")
        solvers.append(SolverEntry(label, kind, opts))
    if not solvers:
        raise ConfigError("at least one [solver.<name>] section is required")

    run = cp["run"] if cp.has_section("run") else {}
    if "budget" not in run:
        raise ConfigError("[run] budget is required")
    budget = _num("run", "budget", run["budget"])
    if not budget > 0:
        raise ConfigError("[run] budget must be positive")
    seeds = [_num("run", "seeds", s.strip(), int) for s in run.get("seeds", "0").split(",")
             if s.strip()]
    if not seeds or any(s < 0 for s in seeds):
        raise ConfigError("[run] seeds must be non-negative integers")
    tol = _num("run", "residual_tol", run.get("residual_tol", "0"))
    out = cp["output"].get("dir", "out") if cp.has_section("output") else "out"
    return ExperimentConfig(problem, solvers, budget, seeds, out, tol)


def build_problem(p):
    kind = p.get("kind", "nnpca")
    radius_s = p.get("radius", "1")
    if kind == "nnpca":
        radius = None if radius_s.lower() == "none" else _num("problem", "radius", radius_s)
        for key in ("n", "d"):
            if key not in p:
                raise ConfigError(f"[problem] {key} is required for nnpca")
        _, obj = generate_nnpca(_num("problem", "n", p["n"], int), _num("problem", "d", p["d"], int),
                                _num("problem", "gamma", p.get("gamma", "1e-3")),
                                _num("problem", "seed", p.get("seed", "0"), int), radius)
    elif kind == "file":
        if "path" not in p:
            raise ConfigError("[problem] path is required for kind=file")
        radius = None if radius_s.lower() == "none" else _num("problem", "radius", radius_s)
        try:
            obj = nnpca_objective(load_nnpca(p["path"]), radius)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"[problem] {exc}") from None
    elif kind == "quadratic":
        if "eigs" not in p:
            raise ConfigError("[problem] eigs is required for quadratic")
        eigs = [_num("problem", "eigs", e.strip()) for e in p["eigs"].split(",")]
        cons = p.get("constraint", "nonneg")
        if cons not in ("nonneg", "none"):
            raise ConfigError("[problem] constraint must be nonneg or none")
        obj = quadratic_problem(eigs, _num("problem", "seed", p.get("seed", "0"), int),
                                None if cons == "none" else cons)
    elif kind == "quartic":
        obj = quartic_problem(_num("problem", "d", p.get("d", "5"), int),
                              _num("problem", "radius", radius_s))
    else:
        raise ConfigError(f"[problem] unknown kind {kind!r}")
    return obj


def start_point(obj, p, seed):
    if obj.name == "quartic":
        return np.full(obj.dim, _num("problem", "radius", p.get("radius", "1")))
    return random_feasible_point(obj.dim, seed, _num("problem", "x0_scale", p.get("x0_scale", "0.5")))


def _error_schedule(entry, value, stochastic):
    if value is None or value == "none":
        return None
    if value == "cubic":
        return (lambda k, t: alg.cubic_prox_error(k + 1)) if stochastic else alg.cubic_prox_error
    if value == "capped_cubic":
        return svrg.capped_cubic_prox_error if stochastic else \
            (lambda k: svrg.capped_cubic_prox_error(k))
    eps = _num(f"solver.{entry.label}", "prox_error", value)
    if eps < 0:
        raise ConfigError(f"[solver.{entry.label}] prox_error must be nonnegative")
    return (lambda k, t: eps) if stochastic else (lambda k: eps)


def _momentum(entry, default):
    o = entry.opts
    sec = f"solver.{entry.label}"
    try:
        return alg.MomentumSchedule(o.get("momentum", default),
                                    _num(sec, "beta0", o.get("beta0", "0.5")),
                                    _num(sec, "t_shrink", o.get("t_shrink", "0.5")))
    except ValueError as exc:
        raise ConfigError(f"[{sec}] {exc}") from None


def run_solver(obj, x0, entry, cfg, seed):
    o = entry.opts
    sec = f"solver.{entry.label}"
    L = obj.lipschitz
    if entry.kind in DETERMINISTIC:
        fn, mom_kind, per_iter = DETERMINISTIC[entry.kind]
        iters = int(math.floor(cfg.budget / per_iter))
        if iters < 1:
            raise ConfigError(f"[{sec}] budget allows no iterations")
        eta = _num(sec, "eta", o["eta"]) if "eta" in o else \
            _num(sec, "eta_scale", o.get("eta_scale", "0.05")) / L
        grad_err = _num(sec, "grad_error", o.get("grad_error", "0"))
        if entry.kind != "inexact_apgnc" and (grad_err or o.get("prox_error", "none") != "none"):
            raise ConfigError(f"[{sec}] error schedules need kind=inexact_apgnc")
        try:
            scfg = alg.SolverConfig(
                eta, _momentum(entry, mom_kind), iters, cfg.residual_tol,
                (lambda k: grad_err) if grad_err else None,
                _error_schedule(entry, o.get("prox_error"), False), seed,
                _num(sec, "band_floor", o.get("band_floor", "0.25")))
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {exc}") from None
        return fn(obj, x0, scfg)
    fn, mom_kind = STOCHASTIC[entry.kind]
    m = _num(sec, "m", o["m"], int) if "m" in o else obj.n_components
    per_epoch = 1.0 + 2.0 * m / obj.n_components
    epochs = int(math.floor(cfg.budget / per_epoch + 1e-12))
    if epochs < 1:
        raise ConfigError(f"[{sec}] budget allows no epochs")
    if "eta" in o:
        eta = _num(sec, "eta", o["eta"])
    elif "eta_scale" in o:
        eta = _num(sec, "eta_scale", o["eta_scale"]) / L
    else:
        eta = None
    rho = _num(sec, "rho", o["rho"]) if "rho" in o else None
    prox_err = o.get("prox_error")
    if entry.kind != "inexact_svrg_apgnc" and prox_err not in (None, "none"):
        raise ConfigError(f"[{sec}] prox errors need kind=inexact_svrg_apgnc")
    try:
        scfg = svrg.SvrgConfig(m, eta, rho, epochs, _momentum(entry, mom_kind),
                               _error_schedule(entry, prox_err, True), seed,
                               _num(sec, "band_floor", o.get("band_floor", "0.25")))
    except ValueError as exc:
        raise ConfigError(f"[{sec}] {exc}") from None
    return fn(obj, x0, scfg)


def _fmt(v):
    return f"{float(v):.17g}"


def trace_csv(trace, label, seed):
    lines = [TRACE_HEADER]
    for r in trace.records:
        lines.append(",".join([
            label, str(seed), str(r.k), _fmt(r.passes), _fmt(r.F_x), _fmt(r.F_y),
            _fmt(r.step_norm), _fmt(r.residual), _fmt(r.beta_used),
            "1" if r.chose_extrapolation else "0", _fmt(r.eps_realized),
            _fmt(r.grad_err_realized)]))
    return "\n".join(lines) + "\n"


def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def execute(cfg):
    """Run every (solver, seed) pair; returns ``(results, summary)``.

    ``results`` maps ``(label, seed)`` to a trace or ``None`` when the run
    diverged.
    """
    obj = build_problem(cfg.problem)
    os.makedirs(cfg.output_dir, exist_ok=True)
    results = {}
    summary = {"problem": obj.name, "dim": obj.dim, "n_components": obj.n_components,
               "lipschitz": obj.lipschitz, "budget": cfg.budget}
    for entry in cfg.solvers:
        for seed in cfg.seeds:
            x0 = start_point(obj, cfg.problem, seed)
            key = f"{entry.label}.seed{seed}"
            try:
                tr = run_solver(obj, x0, entry, cfg, seed)
            except DivergenceError as exc:
                results[(entry.label, seed)] = None
                summary[f"{key}.status"] = "diverged"
                summary[f"{key}.error"] = str(exc).replace("\n", " ").replace("=", ":")
                continue
            results[(entry.label, seed)] = tr
            _write(os.path.join(cfg.output_dir, f"{entry.label}_seed{seed}.csv"),
                   trace_csv(tr, entry.label, seed))
            summary[f"{key}.status"] = "ok"
            summary[f"{key}.solver"] = entry.kind
            summary[f"{key}.iterations"] = len(tr.records)
            summary[f"{key}.passes"] = tr.records[-1].passes
            summary[f"{key}.terminated_by"] = tr.terminated_by
            summary[f"{key}.F0"] = tr.F0
            summary[f"{key}.final_F"] = tr.records[-1].F_x
            summary[f"{key}.final_residual"] = tr.records[-1].residual
    return results, summary


def comparison_table(results, labels, seeds):
    """Step-wise F at every pass checkpoint; mean/min/max over seeds per solver."""
    grid = {0.0}
    for tr in results.values():
        if tr is not None:
            grid.update(r.passes for r in tr.records)
    grid = sorted(grid)
    header = ["passes"] + [f"{lab}_{stat}" for lab in labels for stat in ("mean", "min", "max")]
    rows = [",".join(header)]
    for cp in grid:
        row = [_fmt(cp)]
        for lab in labels:
            vals = []
            for seed in seeds:
                tr = results.get((lab, seed))
                if tr is None:
                    continue
                passes = np.array([r.passes for r in tr.records])
                j = np.searchsorted(passes, cp, side="right") - 1
                vals.append(tr.F0 if j < 0 else tr.records[j].F_x)
            if vals:
                row += [_fmt(np.mean(vals)), _fmt(np.min(vals)), _fmt(np.max(vals))]
            else:
                row += ["nan", "nan", "nan"]
        rows.append(",".join(row))
    return "\n".join(rows) + "\n"


def _exit_for(results):
    return 3 if all(tr is None for tr in results.values()) else 0


def cmd_run(config_path, out=None, seed_override=None):
    try:
        cfg = load_config(config_path)
        if out:
            cfg.output_dir = out
        if seed_override is not None:
            cfg.seeds = [seed_override]
        results, summary = execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _write(os.path.join(cfg.output_dir, "summary.txt"), format_report(summary))
    return _exit_for(results)


def cmd_compare(config_path, out=None, seed_override=None):
    try:
        cfg = load_config(config_path)
        if len(cfg.solvers) < 2:
            raise ConfigError("compare needs at least two solvers")
        if out:
            cfg.output_dir = out
        if seed_override is not None:
            cfg.seeds = [seed_override]
        results, summary = execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    labels = [s.label for s in cfg.solvers]
    _write(os.path.join(cfg.output_dir, "comparison.csv"),
           comparison_table(results, labels, cfg.seeds))
    finals = [tr.records[-1].F_x for tr in results.values() if tr is not None]
    F_ref = min(finals) if finals else float("nan")
    summary["reference_F"] = F_ref
    for (lab, seed), tr in results.items():
        if tr is None:
            continue
        r = tr.column("F_x") - F_ref
        keep = np.flatnonzero(~(r > 100 * np.finfo(float).eps * max(abs(F_ref), 1.0)))
        r = r if keep.size == 0 else r[: keep[0]]
        try:
            fit = fit_linear_rate(r)
            summary[f"{lab}.seed{seed}.rate"] = fit.parameter
            summary[f"{lab}.seed{seed}.rate_r2"] = fit.r_squared
        except ValueError:
            summary[f"{lab}.seed{seed}.rate"] = "nan"
    _write(os.path.join(cfg.output_dir, "summary.txt"), format_report(summary))
    return _exit_for(results)


def cmd_check(level="fast", stream=None):
    stream = stream or sys.stdout
    results = run_checks(level)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=stream)
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} invariants passed", file=stream)
    return 1 if failed else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="apgnc", description="Proximal-gradient-with-momentum experiments.",
        epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run every solver and seed, write trace CSVs"),
                        ("compare", "run and write an aligned comparison table")):
        p = sub.add_parser(name, help=help_, epilog=CONFIG_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--seed-override", type=int, help="replace [run] seeds by this seed")
    pc = sub.add_parser("check", help="run the invariant suite")
    pc.add_argument("--full", action="store_true", help="also run the rate-fit checks")
    args = parser.parse_args(argv)
    if args.command == "check":
        return cmd_check("full" if args.full else "fast")
    if args.seed_override is not None and args.seed_override < 0:
        parser.error("--seed-override must be non-negative")
    fn = cmd_run if args.command == "run" else cmd_compare
    return fn(args.config, args.out, args.seed_override)


if __name__ == "__main__":
    sys.exit(main())
