"""Command-line runner: ``gtsvrg simulate | theory | verify | compare``.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error,
3 divergence, 4 other numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import theory
from .algorithm import RunConfig, run
from .baselines import run_baseline
from .config import (ExperimentConfig, build_problem, build_topology, load_config, methods_list,
                     parse_config, resolve_run)
from .errors import (ConfigError, DivergedError, NumericError, PreconditionError, TopologyError,
                     UsageError)
from .objectives import save_problem
from .topology import save_matrix
from .verify import merge_reports, negative_controls, run_suite

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DIVERGED, EXIT_NUMERIC = 0, 1, 2, 3, 4

# used by `verify` when no --config is given: small enough for exact enumeration
DEFAULT_VERIFY_CONFIG = """
topology.kind = ring
topology.n = 3
problem.family = quadratic
problem.m = 2
problem.p = 2
problem.mu = 1
problem.L = 4
run.alpha = recommended
run.alpha_scale = 20
run.K = 20
run.T = 3
"""


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dumps(obj, indent=None) -> str:
    return json.dumps(obj, sort_keys=True, indent=indent, default=_json_default)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config("")
    if getattr(args, "seed", None) is not None:
        cfg.values["run.seed"] = str(args.seed)
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(os.environ.get("GTSVRG_OUT") or cfg.get("output.dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _setup(cfg: ExperimentConfig):
    mix = build_topology(cfg)
    P = build_problem(cfg, mix.n)
    params, resolved = resolve_run(cfg, P, mix)
    return mix, P, RunConfig(**params), resolved


def _run_method(method: str, P, mix, rc: RunConfig):
    return run(P, mix, rc) if method == "gtsvrg" else run_baseline(method, P, mix, rc)


def _base_summary(P, mix, rc: RunConfig, resolved: dict) -> dict:
    return {
        "problem": {"family": P.family, "n": P.n, "m": list(P.m), "p": P.p, "mu": P.mu,
                    "L": P.ell, "Q": P.Q},
        "topology": {"n": mix.n, "sigma": mix.sigma},
        "resolved": resolved,
        "run": {"alpha": rc.alpha, "K": rc.K, "T": rc.T, "seed": int(rc.seed),
                "record_every": rc.record_every, "target": rc.target},
        "max_step": theory.max_step_size(mix.sigma, P.Q, P.ell),
    }


def cmd_simulate(args) -> int:
    cfg = _load(args)
    mix, P, rc, resolved = _setup(cfg)
    method = cfg.get("run.method")
    if method not in ("gtsvrg", "gt", "dsgd"):
        raise ConfigError(f"unknown run.method {method!r}")
    out = _out_dir(cfg)
    save_problem(P, out / "problem.txt")
    save_matrix(mix, out / "matrix.txt")
    trace = _run_method(method, P, mix, rc)
    trace.to_csv(out / "trace.csv")
    summary = _base_summary(P, mix, rc, resolved)
    summary["method"] = method
    summary["result"] = trace.summary
    (out / "summary.json").write_text(_dumps(summary, indent=2) + "\n")
    if args.json:
        print(_dumps(summary))
    else:
        fin = trace.summary["final"]
        print(f"{method}: {len(trace.records)} trace rows -> {out / 'trace.csv'}")
        print(f"  alpha={rc.alpha:.6g}  K={rc.K}  T={rc.T}  seed={rc.seed}")
        print(f"  final ||xbar - x*|| = {fin['mean_dist_to_opt']:.6g}  grad_evals = {fin['grad_evals']}")
    return EXIT_OK


def _theory_inputs(args):
    if args.config:
        cfg = _load(args)
        mix = build_topology(cfg)
        P = build_problem(cfg, mix.n)
        return mix.sigma, P.Q, P.ell, P.mu, sum(P.m)
    if args.sigma is None or args.Q is None:
        raise ConfigError("theory needs --config or both --sigma and --Q")
    ell = args.L if args.L is not None else args.Q
    return args.sigma, args.Q, ell, ell / args.Q, args.M


_ROWS = [("sigma", "sigma"), ("Q", "Q"), ("L", "L"), ("mu", "mu"),
         ("max_step", "max step (1-s^2)^2/(105QL)"),
         ("recommended_step", "recommended step (1-s^2)^2/(200QL)"),
         ("rho_G", "rho(G) at recommended step"),
         ("rho_G_bound", "bound 1-(1-s^2)^2/(800Q^2)"),
         ("perturbation_gain", "rho((I-G)^-1 H)  [ceiling 0.848]"),
         ("K", "inner loop K"),
         ("rho_outer", "rho(G^K + sum G^r H)"),
         ("predicted_complexity", "predicted complexity (asymptotic)")]


def cmd_theory(args) -> int:
    sigma, Q, ell, mu, M = _theory_inputs(args)
    table = theory.theory_table(sigma, Q, ell, mu, M_data=M, epsilon=args.eps, c=args.c)
    if args.json:
        print(_dumps(table))
        return EXIT_OK
    width = max(len(label) for _, label in _ROWS)
    for key, label in _ROWS:
        if key in table:
            val = table[key]
            text = str(val) if isinstance(val, int) else f"{val:.10g}"
            print(f"{label:<{width}}  {text}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.negative_controls:
        reports = list(negative_controls(args.seed or 0).values())
    else:
        cfg = _load(args) if args.config else parse_config(DEFAULT_VERIFY_CONFIG)
        if not args.config and args.seed is not None:
            cfg.values["run.seed"] = str(args.seed)
        mix, P, rc, _ = _setup(cfg)
        reports = run_suite(P, mix, rc, max_states=cfg.int("verify.max_states"),
                            cap=cfg.int("verify.enum_cap"), mc_trials=cfg.int("verify.mc_trials"))
    reports = merge_reports(reports)
    for r in reports:
        print(r.to_json())
    return EXIT_VERIFY if any(r.failed for r in reports) else EXIT_OK


def _evals_to_target(trace, target: float):
    for r in trace.records:
        if r.mean_dist_to_opt <= target:
            return r.grad_evals
    return None


def cmd_compare(args) -> int:
    cfg = _load(args)
    methods = methods_list(cfg)
    mix, P, rc, resolved = _setup(cfg)
    out = _out_dir(cfg)
    target = rc.target if rc.target is not None else 1e-6
    rows, per_method = [], {}
    for method in methods:
        trace = _run_method(method, P, mix, rc)
        text = trace.to_csv(method=method)
        rows.append(text if not rows else text.split("\n", 1)[1])
        per_method[method] = {
            "grad_evals_to_target": _evals_to_target(trace, target),
            "final_mean_dist_to_opt": trace.records[-1].mean_dist_to_opt,
            "grad_evals": trace.records[-1].grad_evals,
        }
    (out / "compare.csv").write_text("".join(rows))
    summary = _base_summary(P, mix, rc, resolved)
    summary["methods"] = per_method
    summary["target"] = target
    (out / "compare_summary.json").write_text(_dumps(summary, indent=2) + "\n")
    if args.json:
        print(_dumps(summary))
    else:
        for m, info in per_method.items():
            hit = info["grad_evals_to_target"]
            print(f"{m:>7}: final ||xbar - x*|| = {info['final_mean_dist_to_opt']:.4g}, "
                  f"grad evals to {target:g}: {hit if hit is not None else 'not reached'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gtsvrg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="key = value config file")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("simulate", help="run one method and write trace/summary files")
    common(p, config_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("theory", help="print step sizes, spectral radii and K")
    common(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--Q", type=float)
    p.add_argument("--L", type=float, help="smoothness (default Q, i.e. mu = 1)")
    p.add_argument("--M", type=int, help="total data size for the complexity estimate")
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--c", type=float, default=1.0, help="norm-equivalence constant in K")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("verify", help="run every oracle on a fresh run (JSON lines)")
    common(p)
    p.add_argument("--negative-controls", action="store_true",
                   help="run the oracles on corrupted fixtures instead (expected to fail)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="run several methods on one problem")
    common(p, config_required=True)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except DivergedError as exc:
        print(f"gtsvrg: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, UsageError, TopologyError, PreconditionError) as exc:
        print(f"gtsvrg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"gtsvrg: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
