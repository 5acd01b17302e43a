"""Flat ``key = value`` experiment configuration.

One setting per line, ``#`` starts a comment.  Keys (defaults in brackets)::

    topology.kind          ring | path | complete | grid2d | erdos_renyi | file  [ring]
    topology.n             number of nodes                                [4]
    topology.rows, .cols   grid2d shape
    topology.prob          erdos_renyi edge probability
    topology.seed          erdos_renyi seed                               [0]
    topology.file          matrix file when kind = file

    problem.family         quadratic | reglog | file                      [quadratic]
    problem.m              components per node, one value or a comma list [10]
    problem.p              dimension                                      [3]
    problem.mu, problem.L  quadratic curvature range                      [1, 10]
    problem.lam            reglog regularization                          [0.1]
    problem.seed           generator seed                                 [0]
    problem.file           problem file when family = file

    run.method             gtsvrg | gt | dsgd                             [gtsvrg]
    run.methods            comma list for `compare`                       [gtsvrg,gt,dsgd]
    run.alpha              number | recommended | max                     [recommended]
    run.alpha_scale        multiplier applied to a symbolic alpha         [1]
    run.K                  integer | auto                                 [auto]
    run.c                  norm-equivalence constant in K = auto          [1]
    run.T                  outer loops                                    [5]
    run.seed               sampling seed                                  [0]
    run.record_every       inner steps between trace rows                 [K]
    run.target             stop once ||xbar - x*|| <= target
    run.threads            node-parallel threads                          [1]
    run.backend            compiled | python                              [auto]

    verify.max_states      states sampled per oracle                      [40]
    verify.enum_cap        enumeration cap                                [1000000]
    verify.mc_trials       Monte-Carlo trials                             [2000]

    output.dir             output directory                               [out]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from . import theory
from .errors import ConfigError
from .objectives import Problem, load_problem, make_quadratic, make_reglog
from .topology import MixingMatrix, build_graph, load_matrix, metropolis_weights

__all__ = ["ExperimentConfig", "parse_config", "load_config", "build_topology", "build_problem",
           "resolve_run", "KNOWN_KEYS"]

DEFAULTS = {
    "topology.kind": "ring",
    "topology.n": "4",
    "topology.seed": "0",
    "problem.family": "quadratic",
    "problem.m": "10",
    "problem.p": "3",
    "problem.mu": "1",
    "problem.L": "10",
    "problem.lam": "0.1",
    "problem.seed": "0",
    "run.method": "gtsvrg",
    "run.methods": "gtsvrg,gt,dsgd",
    "run.alpha": "recommended",
    "run.alpha_scale": "1",
    "run.K": "auto",
    "run.c": "1",
    "run.T": "5",
    "run.seed": "0",
    "run.threads": "1",
    "verify.max_states": "40",
    "verify.enum_cap": "1000000",
    "verify.mc_trials": "2000",
    "output.dir": "out",
}

KNOWN_KEYS = frozenset(DEFAULTS) | {
    "topology.rows", "topology.cols", "topology.prob", "topology.file", "problem.file",
    "run.record_every", "run.target", "run.backend",
}

METHODS = ("gtsvrg", "gt", "dsgd")


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    source: str | None = None

    def get(self, key: str, default=None):
        return self.values.get(key, DEFAULTS.get(key, default))

    def require(self, key: str) -> str:
        val = self.get(key)
        if val is None:
            raise ConfigError(f"missing required key {key!r}")
        return val

    def int(self, key: str) -> int:
        raw = self.require(key)
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from None

    def float(self, key: str) -> float:
        raw = self.require(key)
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from None
        if not math.isfinite(val):
            raise ConfigError(f"{key} must be finite, got {raw!r}")
        return val

    def resolve_path(self, raw: str) -> Path:
        p = Path(raw)
        if not p.is_absolute() and self.source is not None:
            p = Path(self.source).parent / p
        return p


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source or '<config>'}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source or '<config>'}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source or '<config>'}:{lineno}: duplicate key {key!r}")
        values[key] = val
    return ExperimentConfig(values, source)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def build_topology(cfg: ExperimentConfig) -> MixingMatrix:
    kind = cfg.get("topology.kind")
    if kind == "file":
        return load_matrix(cfg.resolve_path(cfg.require("topology.file")))
    params = {}
    for key in ("rows", "cols"):
        if cfg.get(f"topology.{key}") is not None:
            params[key] = cfg.int(f"topology.{key}")
    if cfg.get("topology.prob") is not None:
        params["prob"] = cfg.float("topology.prob")
    g = build_graph(kind, cfg.int("topology.n"), params, cfg.int("topology.seed"))
    return metropolis_weights(g)


def _parse_m(raw: str, n: int):
    try:
        vals = [int(v) for v in raw.split(",")]
    except ValueError:
        raise ConfigError(f"problem.m must be an integer or comma list, got {raw!r}") from None
    return vals[0] if len(vals) == 1 else vals


def build_problem(cfg: ExperimentConfig, n: int) -> Problem:
    family = cfg.get("problem.family")
    if family == "file":
        P = load_problem(cfg.resolve_path(cfg.require("problem.file")))
        if P.n != n:
            raise ConfigError(f"problem file has {P.n} nodes but the topology has {n}")
        return P
    m = _parse_m(cfg.require("problem.m"), n)
    p = cfg.int("problem.p")
    seed = cfg.int("problem.seed")
    if family == "quadratic":
        return make_quadratic(n, m, p, cfg.float("problem.mu"), cfg.float("problem.L"), seed)
    if family == "reglog":
        return make_reglog(n, m, p, cfg.float("problem.lam"), seed)
    raise ConfigError(f"unknown problem.family {family!r}; expected quadratic, reglog or file")


def resolve_run(cfg: ExperimentConfig, P: Problem, mix: MixingMatrix) -> tuple[dict, dict]:
    """Concrete run parameters plus a record of how symbolic values were resolved."""
    sigma, Q, ell = mix.sigma, P.Q, P.ell
    resolved = {}
    raw_alpha = cfg.get("run.alpha")
    scale = cfg.float("run.alpha_scale")
    if raw_alpha in ("recommended", "max"):
        fn = theory.recommended_step if raw_alpha == "recommended" else theory.max_step_size
        const = 200 if raw_alpha == "recommended" else 105
        alpha = fn(sigma, Q, ell) * scale
        resolved["alpha"] = {"value": alpha, "symbol": raw_alpha, "scale": scale,
                             "formula": f"scale * (1 - sigma^2)^2 / ({const} Q L)",
                             "inputs": {"sigma": sigma, "Q": Q, "L": ell}}
    else:
        alpha = cfg.float("run.alpha")
        if scale != 1:
            raise ConfigError("run.alpha_scale applies only to a symbolic run.alpha")
    raw_K = cfg.get("run.K")
    if raw_K == "auto":
        c = cfg.float("run.c")
        K = theory.inner_loop_length(sigma, Q, c)
        resolved["K"] = {"value": K, "symbol": "auto",
                         "formula": "ceil(801 Q^2 / (1 - sigma^2)^2 * log(20 c))",
                         "inputs": {"sigma": sigma, "Q": Q, "c": c}}
    else:
        K = cfg.int("run.K")
    params = {
        "alpha": alpha,
        "K": K,
        "T": cfg.int("run.T"),
        "seed": cfg.int("run.seed"),
        "record_every": cfg.int("run.record_every") if cfg.get("run.record_every") else None,
        "target": cfg.float("run.target") if cfg.get("run.target") else None,
        "threads": cfg.int("run.threads"),
        "backend": cfg.get("run.backend"),
    }
    return params, resolved


def methods_list(cfg: ExperimentConfig) -> list[str]:
    raw = cfg.get("run.methods") or ""
    methods = [m.strip() for m in raw.split(",") if m.strip()]
    if not methods:
        raise ConfigError("run.methods is empty; list at least one of gtsvrg, gt, dsgd")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
    return methods
