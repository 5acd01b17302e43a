"""GT-SVRG over a simulated synchronous network.

Stacked state: row ``i`` of every ``n x p`` array belongs to node ``i``.
One inner step is::

    x+  = W x - alpha y
    v+_i = grad f_{i,s_i}(x+_i) - grad f_{i,s_i}(snapshot_i) + snapshot_grad_i
    y+  = W y + v+ - v

and an outer step runs ``K`` inner steps, then refreshes every node's
snapshot and full local gradient.  ``y`` and ``v`` carry over unchanged.

Node ``i``'s sample for the step leaving ``(t, k)`` is a pure function of
``(seed, i, t, k)``, so runs are reproducible regardless of thread count.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from . import theory
from .errors import ConfigError, DivergedError, UsageError
from .kernels import get_backend
from .objectives import Problem
from .topology import MixingMatrix

__all__ = [
    "NetworkState",
    "RunConfig",
    "TraceRecord",
    "Trace",
    "init",
    "inner_step",
    "outer_step",
    "run",
    "residuals",
    "TRACE_HEADER",
]

TRACE_HEADER = ("t", "k", "consensus_sq", "opt_gap_sq_scaled", "tracking_sq",
                "mean_dist_to_opt", "grad_evals")


@dataclass
class NetworkState:
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    snapshot_x: np.ndarray | None = None
    snapshot_grad: np.ndarray | None = None
    t: int = 0
    k: int = 0
    grad_evals: int = 0

    def copy(self) -> "NetworkState":
        dup = lambda a: None if a is None else a.copy()  # noqa: E731
        return replace(self, x=self.x.copy(), y=self.y.copy(), v=self.v.copy(),
                       snapshot_x=dup(self.snapshot_x), snapshot_grad=dup(self.snapshot_grad))


@dataclass(frozen=True)
class RunConfig:
    """Run parameters.

    ``record_every`` is the inner-step spacing of trace rows (``None`` records
    only outer-loop boundaries).  ``target`` stops the run after the first
    outer loop whose mean iterate is within ``target`` of the minimizer.
    """

    alpha: float
    K: int
    T: int
    seed: int = 0
    x0: np.ndarray | None = None
    record_every: int | None = None
    target: float | None = None
    threads: int = 1
    backend: str | None = None

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigError(f"alpha must be a finite number >= 0, got {self.alpha!r}")
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError(f"K must be an integer >= 1, got {self.K!r}")
        if int(self.T) != self.T or self.T < 0:
            raise ConfigError(f"T must be an integer >= 0, got {self.T!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must fit in an unsigned 64-bit integer, got {self.seed!r}")
        if self.record_every is not None and self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads!r}")


class TraceRecord(NamedTuple):
    t: int
    k: int
    consensus_sq: float
    opt_gap_sq_scaled: float
    tracking_sq: float
    mean_dist_to_opt: float
    grad_evals: int

    @property
    def u(self) -> np.ndarray:
        return np.array([self.consensus_sq, self.opt_gap_sq_scaled, self.tracking_sq])


@dataclass
class Trace:
    records: list = field(default_factory=list)
    # u-vectors at the start of each outer loop, u^{0,0}, u^{1,0}, ...
    outer_u: list = field(default_factory=list)
    outer_ratios: list = field(default_factory=list)
    eps_weights: tuple = (1.0, 1.0, 1.0)
    summary: dict = field(default_factory=dict)

    def to_csv(self, path_or_buf=None, method: str | None = None) -> str:
        buf = io.StringIO()
        header = list(TRACE_HEADER) if method is None else ["method", *TRACE_HEADER]
        buf.write(",".join(header) + "\n")
        for r in self.records:
            cells = [str(r.t), str(r.k)]
            cells += [format(val, ".17g") for val in r[2:6]]
            cells.append(str(r.grad_evals))
            if method is not None:
                cells.insert(0, method)
            buf.write(",".join(cells) + "\n")
        text = buf.getvalue()
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w", newline="") as fh:
                    fh.write(text)
        return text


def residuals(x, y, x_star) -> tuple:
    """``(||x - 1 xbar||^2, n ||xbar - x*||^2, ||y - 1 ybar||^2, ||xbar - x*||)``."""
    n = x.shape[0]
    xbar = x.mean(axis=0)
    ybar = y.mean(axis=0)
    with np.errstate(over="ignore"):  # inf is an honest reading just before a blow-up
        dist = float(np.linalg.norm(xbar - x_star))
        return (float(np.sum((x - xbar) ** 2)), n * dist * dist,
                float(np.sum((y - ybar) ** 2)), dist)


def _record(S: NetworkState, P: Problem) -> TraceRecord:
    return TraceRecord(S.t, S.k, *residuals(S.x, S.y, P.x_star), S.grad_evals)


def _check_dims(P: Problem, mix: MixingMatrix):
    if mix.n != P.n:
        raise UsageError(f"mixing matrix is {mix.n}x{mix.n} but the problem has {P.n} nodes")


def _initial_point(P: Problem, x0) -> np.ndarray:
    if x0 is None:
        return np.zeros((P.n, P.p))
    x0 = np.array(x0, dtype=np.float64)
    if x0.shape == (P.p,):
        x0 = np.tile(x0, (P.n, 1))
    if x0.shape != (P.n, P.p):
        raise UsageError(f"x0 must have shape ({P.n}, {P.p}) or ({P.p},), got {x0.shape}")
    return x0


def init(P: Problem, mix: MixingMatrix, cfg: RunConfig) -> NetworkState:
    """Start state: snapshot at ``x0`` and ``y = v = grad f_i(x0)``."""
    _check_dims(P, mix)
    x = _initial_point(P, cfg.x0)
    g = P.local_full_grads(x)
    return NetworkState(x=x.copy(), y=g.copy(), v=g.copy(), snapshot_x=x.copy(),
                        snapshot_grad=g, t=0, k=0, grad_evals=sum(P.m))


def _diverged(P: Problem, mix: MixingMatrix, alpha: float, S: NetworkState) -> DivergedError:
    bound = theory.max_step_size(mix.sigma, P.Q, P.ell)
    return DivergedError(
        f"non-finite iterate at outer loop t={S.t}, inner step k={S.k}: "
        f"alpha={alpha!r} is {alpha / bound:.3g}x the guaranteed-stable "
        f"step (1-sigma^2)^2/(105 Q L) = {bound!r}",
        alpha=alpha, t=S.t, k=S.k, bound=bound,
    )


def _advance(S: NetworkState, P: Problem, mix: MixingMatrix, alpha: float, seed: int,
             steps: int, threads: int = 1, backend: str | None = None) -> None:
    """Run ``steps`` inner iterations in place on ``S``."""
    kern = get_backend(backend)
    done = kern.gtsvrg_steps(
        mix.W, S.x, S.y, S.v, S.snapshot_x, S.snapshot_grad,
        P.family_code, P.A, P.vec, P.labels, P.lam, P.offsets,
        float(alpha), int(seed), S.t, S.k, int(steps), int(threads),
    )
    S.k += int(done)
    S.grad_evals += 2 * P.n * int(done)
    if done < steps or not (np.all(np.isfinite(S.x)) and np.all(np.isfinite(S.y))):
        raise _diverged(P, mix, alpha, S)


def _refresh(S: NetworkState, P: Problem) -> None:
    S.snapshot_x = S.x.copy()
    S.snapshot_grad = P.local_full_grads(S.x)
    S.grad_evals += sum(P.m)
    S.t += 1
    S.k = 0


def inner_step(S: NetworkState, P: Problem, mix: MixingMatrix, alpha: float, seed: int = 0,
               *, threads: int = 1, backend: str | None = None) -> NetworkState:
    """One inner iteration; returns a new state and leaves ``S`` untouched."""
    _check_dims(P, mix)
    out = S.copy()
    _advance(out, P, mix, alpha, seed, 1, threads, backend)
    return out


def outer_step(S: NetworkState, P: Problem, mix: MixingMatrix, alpha: float, K: int,
               seed: int = 0, *, threads: int = 1, backend: str | None = None) -> NetworkState:
    """``K`` inner iterations followed by the snapshot refresh."""
    if S.k != 0:
        raise UsageError(f"outer_step must start at k=0, state has k={S.k}")
    _check_dims(P, mix)
    out = S.copy()
    _advance(out, P, mix, alpha, seed, K, threads, backend)
    _refresh(out, P)
    return out


def outer_weights(P: Problem, mix: MixingMatrix) -> tuple:
    return theory.eps_weights(mix.sigma, P.Q, P.ell)


def scaled_max_norm(u, weights) -> float:
    return float(max(ui / wi for ui, wi in zip(u, weights)))


def run(P: Problem, mix: MixingMatrix, cfg: RunConfig,
        observer: Callable[[NetworkState], None] | None = None) -> Trace:
    """Execute ``cfg.T`` outer loops and return the trace.

    ``observer`` (if given) is called with a copy of the state at every
    recorded point, including the initial state.
    """
    S = init(P, mix, cfg)
    weights = outer_weights(P, mix)
    trace = Trace(eps_weights=weights)
    trace.records.append(_record(S, P))
    trace.outer_u.append(trace.records[-1].u)
    if observer is not None:
        observer(S.copy())
    every = cfg.record_every or cfg.K
    for _ in range(cfg.T):
        while S.k < cfg.K:
            _advance(S, P, mix, cfg.alpha, cfg.seed, min(every, cfg.K - S.k),
                     cfg.threads, cfg.backend)
            trace.records.append(_record(S, P))
            if observer is not None:
                observer(S.copy())
        _close_outer(trace, weights)
        _refresh(S, P)
        if cfg.target is not None and trace.records[-1].mean_dist_to_opt <= cfg.target:
            break
    trace.summary = summarize(trace, cfg)
    return trace


def _close_outer(trace: Trace, weights) -> None:
    u_end = trace.records[-1].u
    prev = scaled_max_norm(trace.outer_u[-1], weights)
    cur = scaled_max_norm(u_end, weights)
    trace.outer_u.append(u_end)
    trace.outer_ratios.append(cur / prev if prev > 0 else (0.0 if cur == 0 else math.inf))


def summarize(trace: Trace, cfg: RunConfig) -> dict:
    last = trace.records[-1]
    ratios = trace.outer_ratios
    finite = [r for r in ratios[1:] if r > 0 and math.isfinite(r)]
    geo = math.exp(sum(math.log(r) for r in finite) / len(finite)) if finite else None
    out = {
        "alpha": cfg.alpha,
        "K": cfg.K,
        "T": cfg.T,
        "seed": int(cfg.seed),
        "outer_loops_run": len(ratios),
        "final": dict(zip(TRACE_HEADER, last)),
        "outer_ratios": ratios,
        "geometric_mean_ratio_after_first": geo,
        "grad_evals": last.grad_evals,
    }
    if cfg.target is not None:
        out["target"] = cfg.target
        out["target_reached"] = last.mean_dist_to_opt <= cfg.target
    return out
