"""Reference decentralized methods: exact gradient tracking and decentralized SGD.

Both reuse ``NetworkState`` without the snapshot fields.  For gradient
tracking ``v`` holds the stacked exact local gradients at ``x``; for DSGD
``y`` holds the last sampled gradients (there is no tracker) so the trace
schema stays the same.
"""

from __future__ import annotations

import math

import numpy as np

from . import theory
from ._fallback import draw_indices
from .algorithm import (NetworkState, RunConfig, Trace, _check_dims, _close_outer, _initial_point,
                        _record, outer_weights, summarize)
from .errors import ConfigError, DivergedError
from .objectives import Problem
from .topology import MixingMatrix

__all__ = ["gt_full_step", "dsgd_step", "gt_init", "dsgd_init", "run_baseline", "METHODS"]

METHODS = ("gt", "dsgd")


def _mix_rows(W: np.ndarray, Z: np.ndarray) -> np.ndarray:
    # ascending-index accumulation, the same order as the GT-SVRG kernel
    acc = np.zeros_like(Z)
    for r in range(W.shape[0]):
        acc = acc + W[:, r, None] * Z[r]
    return acc


def _check_finite(S: NetworkState, P: Problem, mix: MixingMatrix, alpha: float, method: str):
    if not (np.all(np.isfinite(S.x)) and np.all(np.isfinite(S.y))):
        bound = theory.max_step_size(mix.sigma, P.Q, P.ell)
        raise DivergedError(
            f"{method}: non-finite iterate at t={S.t}, k={S.k} with alpha={alpha!r} "
            f"({alpha / bound:.3g}x the guaranteed-stable GT-SVRG step {bound!r})",
            alpha=alpha, t=S.t, k=S.k, bound=bound,
        )


def gt_init(P: Problem, mix: MixingMatrix, x0=None) -> NetworkState:
    _check_dims(P, mix)
    x = _initial_point(P, x0)
    g = P.local_full_grads(x)
    return NetworkState(x=x.copy(), y=g.copy(), v=g, grad_evals=sum(P.m))


def dsgd_init(P: Problem, mix: MixingMatrix, x0=None) -> NetworkState:
    _check_dims(P, mix)
    x = _initial_point(P, x0)
    z = np.zeros_like(x)
    return NetworkState(x=x.copy(), y=z, v=z.copy(), grad_evals=0)


def gt_full_step(S: NetworkState, P: Problem, mix: MixingMatrix, alpha: float) -> NetworkState:
    """``x+ = W x - alpha y``; ``y+ = W y + grad f(x+) - grad f(x)`` with exact local gradients."""
    W = mix.W
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up is caught below
        x = _mix_rows(W, S.x) - alpha * S.y
        g = P.local_full_grads(x)
        y = (_mix_rows(W, S.y) + g) - S.v
    out = NetworkState(x=x, y=y, v=g, t=S.t, k=S.k + 1, grad_evals=S.grad_evals + sum(P.m))
    _check_finite(out, P, mix, alpha, "gt")
    return out


def dsgd_step(S: NetworkState, P: Problem, mix: MixingMatrix, alpha: float,
              seed: int = 0) -> NetworkState:
    """``x+ = W x - alpha g`` with ``g_i`` one uniformly sampled component gradient at ``x_i``.

    The sample for the step leaving ``(t, k)`` uses the same counter-based
    stream as GT-SVRG.
    """
    comps = P.offsets[:-1] + draw_indices(seed, S.t, S.k, P.m)
    with np.errstate(over="ignore", invalid="ignore"):
        g = P._grads_at(comps, S.x)
        x = _mix_rows(mix.W, S.x) - alpha * g
    out = NetworkState(x=x, y=g, v=g, t=S.t, k=S.k + 1, grad_evals=S.grad_evals + P.n)
    _check_finite(out, P, mix, alpha, "dsgd")
    return out


def run_baseline(method: str, P: Problem, mix: MixingMatrix, cfg: RunConfig) -> Trace:
    """Run ``cfg.T * cfg.K`` steps of a baseline, recorded on the GT-SVRG ``(t, k)`` grid.

    ``t`` counts blocks of ``K`` steps so rows line up with a GT-SVRG trace of
    the same config; there is no snapshot refresh.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown baseline {method!r}; expected one of {METHODS}")
    S = gt_init(P, mix, cfg.x0) if method == "gt" else dsgd_init(P, mix, cfg.x0)
    weights = outer_weights(P, mix)
    trace = Trace(eps_weights=weights)
    trace.records.append(_record(S, P))
    trace.outer_u.append(trace.records[-1].u)
    every = cfg.record_every or cfg.K
    for t in range(cfg.T):
        S.t, S.k = t, 0
        while S.k < cfg.K:
            stop = min(S.k + every, cfg.K)
            while S.k < stop:
                S = (gt_full_step(S, P, mix, cfg.alpha) if method == "gt"
                     else dsgd_step(S, P, mix, cfg.alpha, cfg.seed))
            trace.records.append(_record(S, P))
        _close_outer(trace, weights)
        if cfg.target is not None and trace.records[-1].mean_dist_to_opt <= cfg.target:
            break
    trace.summary = summarize(trace, cfg)
    trace.summary["method"] = method
    return trace


def plateau_level(trace: Trace, tail: float = 0.25) -> float:
    """Median ``||xbar - x*||`` over the last ``tail`` fraction of recorded rows."""
    rows = trace.records
    start = max(1, int(math.floor(len(rows) * (1 - tail))))
    return float(np.median([r.mean_dist_to_opt for r in rows[start:]]))
