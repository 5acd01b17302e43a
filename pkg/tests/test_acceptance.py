"""Exit criteria.  Each test prints one PASS/FAIL line before asserting."""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, lazy_pair
from gtsvrg import theory as th
from gtsvrg import verify as vf
from gtsvrg.algorithm import RunConfig, run
from gtsvrg.baselines import run_baseline
from gtsvrg.errors import DivergedError
from gtsvrg.objectives import make_quadratic, make_reglog, quadratic_from_components
from gtsvrg.topology import build_graph, metropolis_weights, uniform_complete

pytestmark = pytest.mark.acceptance

GRID = [(s, Q) for s in (0.0, 0.3, 0.6, 0.9) for Q in (1.0, 10.0, 100.0)]


def _report(capsys, number, passed, message):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {message}"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)


def _mixed_close(a, b, tol=1e-12):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return bool(np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(b))))


def _worst(reports):
    worst = [r.max_violation for r in reports if r.max_violation is not None]
    return max(worst) if worst else float("nan")


def test_1_tracking_identity(capsys):
    mix = metropolis_weights(build_graph("ring", 10))
    P = make_quadratic(10, 20, 5, 1.0, 10.0, seed=1)
    alpha = th.recommended_step(mix.sigma, P.Q, P.ell)
    viol = []
    start = time.perf_counter()
    trace = run(P, mix, RunConfig(alpha=alpha, K=2000, T=5, seed=1, record_every=1),
                observer=lambda S: viol.append(vf.check_tracking_identity(S).max_violation))
    elapsed = time.perf_counter() - start
    worst = max(viol)
    ok = len(trace.outer_ratios) == 5 and len(viol) == 5 * 2000 + 1 and worst <= 1e-9 and elapsed < 5
    _report(capsys, 1, ok, f"{len(viol)} states, max violation {worst:.3g} (tol 1e-9), {elapsed:.2f}s (< 5s)")
    assert ok


def test_2_unbiasedness(capsys):
    mix = metropolis_weights(build_graph("ring", 5))
    P = make_quadratic(5, [2, 3, 5, 8, 12], 4, 1.0, 6.0, seed=2)
    small = [i for i in range(P.n) if P.m[i] <= 8]
    states = []
    run(P, mix, RunConfig(alpha=th.recommended_step(mix.sigma, P.Q, P.ell) * 20, K=33, T=3,
                          seed=2, record_every=1), observer=states.append)
    states = states[:100]
    reports = [vf.unbiasedness_oracle(P, S, nodes=small, tol=1e-12) for S in states]
    worst = _worst(reports)
    ok = len(states) == 100 and all(r.passed for r in reports)
    _report(capsys, 2, ok, f"{len(states)} states x nodes {small}, max violation {worst:.3g} (tol 1e-12)")
    assert ok


def _consensus_runs():
    ring = metropolis_weights(build_graph("ring", 10))
    grid = metropolis_weights(build_graph("grid2d", 9, {"rows": 3, "cols": 3}))
    er = metropolis_weights(build_graph("erdos_renyi", 8, {"prob": 0.4}, seed=3))
    yield "ring10-quadratic", make_quadratic(10, 10, 4, 1.0, 10.0, seed=4), ring, 30.0
    yield "grid9-reglog", make_reglog(9, 6, 3, 0.1, seed=5), grid, 30.0
    yield "er8-quadratic", make_quadratic(8, [1, 2, 3, 4, 5, 6, 7, 8], 3, 1.0, 4.0, seed=6), er, 30.0
    yield "complete6-quadratic", make_quadratic(6, 5, 2, 1.0, 3.0, seed=7), uniform_complete(6), 1.0
    yield "lazy-pair", make_quadratic(2, [2, 2], 2, 1.0, 2.0, seed=8), lazy_pair(), 50.0


def test_3_consensus_inequality(capsys):
    details, worst_all, ok = [], -math.inf, True
    for name, P, mix, scale in _consensus_runs():
        alpha = th.recommended_step(mix.sigma, P.Q, P.ell) * scale
        K = 150
        states = []
        run(P, mix, RunConfig(alpha=alpha, K=K, T=3, seed=9, record_every=1), observer=states.append)
        rep = vf.check_consensus_inequality(states, mix, alpha, K, tol=1e-9)
        ok &= rep.passed and rep.instances == len(states) - 1
        worst_all = max(worst_all, rep.max_violation)
        details.append(f"{name}:{rep.instances}")
    _report(capsys, 3, ok, f"steps checked {', '.join(details)}; max relative violation "
                           f"{worst_all:.3g} (tol 1e-9)")
    assert ok


def test_4_expectation_oracles(capsys):
    start = time.perf_counter()
    counts = {"variance": 0, "optimality_identity": 0, "optimality_bound": 0, "tracking_error": 0}
    worst = dict.fromkeys(counts, -math.inf)
    ok = True
    for seed, mix in ((0, lazy_pair()), (1, lazy_pair(0.3))):
        P = make_quadratic(2, [2, 2], 1, 1.0, 2.0, seed=seed)
        alpha = P.mu / (8 * P.ell ** 2)
        states = []
        run(P, mix, RunConfig(alpha=alpha, K=12, T=2, seed=seed, record_every=1), observer=states.append)
        for S in [S for S in states if S.k > 0]:
            reps = [vf.variance_oracle(S, P, tol=1e-9),
                    *vf.optimality_step_oracle(S, P, mix, alpha, tol_identity=1e-10, tol_bound=1e-9),
                    vf.tracking_error_oracle(S, P, mix, alpha, tol=1e-9)]
            for r in reps:
                ok &= r.passed
                counts[r.check] += 1
                worst[r.check] = max(worst[r.check], r.max_violation)
    elapsed = time.perf_counter() - start
    ok &= min(counts.values()) >= 20 and elapsed < 30
    summary = ", ".join(f"{k} {counts[k]} states max {worst[k]:.3g}" for k in counts)
    _report(capsys, 4, ok, f"{summary}; {elapsed:.2f}s (< 30s)")
    assert ok


def test_5_spectral_grid(capsys):
    start = time.perf_counter()
    worst_bound = worst_gain = worst_rho = -math.inf
    for sigma, Q in GRID:
        L = Q
        a = th.recommended_step(sigma, Q, L)
        G, H = th.build_G(a, sigma, 1.0, L), th.build_H(a, sigma, L)
        worst_bound = max(worst_bound, th.spectral_radius(G) - th.rho_G_bound(sigma, Q))
        worst_gain = max(worst_gain, th.perturbation_gain(G, H))
        top = th.max_step_size(sigma, Q, L)
        for alpha in np.logspace(math.log10(top) - 6, math.log10(top), 20):
            worst_rho = max(worst_rho, th.spectral_radius(th.build_G(alpha, sigma, 1.0, L)))
    elapsed = time.perf_counter() - start
    ok = worst_bound <= 1e-9 and worst_gain <= 0.848 + 1e-6 and worst_rho < 1 and elapsed < 1
    _report(capsys, 5, ok, f"max rho(G)-bound {worst_bound:.3g} (<= 1e-9), max gain {worst_gain:.6f} "
                           f"(<= 0.848), max rho(G) on step sweep {worst_rho:.15f} (< 1), "
                           f"{elapsed:.3f}s (< 1s)")
    assert ok


def test_6_outer_operator(capsys):
    start = time.perf_counter()
    rhos = []
    for sigma, Q in GRID:
        a = th.recommended_step(sigma, Q, Q)
        K = th.inner_loop_length(sigma, Q)
        rhos.append(th.outer_operator(th.build_G(a, sigma, 1.0, Q), th.build_H(a, sigma, Q), K)[1])
    elapsed = time.perf_counter() - start
    ok = max(rhos) < 1 and elapsed < 1
    _report(capsys, 6, ok, f"max rho(outer) {max(rhos):.6f} over {len(rhos)} grid points (< 1), "
                           f"{elapsed:.3f}s (< 1s)")
    assert ok


def test_7_empirical_linear_convergence(capsys):
    mix = metropolis_weights(build_graph("ring", 10))
    P = make_quadratic(10, 50, 5, 1.0, 10.0, seed=0)
    alpha = th.recommended_step(mix.sigma, P.Q, P.ell)
    K = th.inner_loop_length(mix.sigma, P.Q)
    start = time.perf_counter()
    trace = run(P, mix, RunConfig(alpha=alpha, K=K, T=20, seed=0, target=1e-8))
    elapsed = time.perf_counter() - start
    rep = vf.check_outer_contraction(trace, target=0.9)
    final = trace.records[-1].mean_dist_to_opt
    geo = rep.detail["geometric_mean_after_first"]
    ok = final <= 1e-8 and rep.passed and elapsed < 60
    geo_txt = "n/a" if geo is None else f"{geo:.3g} ({'<=' if geo <= 0.9 else '>'} 0.9)"
    _report(capsys, 7, ok, f"K={K}, {len(trace.outer_ratios)} outer loops, final ||xbar-x*|| {final:.3g} "
                           f"(<= 1e-8), ratios {[float(f'{r:.3g}') for r in trace.outer_ratios]}, "
                           f"geometric mean after first {geo_txt}, {elapsed:.1f}s (< 60s)")
    assert ok


def test_8_degenerate_equivalences(capsys):
    # n = 1, m = 1 against centralized gradient descent
    P1 = quadratic_from_components([[[[3.0, 0.5], [0.5, 1.0]]]], [[[1.0, -2.0]]])
    mix1 = metropolis_weights(build_graph("ring", 1))
    alpha, x = 0.2, np.array([4.0, -1.0])
    xs = []
    run(P1, mix1, RunConfig(alpha=alpha, K=25, T=4, x0=x, record_every=1),
        observer=lambda S: xs.append(S.x[0].copy()))
    gd = [x]
    for _ in range(len(xs) - 1):
        x = x - alpha * P1.global_grad(x)
        gd.append(x)
    gd_ok = _mixed_close(xs, gd)
    gd_err = float(np.max(np.abs(np.array(xs) - np.array(gd))))

    # m_i = 1 on a ring against deterministic gradient tracking
    mix = metropolis_weights(build_graph("ring", 6))
    P = make_quadratic(6, 1, 3, 1.0, 5.0, seed=4)
    cfg = RunConfig(alpha=0.05, K=40, T=5, seed=3, record_every=1)
    cols = slice(2, 6)
    ours = np.array([r[cols] for r in run(P, mix, cfg).records])
    gt = np.array([r[cols] for r in run_baseline("gt", P, mix, cfg).records])
    gt_ok = ours.shape == gt.shape and _mixed_close(ours, gt)
    gt_err = float(np.max(np.abs(ours - gt) / np.maximum(1.0, np.abs(gt))))
    ok = gd_ok and gt_ok
    _report(capsys, 8, ok, f"n=1,m=1 vs GD max |diff| {gd_err:.3g}; m_i=1 vs GT max mixed diff "
                           f"{gt_err:.3g} (tol 1e-12 * max(1, |ref|))")
    assert ok


CLI_CONFIG = """
topology.kind = ring
topology.n = 10
problem.family = quadratic
problem.m = 20
problem.p = 5
problem.mu = 1
problem.L = 10
problem.seed = 3
run.alpha = recommended
run.alpha_scale = 20
run.K = 400
run.T = 3
run.seed = 11
run.record_every = 7
"""


def test_9_reproducibility(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(CLI_CONFIG)
    traces = {}
    for name, extra in (("seq_a", []), ("seq_b", []), ("par_4", ["run.threads = 4"]),
                        ("par_3", ["run.threads = 3"])):
        path = cfg
        if extra:
            path = tmp_path / f"{name}.txt"
            path.write_text(CLI_CONFIG + "\n".join(extra) + "\n")
        out = tmp_path / name
        subprocess.run([sys.executable, "-m", "gtsvrg.cli", "simulate", "--config", str(path)],
                       check=True, capture_output=True, env={**os.environ, "GTSVRG_OUT": str(out)})
        traces[name] = (out / "trace.csv").read_bytes()
    ok = len(set(traces.values())) == 1 and traces["seq_a"].count(b"\n") > 100
    _report(capsys, 9, ok, f"{len(traces)} invocations ({', '.join(traces)}), "
                           f"{len(set(traces.values()))} distinct trace file(s)")
    assert ok


def _diverges(P, mix, multiple, K=20_000, T=5):
    alpha = multiple * th.max_step_size(mix.sigma, P.Q, P.ell)
    try:
        trace = run(P, mix, RunConfig(alpha=alpha, K=K, T=T, seed=0))
    except DivergedError:
        return True, math.inf
    return False, trace.records[-1].mean_dist_to_opt


def test_10_negative_controls_and_divergence(capsys):
    controls = vf.negative_controls()
    caught = [name for name, r in controls.items() if r.failed]
    controls_ok = len(caught) == len(controls) > 0

    mix = metropolis_weights(build_graph("ring", 4))
    P = make_quadratic(4, 10, 3, 1.0, 100.0, seed=0)
    diverged, final = _diverges(P, mix, 10.0)
    msg = f"negative controls {len(caught)}/{len(controls)} fail as required; "
    if diverged:
        msg += "divergence detected at 10x max_step (Q=100)"
    else:
        # locate the onset of divergence by doubling then bisection
        lo, hi = 10.0, 20.0
        while not _diverges(P, mix, hi)[0]:
            lo, hi = hi, 2 * hi
        for _ in range(10):
            mid = math.sqrt(lo * hi)
            lo, hi = (lo, mid) if _diverges(P, mix, mid)[0] else (mid, hi)
        msg += (f"no divergence at 10x max_step (Q=100, alpha*L={10 * th.max_step_size(mix.sigma, P.Q, P.ell) * P.ell:.3g}): "
                f"run converged to ||xbar-x*|| {final:.3g}; measured divergence onset "
                f"between {lo:.0f}x and {hi:.0f}x max_step")
    ok = controls_ok and diverged
    _report(capsys, 10, ok, msg)
    assert controls_ok, f"controls that passed: {sorted(set(controls) - set(caught))}"
    assert diverged, msg
