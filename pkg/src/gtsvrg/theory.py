"""Convergence machinery: the 3x3 recursion ``u+ <= G u + H u0`` and friends.

The residual vector is ``u = (||x - 1 xbar||^2, n ||xbar - x*||^2,
||y - 1 ybar||^2)``.  ``G`` contracts it within an inner loop; ``H`` injects
the snapshot error from the start of the outer loop.

Every matrix here is nonnegative.  Spectral radii are computed with power
iteration and the Collatz-Wielandt bracket ``min_i (Ax)_i/x_i <= rho(A) <=
max_i (Ax)_i/x_i``, which stays accurate when entries span many orders of
magnitude (``G`` mixes ``alpha^2 ~ 1e-18`` with ``L^2/(1-sigma^2) ~ 1e6``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, PreconditionError

__all__ = [
    "TheoryMatrices",
    "build_G",
    "build_H",
    "theory_matrices",
    "spectral_radius",
    "max_step_size",
    "recommended_step",
    "rho_G_bound",
    "perturbation_gain",
    "inner_loop_length",
    "outer_operator",
    "predicted_complexity",
    "eps_weights",
    "theory_table",
    "PERTURBATION_CEILING",
]

# ceiling on rho((I - G)^{-1} H) at the recommended step
PERTURBATION_CEILING = 0.848


def _gap(sigma: float) -> float:
    """``1 - sigma^2`` after checking ``0 <= sigma < 1``."""
    if not (math.isfinite(sigma) and 0.0 <= sigma < 1.0):
        raise ConfigError(f"sigma must lie in [0, 1), got {sigma!r}")
    return 1.0 - sigma * sigma


def _check_constants(mu=None, ell=None, Q=None):
    if mu is not None and not mu > 0:
        raise ConfigError(f"mu must be > 0, got {mu!r}")
    if ell is not None and not ell > 0:
        raise ConfigError(f"L must be > 0, got {ell!r}")
    if mu is not None and ell is not None and ell < mu:
        raise ConfigError(f"need mu <= L, got mu={mu!r}, L={ell!r}")
    if Q is not None and not Q >= 1:
        raise ConfigError(f"Q must be >= 1, got {Q!r}")


def build_G(alpha: float, sigma: float, mu: float, ell: float) -> np.ndarray:
    d = _gap(sigma)
    _check_constants(mu, ell)
    if not alpha >= 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha!r}")
    s2 = sigma * sigma
    L2 = ell * ell
    return np.array([
        [(1 + s2) / 2, 0.0, 2 * alpha * alpha / d],
        [2 * L2 * alpha / mu, 1 - mu * alpha / 2, 0.0],
        [100 * L2 / d, 70 * L2 / d, (1 + s2) / 2 + 40 * L2 * alpha * alpha / d],
    ])


def build_H(alpha: float, sigma: float, ell: float) -> np.ndarray:
    d = _gap(sigma)
    _check_constants(ell=ell)
    a = 4 * ell * ell * alpha * alpha
    c = 60 * ell * ell / d
    return np.array([
        [0.0, 0.0, 0.0],
        [a, a, 0.0],
        [c, c, 0.0],
    ])


@dataclass(frozen=True, eq=False)
class TheoryMatrices:
    G: np.ndarray
    H: np.ndarray
    alpha: float
    sigma: float
    mu: float
    ell: float

    @property
    def rho_G(self) -> float:
        return spectral_radius(self.G)


def theory_matrices(alpha, sigma, mu, ell) -> TheoryMatrices:
    return TheoryMatrices(build_G(alpha, sigma, mu, ell), build_H(alpha, sigma, ell),
                          alpha, sigma, mu, ell)


def _perron_bracket(A: np.ndarray, tol: float, max_iter: int, square_every: int = 32):
    """Collatz-Wielandt bracket on ``rho(A)`` for a nonnegative matrix, or None.

    Power iteration runs on ``B = A^(2^j) / scale``, squaring every
    ``square_every`` sweeps so a slow eigenvalue ratio is raised to ``2^j``.
    Products of nonnegative matrices carry only entrywise rounding, and the
    ``2^j``-th root divides it back down.
    """
    B = A
    x = np.ones(A.shape[0])
    log_scale, power = 0.0, 1
    for it in range(1, max_iter + 1):
        y = B @ x
        if not np.all(y > 0):
            return None
        ratio = y / x
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo <= tol * lo * power:
            root = lambda r: math.exp((math.log(r) + log_scale) / power)  # noqa: E731
            return root(lo), root(hi)
        x = y / y.max()
        if it % square_every == 0 and power < 2 ** 40:
            c = float(B.max())
            B = (B / c) @ (B / c)
            log_scale = 2 * (log_scale + math.log(c))
            power *= 2
    return None


def spectral_radius(A, tol: float = 1e-14, max_iter: int = 20000) -> float:
    """Largest eigenvalue modulus.

    Nonnegative matrices with a positive Perron vector return the upper end
    of a Collatz-Wielandt bracket of relative width ``tol``.  Other matrices
    (reducible ones, or with negative entries) use LAPACK ``eigvals``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError(f"spectral_radius needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericError("spectral_radius: matrix has non-finite entries")
    if A.shape[0] == 0:
        return 0.0
    if np.all(A >= 0):
        br = _perron_bracket(A, tol, max_iter)
        if br is not None:
            return br[1]
    ev = np.linalg.eigvals(A)
    if not np.all(np.isfinite(ev)):
        raise NumericError("spectral_radius: eigenvalue computation did not converge")
    return float(np.max(np.abs(ev)))


def max_step_size(sigma: float, Q: float, ell: float) -> float:
    """Largest step with a guaranteed ``rho(G_alpha) < 1``: ``(1-sigma^2)^2 / (105 Q L)``."""
    d = _gap(sigma)
    _check_constants(ell=ell, Q=Q)
    return d * d / (105.0 * Q * ell)


def recommended_step(sigma: float, Q: float, ell: float) -> float:
    """``(1-sigma^2)^2 / (200 Q L)``."""
    d = _gap(sigma)
    _check_constants(ell=ell, Q=Q)
    return d * d / (200.0 * Q * ell)


def rho_G_bound(sigma: float, Q: float) -> float:
    """Upper bound ``1 - (1-sigma^2)^2 / (800 Q^2)`` on rho(G) at the recommended step."""
    d = _gap(sigma)
    _check_constants(Q=Q)
    return 1.0 - d * d / (800.0 * Q * Q)


def eps_weights(sigma: float, Q: float, ell: float) -> tuple:
    """Weights ``(1, 8Q^2, 1350 Q^2 L^2 / (1-sigma^2)^2)`` for the scaled max-norm."""
    d = _gap(sigma)
    return (1.0, 8.0 * Q * Q, 1350.0 * Q * Q * ell * ell / (d * d))


def _perron_scaling(G: np.ndarray) -> np.ndarray:
    br = _perron_bracket(G, 1e-14, 20000)
    if br is None:
        return np.ones(G.shape[0])
    # re-run to recover the vector; 3x3 so the cost is negligible
    x = np.ones(G.shape[0])
    for _ in range(20000):
        y = G @ x
        ratio = y / x
        x = y / y.max()
        if ratio.max() - ratio.min() <= 1e-14 * ratio.max():
            break
    return x


def perturbation_gain(G, H) -> float:
    """``rho((I - G)^{-1} H)``; requires ``rho(G) < 1``.

    The linear solve runs on the similarity ``D^{-1} G D`` where ``D`` is the
    Perron vector of ``G``, which equalizes row sums and keeps the system
    well scaled.
    """
    G = np.asarray(G, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    rho = spectral_radius(G)
    if not rho < 1.0:
        raise PreconditionError(f"perturbation_gain needs rho(G) < 1, got {rho!r}")
    if not np.any(H):
        return 0.0
    w = _perron_scaling(G)
    Gs = G * w[None, :] / w[:, None]
    Hs = H * w[None, :] / w[:, None]
    X = np.linalg.solve(np.eye(G.shape[0]) - Gs, Hs)
    X[np.abs(X) < 1e-300] = 0.0
    return spectral_radius(np.where(X < 0, 0.0, X)) if np.all(X >= -1e-12 * np.abs(X).max()) \
        else spectral_radius(X)


def inner_loop_length(sigma: float, Q: float, c: float = 1.0) -> int:
    """``ceil(801 Q^2 / (1-sigma^2)^2 * log(20 c))``."""
    d = _gap(sigma)
    _check_constants(Q=Q)
    if not c >= 1:
        raise ConfigError(f"norm-equivalence constant c must be >= 1, got {c!r}")
    return int(math.ceil(801.0 * Q * Q / (d * d) * math.log(20.0 * c)))


def _power_and_sum(G: np.ndarray, N: int) -> tuple:
    """``(G^N, sum_{r=1}^{N} G^r)`` by binary doubling, nonnegative throughout."""
    d = G.shape[0]
    P = np.eye(d)
    S = np.zeros((d, d))
    for bit in bin(N)[2:]:
        # double: j -> 2j
        S = S + P @ S
        P = P @ P
        if bit == "1":
            # increment: j -> j + 1
            P = P @ G
            S = S + P
    return P, S


def outer_operator(G, H, K: int) -> tuple:
    """``(G^K + sum_{r=1}^{K-1} G^r H, its spectral radius)``.

    Powers and the geometric sum are formed by repeated doubling, so
    ``K`` up to ~1e9 costs a few dozen 3x3 products and no matrix inverse.
    """
    if int(K) != K or K < 1:
        raise ConfigError(f"K must be an integer >= 1, got {K!r}")
    G = np.asarray(G, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    P, S = _power_and_sum(G, int(K) - 1)
    M = P @ G + S @ H
    return M, spectral_radius(M)


def predicted_complexity(M_data: int, Q: float, sigma: float, epsilon: float) -> float:
    """Order-of-magnitude gradient count ``(M + Q^2/(1-sigma)^2) log(1/eps)``, unit constant."""
    if not 0.0 <= sigma < 1.0:
        raise ConfigError(f"sigma must lie in [0, 1), got {sigma!r}")
    if not 0.0 < epsilon < 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    _check_constants(Q=Q)
    return (M_data + Q * Q / (1.0 - sigma) ** 2) * math.log(1.0 / epsilon)


def theory_table(sigma: float, Q: float, ell: float, mu: float | None = None,
                 M_data: int | None = None, epsilon: float = 1e-8, c: float = 1.0) -> dict:
    """Every derived quantity for one ``(sigma, Q, L)`` setting."""
    _gap(sigma)
    _check_constants(ell=ell, Q=Q)
    mu = ell / Q if mu is None else mu
    if not math.isclose(ell / mu, Q, rel_tol=1e-12):
        raise ConfigError(f"inconsistent constants: L/mu = {ell / mu!r} but Q = {Q!r}")
    a_max = max_step_size(sigma, Q, ell)
    a_rec = recommended_step(sigma, Q, ell)
    G = build_G(a_rec, sigma, mu, ell)
    H = build_H(a_rec, sigma, ell)
    K = inner_loop_length(sigma, Q, c)
    _, rho_outer = outer_operator(G, H, K)
    table = {
        "sigma": sigma,
        "Q": Q,
        "L": ell,
        "mu": mu,
        "max_step": a_max,
        "recommended_step": a_rec,
        "rho_G": spectral_radius(G),
        "rho_G_bound": rho_G_bound(sigma, Q),
        "perturbation_gain": perturbation_gain(G, H),
        "K": K,
        "c": c,
        "rho_outer": rho_outer,
    }
    if M_data is not None:
        table["predicted_complexity"] = predicted_complexity(M_data, Q, sigma, epsilon)
        table["predicted_complexity_note"] = "asymptotic order, unit constant"
        table["epsilon"] = epsilon
    return table
