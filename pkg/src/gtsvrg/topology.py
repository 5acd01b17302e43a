"""Network graphs and doubly-stochastic mixing matrices.

Graphs are undirected and stored as a set of ``(i, j)`` pairs with ``i < j``.
Mixing matrices are built with Metropolis-Hastings weights, which are
symmetric and doubly stochastic by construction, or loaded from text and
re-validated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError, TopologyError, UsageError

__all__ = [
    "Graph",
    "MixingMatrix",
    "build_graph",
    "metropolis_weights",
    "uniform_complete",
    "second_singular_value",
    "contraction_check",
    "load_matrix",
    "save_matrix",
    "TOPOLOGY_KINDS",
]

TOPOLOGY_KINDS = ("ring", "path", "grid2d", "complete", "erdos_renyi")

STOCHASTIC_TOL = 1e-12
SIGMA_ONE_TOL = 1e-10
ER_MAX_RETRIES = 1000


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"graph needs n >= 1, got {self.n}")
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise ConfigError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ConfigError(f"edge ({i}, {j}) outside [0, {self.n})")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def is_connected(self) -> bool:
        adj = self.neighbors()
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.n


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Validated doubly-stochastic weight matrix with its contraction factor.

    Use :meth:`from_array` rather than the constructor; it checks every
    invariant and computes ``sigma``.
    """

    W: np.ndarray
    sigma: float
    n: int

    @classmethod
    def from_array(cls, W) -> "MixingMatrix":
        W = np.array(W, dtype=np.float64, copy=True)
        validate_doubly_stochastic(W)
        sigma = second_singular_value(W)
        if sigma >= 1.0 - SIGMA_ONE_TOL:
            raise TopologyError(
                f"second singular value sigma={sigma!r} is 1: the matrix is "
                "not primitive (disconnected or periodic network)"
            )
        W.setflags(write=False)
        return cls(W=W, sigma=float(sigma), n=W.shape[0])

    @property
    def averaging(self) -> np.ndarray:
        return np.full((self.n, self.n), 1.0 / self.n)


def validate_doubly_stochastic(W: np.ndarray) -> None:
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise TopologyError(f"mixing matrix must be square, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        bad = np.argwhere(~np.isfinite(W))[0]
        raise NumericError(f"non-finite entry at row {bad[0]}, column {bad[1]}")
    neg = np.argwhere(W < 0)
    if len(neg):
        r, c = neg[0]
        raise TopologyError(f"nonnegativity violated at row {r}, column {c}: {float(W[r, c])!r}")
    rows = W.sum(axis=1)
    bad_rows = np.flatnonzero(np.abs(rows - 1.0) > STOCHASTIC_TOL)
    if len(bad_rows):
        r = bad_rows[0]
        raise TopologyError(f"row-stochasticity violated at row {r}: sum = {float(rows[r])!r}")
    cols = W.sum(axis=0)
    bad_cols = np.flatnonzero(np.abs(cols - 1.0) > STOCHASTIC_TOL)
    if len(bad_cols):
        c = bad_cols[0]
        raise TopologyError(f"column-stochasticity violated at column {c}: sum = {float(cols[c])!r}")


def build_graph(kind: str, n: int, params: dict | None = None, seed: int | None = None) -> Graph:
    """Build a connected undirected graph.

    ``params`` carries kind-specific settings: ``rows``/``cols`` for
    ``grid2d`` and ``prob`` for ``erdos_renyi``.  Erdos-Renyi graphs are
    resampled until connected, up to ``ER_MAX_RETRIES`` draws.
    """
    params = dict(params or {})
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError(f"n must be an integer >= 1, got {n!r}")
    n = int(n)
    if kind == "ring":
        if n == 1:
            edges = set()
        elif n == 2:
            edges = {(0, 1)}
        else:
            edges = {(i, (i + 1) % n) for i in range(n)}
    elif kind == "path":
        edges = {(i, i + 1) for i in range(n - 1)}
    elif kind == "complete":
        edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    elif kind == "grid2d":
        rows, cols = params.get("rows"), params.get("cols")
        if rows is None or cols is None:
            raise ConfigError("grid2d needs 'rows' and 'cols'")
        rows, cols = int(rows), int(cols)
        if rows < 1 or cols < 1 or rows * cols != n:
            raise ConfigError(f"grid2d requires n = rows*cols, got n={n}, rows={rows}, cols={cols}")
        edges = set()
        for r in range(rows):
            for c in range(cols):
                u = r * cols + c
                if c + 1 < cols:
                    edges.add((u, u + 1))
                if r + 1 < rows:
                    edges.add((u, u + cols))
    elif kind == "erdos_renyi":
        prob = params.get("prob")
        if prob is None or not (0.0 < float(prob) <= 1.0):
            raise ConfigError(f"erdos_renyi edge probability must lie in (0, 1], got {prob!r}")
        prob = float(prob)
        rng = np.random.default_rng(seed)
        iu, ju = np.triu_indices(n, k=1)
        for _ in range(ER_MAX_RETRIES):
            keep = rng.random(len(iu)) < prob
            g = Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))
            if g.is_connected():
                return g
        raise TopologyError(
            f"erdos_renyi(n={n}, prob={prob}) still disconnected after {ER_MAX_RETRIES} draws"
        )
    else:
        raise ConfigError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")
    g = Graph(n, frozenset(edges))
    if not g.is_connected():
        raise TopologyError(f"{kind} graph with n={n} is disconnected")
    return g


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights ``w_ij = 1 / (1 + max(deg_i, deg_j))``."""
    if not g.is_connected():
        raise TopologyError("metropolis_weights needs a connected graph")
    deg = g.degrees()
    W = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = W[j, i] = w
    for i in range(g.n):
        # off-diagonal row entries summed in index order, so the matrix stays symmetric
        W[i, i] = 1.0 - W[i].sum()
    return MixingMatrix.from_array(W)


def uniform_complete(n: int) -> MixingMatrix:
    """The averaging projector ``11^T / n`` (complete graph, sigma = 0)."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    return MixingMatrix.from_array(np.full((n, n), 1.0 / n))


def second_singular_value(W) -> float:
    """Return ``||W - 11^T/n||_2``, which equals sigma for doubly-stochastic W.

    Symmetric matrices go through ``eigvalsh``; anything else through an SVD.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise UsageError(f"expected a square matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise NumericError("matrix has non-finite entries")
    n = W.shape[0]
    D = W - 1.0 / n
    if np.array_equal(W, W.T):
        return float(np.max(np.abs(np.linalg.eigvalsh(D))))
    return float(np.linalg.svd(D, compute_uv=False)[0])


def contraction_check(mix: MixingMatrix, x) -> tuple[float, float, bool]:
    """Evaluate ``||Wx - W_inf x|| <= sigma ||x - W_inf x||`` (Frobenius norms)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != mix.n:
        raise UsageError(f"x has {x.shape[0]} rows, matrix is {mix.n}x{mix.n}")
    xbar = x.mean(axis=0)
    lhs = float(np.linalg.norm(mix.W @ x - xbar))
    rhs = mix.sigma * float(np.linalg.norm(x - xbar))
    return lhs, rhs, lhs <= rhs + 1e-9 * (1.0 + rhs)


def load_matrix(path) -> MixingMatrix:
    """Read ``n`` on the first line, then ``n`` rows of ``n`` decimals."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ConfigError(f"{path}: empty matrix file")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise ConfigError(f"{path}: first line must be the dimension n") from exc
    if len(lines) - 1 != n:
        raise ConfigError(f"{path}: expected {n} matrix rows, found {len(lines) - 1}")
    rows = []
    for r, ln in enumerate(lines[1:]):
        vals = ln.split()
        if len(vals) != n:
            raise ConfigError(f"{path}: row {r} has {len(vals)} entries, expected {n}")
        try:
            rows.append([float(v) for v in vals])
        except ValueError as exc:
            raise ConfigError(f"{path}: row {r} has a non-numeric entry") from exc
    return MixingMatrix.from_array(np.array(rows))


def save_matrix(mix: MixingMatrix, path) -> None:
    lines = [str(mix.n)]
    lines += [" ".join(repr(float(w)) for w in row) for row in mix.W]
    Path(path).write_text("\n".join(lines) + "\n")
