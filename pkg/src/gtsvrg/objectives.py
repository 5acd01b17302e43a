"""Finite-sum test problems with certified strong-convexity and smoothness.

Two families are supported:

``quadratic``
    ``f_ij(x) = 0.5 x^T A_ij x + b_ij^T x`` with SPD ``A_ij``.
``reglog``
    ``f_ij(x) = log(1 + exp(-y_ij a_ij^T x)) + (lam/2) ||x||^2``.

Components are stored flat: node ``i`` owns rows ``offsets[i]:offsets[i+1]``
of the parameter arrays.  This packed layout is what the step kernels read.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InternalError, UsageError

__all__ = [
    "Problem",
    "make_quadratic",
    "make_reglog",
    "quadratic_from_components",
    "reglog_from_components",
    "save_problem",
    "load_problem",
]

FAMILY_CODES = {"quadratic": 0, "reglog": 1}
REGLOG_GRAD_TOL = 1e-12
REGLOG_MAX_ITER = 1_000_000


@dataclass(frozen=True, eq=False)
class Problem:
    family: str
    n: int
    m: tuple
    p: int
    mu: float
    ell: float
    x_star: np.ndarray
    offsets: np.ndarray
    # quadratic: A (N, p, p) and vec = b (N, p)
    # reglog: A unused (shape (0, p, p)), vec = features (N, p), labels (N,)
    A: np.ndarray
    vec: np.ndarray
    labels: np.ndarray
    lam: float = 0.0

    @property
    def family_code(self) -> int:
        return FAMILY_CODES[self.family]

    @property
    def M_max(self) -> int:
        return max(self.m)

    @property
    def m_min(self) -> int:
        return min(self.m)

    @property
    def Q(self) -> float:
        return self.ell / self.mu

    @property
    def total_components(self) -> int:
        return int(self.offsets[-1])

    def constants(self) -> tuple:
        """``(mu, ell, Q, M_max, m_min)``."""
        return self.mu, self.ell, self.Q, self.M_max, self.m_min

    def minimizer(self) -> np.ndarray:
        return self.x_star.copy()

    def node_of_component(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.m)

    def _flat(self, i: int, j: int) -> int:
        if not 0 <= i < self.n:
            raise UsageError(f"node index {i} outside [0, {self.n})")
        if not 0 <= j < self.m[i]:
            raise UsageError(f"component index {j} outside [0, {self.m[i]}) at node {i}")
        return int(self.offsets[i]) + j

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.p,):
            raise UsageError(f"expected a point of shape ({self.p},), got {x.shape}")
        return x

    def component_value(self, i: int, j: int, x) -> float:
        c = self._flat(i, j)
        x = self._check_x(x)
        if self.family == "quadratic":
            return float(0.5 * x @ self.A[c] @ x + self.vec[c] @ x)
        z = -self.labels[c] * (self.vec[c] @ x)
        return float(np.logaddexp(0.0, z) + 0.5 * self.lam * (x @ x))

    def component_grad(self, i: int, j: int, x) -> np.ndarray:
        c = self._flat(i, j)
        x = self._check_x(x)
        return self._grads_at(np.array([c]), x[None, :])[0]

    def _grads_at(self, comps: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Gradients of components ``comps[r]`` at points ``X[r]``."""
        if self.family == "quadratic":
            return np.einsum("rij,rj->ri", self.A[comps], X) + self.vec[comps]
        feats = self.vec[comps]
        y = self.labels[comps]
        z = y * np.einsum("rj,rj->r", feats, X)
        coef = -y * _expit(-z)
        return coef[:, None] * feats + self.lam * X

    def local_full_grad(self, i: int, x) -> np.ndarray:
        if not 0 <= i < self.n:
            raise UsageError(f"node index {i} outside [0, {self.n})")
        x = self._check_x(x)
        lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
        comps = np.arange(lo, hi)
        G = self._grads_at(comps, np.broadcast_to(x, (hi - lo, self.p)))
        return G.sum(axis=0) / self.m[i]

    def local_full_grads(self, X) -> np.ndarray:
        """Stacked ``[grad f_1(x_1); ...; grad f_n(x_n)]`` for an ``n x p`` matrix."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape != (self.n, self.p):
            raise UsageError(f"expected shape ({self.n}, {self.p}), got {X.shape}")
        owner = self.node_of_component()
        G = self._grads_at(np.arange(self.total_components), X[owner])
        return np.add.reduceat(G, self.offsets[:-1], axis=0) / np.asarray(self.m)[:, None]

    def global_grad(self, x) -> np.ndarray:
        x = self._check_x(x)
        return self.local_full_grads(np.broadcast_to(x, (self.n, self.p))).mean(axis=0)

    def global_value(self, x) -> float:
        x = self._check_x(x)
        total = 0.0
        for i in range(self.n):
            total += sum(self.component_value(i, j, x) for j in range(self.m[i])) / self.m[i]
        return total / self.n


def _expit(z):
    # 1 / (1 + exp(-z)) without overflow warnings for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _normalize_m(n: int, m) -> tuple:
    if isinstance(m, (int, np.integer)):
        m = [int(m)] * n
    m = tuple(int(v) for v in m)
    if len(m) != n:
        raise ConfigError(f"need one component count per node: n={n}, got {len(m)} counts")
    if any(v < 1 for v in m):
        raise ConfigError(f"component counts must be >= 1, got {m}")
    return m


def _offsets(m: tuple) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(m)]).astype(np.int64)


def _weights(m: tuple) -> np.ndarray:
    """Per-component weight in f: component (i, j) enters with 1/(n m_i)."""
    n = len(m)
    return np.repeat([1.0 / (n * mi) for mi in m], m)


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def _quadratic_problem(n, m, A, b, mu, ell) -> Problem:
    p = A.shape[1]
    w = _weights(m)
    Abar = np.einsum("c,cij->ij", w, A)
    bbar = w @ b
    x_star = np.linalg.solve(Abar, -bbar)
    if not np.all(np.isfinite(x_star)):
        raise InternalError("quadratic minimizer solve produced non-finite values")
    offsets = _offsets(m)
    labels = np.zeros(0)
    _freeze(A, b, x_star, offsets, labels)
    return Problem("quadratic", n, m, p, float(mu), float(ell), x_star, offsets, A, b, labels)


def make_quadratic(n: int, m, p: int, mu: float, ell: float, seed=None) -> Problem:
    """Random quadratic finite sum whose Hessian spectra lie in ``[mu, ell]``.

    Each ``A_ij = U^T diag(lam) U`` with a random orthogonal ``U``.  The
    first component gets eigenvalue ``mu`` and the last gets ``ell``, so the
    declared constants are attained.
    """
    if not mu > 0:
        raise ConfigError(f"mu must be > 0, got {mu}")
    if not ell >= mu:
        raise ConfigError(f"ell must be >= mu, got ell={ell}, mu={mu}")
    if p < 1 or n < 1:
        raise ConfigError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    m = _normalize_m(n, m)
    rng = np.random.default_rng(seed)
    N = sum(m)
    lams = rng.uniform(mu, ell, size=(N, p))
    lams[0, 0] = mu
    lams[-1, -1] = ell
    A = np.empty((N, p, p))
    for c in range(N):
        q, r = np.linalg.qr(rng.standard_normal((p, p)))
        q = q * np.sign(np.diag(r))
        Ac = (q * lams[c]) @ q.T
        A[c] = 0.5 * (Ac + Ac.T)
    b = rng.standard_normal((N, p))
    eig = np.linalg.eigvalsh(A)
    if eig.min() <= 0:
        raise InternalError("assembled component matrix is not positive definite")
    return _quadratic_problem(n, m, A, b, mu, ell)


def quadratic_from_components(A_nodes, b_nodes, mu=None, ell=None) -> Problem:
    """Quadratic problem from explicit per-node lists of ``A_ij`` and ``b_ij``.

    Without explicit ``mu``/``ell`` the extreme component eigenvalues are used.
    """
    n = len(A_nodes)
    if len(b_nodes) != n:
        raise ConfigError("A_nodes and b_nodes must list the same number of nodes")
    m = _normalize_m(n, [len(a) for a in A_nodes])
    A = np.array([np.atleast_2d(np.asarray(a, dtype=np.float64)) for node in A_nodes for a in node])
    b = np.array([np.atleast_1d(np.asarray(v, dtype=np.float64)) for node in b_nodes for v in node])
    if A.ndim != 3 or A.shape[1] != A.shape[2] or b.shape != A.shape[:2]:
        raise ConfigError(f"inconsistent component shapes: A {A.shape}, b {b.shape}")
    if not np.allclose(A, np.transpose(A, (0, 2, 1))):
        raise ConfigError("component matrices must be symmetric")
    eig = np.linalg.eigvalsh(A)
    if eig.min() <= 0:
        raise ConfigError("component matrices must be positive definite")
    mu = float(eig.min()) if mu is None else float(mu)
    ell = float(eig.max()) if ell is None else float(ell)
    if eig.min() < mu * (1 - 1e-12) or eig.max() > ell * (1 + 1e-12):
        raise ConfigError("declared (mu, ell) do not bound the component spectra")
    return _quadratic_problem(n, m, A, b, mu, ell)


def _reglog_minimizer(features, labels, lam, ell, m, x0=None) -> np.ndarray:
    w = _weights(m)
    x = np.zeros(features.shape[1]) if x0 is None else np.array(x0, dtype=np.float64)
    step = 1.0 / ell
    for _ in range(REGLOG_MAX_ITER):
        z = labels * (features @ x)
        g = (w * (-labels * _expit(-z))) @ features + lam * x
        if np.linalg.norm(g) <= REGLOG_GRAD_TOL:
            return x
        x = x - step * g
    raise InternalError(f"reglog minimizer did not reach gradient norm {REGLOG_GRAD_TOL}")


def _reglog_problem(n, m, features, labels, lam) -> Problem:
    ell = lam + float(np.max(np.einsum("cj,cj->c", features, features))) / 4.0
    x_star = _reglog_minimizer(features, labels, lam, ell, m)
    offsets = _offsets(m)
    A = np.zeros((0, features.shape[1], features.shape[1]))
    _freeze(features, labels, x_star, offsets, A)
    return Problem("reglog", n, m, features.shape[1], float(lam), ell, x_star, offsets, A,
                   features, labels, float(lam))


def make_reglog(n: int, m, p: int, lam: float, seed=None) -> Problem:
    """Random ridge-regularized logistic regression, ``mu = lam``.

    Labels come from a random linear classifier with 10% of them flipped.
    """
    if not lam > 0:
        raise ConfigError(f"lambda must be > 0, got {lam}")
    if p < 1 or n < 1:
        raise ConfigError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    m = _normalize_m(n, m)
    rng = np.random.default_rng(seed)
    N = sum(m)
    features = rng.standard_normal((N, p)) / np.sqrt(p)
    w_true = rng.standard_normal(p)
    labels = np.where(features @ w_true >= 0, 1.0, -1.0)
    flip = rng.random(N) < 0.1
    labels[flip] = -labels[flip]
    return _reglog_problem(n, m, features, labels, lam)


def reglog_from_components(feature_nodes, label_nodes, lam: float) -> Problem:
    n = len(feature_nodes)
    m = _normalize_m(n, [len(f) for f in feature_nodes])
    features = np.array([np.atleast_1d(np.asarray(a, dtype=np.float64))
                         for node in feature_nodes for a in node])
    labels = np.array([float(y) for node in label_nodes for y in node])
    if features.ndim != 2 or labels.shape != (features.shape[0],):
        raise ConfigError("inconsistent feature/label shapes")
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ConfigError("labels must be -1 or +1")
    if not lam > 0:
        raise ConfigError(f"lambda must be > 0, got {lam}")
    return _reglog_problem(n, m, features, labels, lam)


# ---------------------------------------------------------------- text format
#
# One "key values..." record per line.  Floats are written with repr(), the
# shortest string that round-trips, so a reload is bit-for-bit identical.

_HEADER = "gtsvrg-problem 1"


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def save_problem(P: Problem, path) -> None:
    lines = [
        _HEADER,
        f"family {P.family}",
        f"n {P.n}",
        f"p {P.p}",
        "m " + " ".join(str(v) for v in P.m),
        f"mu {P.mu!r}",
        f"ell {P.ell!r}",
        f"lam {P.lam!r}",
        "x_star " + _fmt(P.x_star),
    ]
    for c in range(P.total_components):
        if P.family == "quadratic":
            lines.append(f"A {c} " + _fmt(P.A[c]))
            lines.append(f"b {c} " + _fmt(P.vec[c]))
        else:
            lines.append(f"a {c} " + _fmt(P.vec[c]))
            lines.append(f"y {c} {float(P.labels[c])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_problem(path) -> Problem:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise ConfigError(f"{path}: missing '{_HEADER}' header")
    head, rows = {}, {}
    for ln in lines[1:]:
        if not ln.strip():
            continue
        key, *rest = ln.split()
        if key in ("A", "b", "a", "y"):
            rows.setdefault(key, {})[int(rest[0])] = [float(v) for v in rest[1:]]
        else:
            head[key] = rest
    try:
        family = head["family"][0]
        n, p = int(head["n"][0]), int(head["p"][0])
        m = tuple(int(v) for v in head["m"])
        mu, ell, lam = float(head["mu"][0]), float(head["ell"][0]), float(head["lam"][0])
        x_star = np.array([float(v) for v in head["x_star"]])
    except (KeyError, IndexError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed header field ({exc})") from exc
    N = sum(m)
    offsets = _offsets(m)
    if family == "quadratic":
        A = np.array([rows["A"][c] for c in range(N)]).reshape(N, p, p)
        vec = np.array([rows["b"][c] for c in range(N)]).reshape(N, p)
        labels = np.zeros(0)
    elif family == "reglog":
        A = np.zeros((0, p, p))
        vec = np.array([rows["a"][c] for c in range(N)]).reshape(N, p)
        labels = np.array([rows["y"][c][0] for c in range(N)])
    else:
        raise ConfigError(f"{path}: unknown family {family!r}")
    _freeze(A, vec, labels, x_star, offsets)
    return Problem(family, n, m, p, mu, ell, x_star, offsets, A, vec, labels, lam)
