"""Pure NumPy implementation of the inner-loop kernel.

Same signature and arithmetic order as the compiled ``_kernels`` module.
Nodes are vectorized; dot products over the node and coordinate axes are
unrolled into ascending-index accumulations so results do not depend on BLAS
blocking.  With ``num_threads > 1`` node rows are split into blocks that
run on a thread pool; each row's arithmetic is unchanged, so the output is
bitwise identical to the sequential path.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)


def _mix(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def _hash(seed, nodes, t, k):
    one = np.uint64(1)
    h = _mix(np.full(nodes.shape, seed, dtype=np.uint64) + GOLDEN)
    h = _mix(h + (nodes + one) * GOLDEN)
    h = _mix(h + (np.uint64(t) + one) * GOLDEN)
    return _mix(h + (np.uint64(k) + one) * GOLDEN)


def draw_indices(seed, t, k, m):
    """Component index drawn by every node for the step leaving ``(t, k)``."""
    m = np.asarray(m, dtype=np.int64)
    with np.errstate(over="ignore"):
        h = _hash(np.uint64(seed), np.arange(len(m), dtype=np.uint64), t, k)
    return (h % m.astype(np.uint64)).astype(np.int64)


def _component_grads(family, comps, X, A, vec, labels, lam):
    p = X.shape[1]
    if family == 0:
        Ac = A[comps]
        acc = np.zeros_like(X)
        for q in range(p):
            acc = acc + Ac[:, :, q] * X[:, q, None]
        return acc + vec[comps]
    feats = vec[comps]
    acc = np.zeros(X.shape[0])
    for q in range(p):
        acc = acc + feats[:, q] * X[:, q]
    y = labels[comps]
    with np.errstate(over="ignore"):
        coef = -y / (1.0 + np.exp(y * acc))
    return coef[:, None] * feats + lam * X


def _mix_rows(W, Z, rows):
    acc = np.zeros((len(rows), Z.shape[1]))
    for r in range(W.shape[0]):
        acc = acc + W[rows, r, None] * Z[r]
    return acc


def _block_update(rows, W, x, y, v, snap_x, snap_grad, family, A, vec, labels, lam,
                  offsets, alpha, seed, t, k):
    xn = _mix_rows(W, x, rows) - alpha * y[rows]
    m = offsets[1:] - offsets[:-1]
    comps = offsets[rows] + draw_indices(seed, t, k, m)[rows]
    g1 = _component_grads(family, comps, xn, A, vec, labels, lam)
    g2 = _component_grads(family, comps, snap_x[rows], A, vec, labels, lam)
    vn = (g1 - g2) + snap_grad[rows]
    yn = (_mix_rows(W, y, rows) + vn) - v[rows]
    return xn, yn, vn


def gtsvrg_steps(W, x, y, v, snap_x, snap_grad, family, A, vec, labels, lam, offsets,
                 alpha, seed, t, k0, steps, num_threads=1):
    """Run ``steps`` inner iterations in place; return the completed count."""
    n = x.shape[0]
    offsets = np.asarray(offsets, dtype=np.int64)
    if num_threads > 1 and n > 1:
        blocks = [b for b in np.array_split(np.arange(n), min(num_threads, n)) if len(b)]
        pool = ThreadPoolExecutor(max_workers=len(blocks))
    else:
        blocks, pool = [np.arange(n)], None
    done = 0
    try:
        for s in range(steps):
            args = (W, x, y, v, snap_x, snap_grad, family, A, vec, labels, lam,
                    offsets, alpha, seed, t, k0 + s)
            if pool is None:
                parts = [_block_update(blocks[0], *args)]
            else:
                parts = list(pool.map(lambda rows: _block_update(rows, *args), blocks))
            xn = np.concatenate([pt[0] for pt in parts])
            yn = np.concatenate([pt[1] for pt in parts])
            vn = np.concatenate([pt[2] for pt in parts])
            x[...] = xn
            y[...] = yn
            v[...] = vn
            done = s + 1
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return done
