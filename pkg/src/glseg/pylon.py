"""Pylon inference on a binary merge tree.

A labeling assigns every tree node a label in {0, 1, ..., L} such that each
root-to-leaf path carries exactly one nonzero label. Its energy is the sum of
the unaries of the nonzero nodes plus a boundary cost for every pair of
adjacent leaves whose inherited labels differ.

Two-label problems are solved exactly with one minimum cut. More labels use
alpha-expansion: each move lets every leaf either keep its current label or
switch to alpha, where both choices may be made at any tree level (the
"keep" option at node i uses the label i currently inherits). Each move is a
two-label problem and is again one minimum cut.
"""

from __future__ import annotations

from dataclasses import dataclass

import maxflow
import numpy as np

from .regions import SegTree

FORBIDDEN = np.inf


@dataclass(frozen=True)
class PylonLabeling:
    labels: np.ndarray   # (2N-1,) in {0..L}
    energy: float


def inherited(tree: SegTree, labels: np.ndarray) -> np.ndarray:
    """Label of the nearest nonzero ancestor-or-self of every node (0 if none)."""
    out = np.asarray(labels, dtype=np.int64).copy()
    for node in range(tree.n_nodes - 2, -1, -1):   # parents have larger ids
        if out[node] == 0:
            out[node] = out[tree.parent[node]]
    return out


def leaf_labels(tree: SegTree, labels: np.ndarray) -> np.ndarray:
    return inherited(tree, labels)[:tree.n_leaves]


def is_valid(tree: SegTree, labels: np.ndarray) -> bool:
    """Exactly one nonzero label on every root-to-leaf path."""
    labels = np.asarray(labels)
    count = (labels != 0).astype(np.int64)
    for node in range(tree.n_nodes - 2, -1, -1):
        count[node] += count[tree.parent[node]]
    return bool(np.all(count[:tree.n_leaves] == 1))


def energy(tree: SegTree, unary: np.ndarray, pairs: np.ndarray, costs: np.ndarray,
           labels: np.ndarray) -> float:
    """Energy of a valid labeling; ``unary[i, k-1]`` is the cost of label k."""
    labels = np.asarray(labels)
    nz = np.flatnonzero(labels)
    total = float(unary[nz, labels[nz] - 1].sum())
    if len(pairs):
        leaf = leaf_labels(tree, labels)
        total += float(costs[leaf[pairs[:, 0]] != leaf[pairs[:, 1]]].sum())
    return total


def two_label_cut(tree: SegTree, cost_a: np.ndarray, cost_b: np.ndarray,
                  pairs: np.ndarray, e00, e01, e10, e11):
    """Minimise a two-option Pylon energy exactly.

    ``cost_a`` / ``cost_b`` give each node's cost of starting option A / B
    (``np.inf`` forbids it). For each adjacent leaf pair, ``eXY`` is the
    boundary cost when the first leaf takes option X and the second option Y
    (1 = A, 0 = B); the table must be submodular.

    Returns an array over nodes: 1 where option A starts, 2 where B starts,
    0 elsewhere.
    """
    nn = tree.n_nodes
    nl = tree.n_leaves
    parent = tree.parent
    root = tree.root
    forbid_a = ~np.isfinite(cost_a)
    forbid_b = ~np.isfinite(cost_b)
    a = np.where(forbid_a, 0.0, cost_a)
    b = np.where(forbid_b, 0.0, cost_b)

    # x-variables for every node, z-variables for internal nodes; a leaf's
    # z-variable is its x-variable (covered by A  <=>  not covered by B)
    xid = np.arange(nn)
    zid = np.concatenate([np.arange(nl), nn + np.arange(nn - nl)])
    nvar = nn + (nn - nl)

    nonroot = np.arange(nn - 1)
    par = parent[nonroot]
    # option A: sum_i a_i (x_i - x_parent(i)), option B: sum_i b_i (z_parent(i) - z_i)
    coef = np.zeros(nvar)
    np.add.at(coef, xid, a)
    np.add.at(coef, xid[par], -a[nonroot])
    np.add.at(coef, zid, -b)
    np.add.at(coef, zid[par], b[nonroot])
    const = b[root]

    e00 = np.asarray(e00, float)
    e01 = np.asarray(e01, float)
    e10 = np.asarray(e10, float)
    e11 = np.asarray(e11, float)
    w = np.maximum(e01 + e10 - e00 - e11, 0.0)
    if len(pairs):
        const += e00.sum()
        np.add.at(coef, pairs[:, 0], e10 - e00)
        np.add.at(coef, pairs[:, 1], e11 - e10)

    big = 1.0 + 2.0 * (np.abs(coef).sum() + w.sum() + abs(const))
    g = maxflow.Graph[float](nvar, 3 * nn + len(pairs))
    ids = g.add_nodes(nvar)
    pos = coef > 0
    g.add_grid_tedges(ids, np.where(pos, coef, 0.0), np.where(pos, 0.0, -coef))

    src, dst = [], []
    src.append(xid[nonroot]); dst.append(xid[par])          # x_parent <= x_i
    internal = nonroot[nonroot >= nl]
    src.append(zid[parent[nonroot]]); dst.append(zid[nonroot])  # z_i <= z_parent
    fa = nonroot[forbid_a[nonroot]]
    src.append(xid[parent[fa]]); dst.append(xid[fa])        # x_i <= x_parent
    fb = internal[forbid_b[internal]]
    src.append(zid[fb]); dst.append(zid[parent[fb]])        # z_parent <= z_i
    s = np.concatenate(src)
    t = np.concatenate(dst)
    keep = s != t
    g.add_edges(s[keep], t[keep], np.full(keep.sum(), big), np.zeros(keep.sum()))
    if forbid_a[root]:
        g.add_tedge(int(xid[root]), big, 0.0)
    if forbid_b[root]:
        g.add_tedge(int(zid[root]), 0.0, big)
    if len(pairs):
        g.add_edges(pairs[:, 0], pairs[:, 1], w, np.zeros(len(w)))
    g.maxflow()
    seg = g.get_grid_segments(ids).astype(np.int64)

    x = seg[xid]
    z = seg[zid]
    x_par = np.zeros(nn, dtype=np.int64)
    z_par = np.ones(nn, dtype=np.int64)
    x_par[nonroot] = x[par]
    z_par[nonroot] = z[par]
    out = np.zeros(nn, dtype=np.int64)
    out[(x == 1) & (x_par == 0)] = 1
    out[(z == 0) & (z_par == 1)] = 2
    return out


def _expansion(tree, unary, pairs, costs, labels, alpha):
    keep = inherited(tree, labels)
    cost_a = unary[:, alpha - 1]
    cost_b = np.full(tree.n_nodes, FORBIDDEN)
    has = keep > 0
    cost_b[has] = unary[np.flatnonzero(has), keep[has] - 1]
    if len(pairs):
        ka = keep[pairs[:, 0]]
        kb = keep[pairs[:, 1]]
        e00 = costs * (ka != kb)
        e10 = costs * (kb != alpha)
        e01 = costs * (ka != alpha)
        e11 = np.zeros(len(pairs))
    else:
        e00 = e01 = e10 = e11 = np.zeros(0)
    move = two_label_cut(tree, cost_a, cost_b, pairs, e00, e01, e10, e11)
    new = np.zeros(tree.n_nodes, dtype=np.int64)
    new[move == 1] = alpha
    new[move == 2] = keep[move == 2]
    return new


def pylon_infer(tree: SegTree, unary: np.ndarray, pairs: np.ndarray, costs: np.ndarray,
                max_cycles: int = 50) -> PylonLabeling:
    """Minimise the Pylon energy.

    ``unary`` has shape (2N-1, L) with ``unary[i, k-1]`` the cost of giving
    node i label k (label 0 is free). ``pairs`` lists adjacent leaves and
    ``costs`` their nonnegative boundary costs.
    """
    unary = np.asarray(unary, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    costs = np.asarray(costs, dtype=np.float64)
    n_labels = unary.shape[1]
    labels = np.zeros(tree.n_nodes, dtype=np.int64)
    labels[tree.root] = int(np.argmin(unary[tree.root])) + 1
    if n_labels == 2:
        # option A is label 1 and option B label 2: a Potts boundary table
        zero = np.zeros_like(costs)
        labels = two_label_cut(tree, unary[:, 0], unary[:, 1], pairs,
                               zero, costs, costs, zero)
    current = energy(tree, unary, pairs, costs, labels)
    for _ in range(max_cycles):
        improved = False
        for alpha in range(1, n_labels + 1):
            cand = _expansion(tree, unary, pairs, costs, labels, alpha)
            e = energy(tree, unary, pairs, costs, cand)
            if e < current - 1e-12 * max(1.0, abs(current)):
                labels, current, improved = cand, e, True
        if not improved:
            break
    return PylonLabeling(labels, current)
