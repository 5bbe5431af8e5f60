"""EigenHistograms, the k-means prior, Pylon potentials and the beta sweep."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from . import pylon
from .errors import ContractError, ModelError
from .kmeans import kmeans
from .regions import RegionMap, SegTree
from .spectral import EigenBasis, normalize_eigenvector


@dataclass(frozen=True)
class PriorSegmentation:
    assignment: np.ndarray   # (N,) segment ids in [0, L)
    histograms: np.ndarray   # (L, d*L) per-segment EigenHistograms
    inertia: float = 0.0

    @property
    def n_segments(self) -> int:
        return self.histograms.shape[0]


def histogram_bins(values: np.ndarray, L: int) -> np.ndarray:
    """Bin index of values in [0, 1] over L uniform bins; 1.0 goes to the last."""
    return np.minimum(np.floor(np.asarray(values) * L).astype(np.int64), L - 1)


def leaf_counts(basis: EigenBasis | np.ndarray, sizes, L: int) -> np.ndarray:
    """Pixel-weighted histogram counts of every region, shape (N, d, L).

    Each eigenvector is min-max normalised first, so a region (which holds one
    value per eigenvector) contributes its pixel count to one bin per block.
    """
    Y = basis.vectors if isinstance(basis, EigenBasis) else np.asarray(basis, float)
    n, d = Y.shape
    sizes = np.ones(n) if sizes is None else np.asarray(sizes, float)
    counts = np.zeros((n, d, L))
    for k in range(d):
        counts[np.arange(n), k, histogram_bins(normalize_eigenvector(Y[:, k]), L)] = sizes
    return counts


def node_counts(tree: SegTree, leaf: np.ndarray) -> np.ndarray:
    """Accumulate leaf counts up the tree, shape (2N-1, d, L)."""
    out = np.zeros((tree.n_nodes,) + leaf.shape[1:])
    out[:tree.n_leaves] = leaf
    for node in range(tree.n_leaves, tree.n_nodes):
        a, b = tree.children[node]
        out[node] = out[a] + out[b]
    return out


def normalize_blocks(counts: np.ndarray) -> np.ndarray:
    """Normalise each d-block to sum 1 and flatten to length d*L."""
    tot = counts.sum(axis=-1, keepdims=True)
    h = np.divide(counts, tot, out=np.zeros_like(counts), where=tot > 0)
    return h.reshape(h.shape[:-2] + (-1,))


def eigen_histogram(node: int, tree: SegTree, basis, L: int, sizes=None) -> np.ndarray:
    counts = node_counts(tree, leaf_counts(basis, sizes, L))
    return normalize_blocks(counts[node])


def kmeans_prior(basis: EigenBasis | np.ndarray, L: int, seed: int = 0, sizes=None,
                 weighted: bool = False, max_iter: int = 100) -> PriorSegmentation:
    """Hard partition of the region embedding into L segments."""
    Y = basis.vectors if isinstance(basis, EigenBasis) else np.asarray(basis, float)
    n = len(Y)
    if not 2 <= L <= n:
        raise ContractError(f"L must lie in [2, N={n}], got {L}")
    sizes_arr = np.ones(n) if sizes is None else np.asarray(sizes, float)
    assign, _, inertia = kmeans(Y, L, seed=seed,
                                weights=sizes_arr if weighted else None,
                                max_iter=max_iter)
    counts = leaf_counts(Y, sizes_arr, L)
    seg = np.zeros((L,) + counts.shape[1:])
    np.add.at(seg, assign, counts)
    return PriorSegmentation(assign, normalize_blocks(seg), inertia)


def unary(node_hist: np.ndarray, k: int, beta: float, prior: PriorSegmentation) -> float:
    """Cost of giving a node label ``k`` (1-based); label 0 costs nothing."""
    if k == 0:
        return 0.0
    if not 1 <= k <= prior.n_segments:
        raise ContractError(f"label {k} outside [1, {prior.n_segments}]")
    return -beta * float(np.dot(node_hist, prior.histograms[k - 1]))


def unary_table(node_hists: np.ndarray, prior: PriorSegmentation, beta: float) -> np.ndarray:
    """(2N-1, L) table with entry [i, k-1] the cost of label k at node i."""
    return -beta * (node_hists @ prior.histograms.T)


def pairwise_table(regions: RegionMap, edges: np.ndarray, gamma_b: float = 5.0,
                   weight: float = 1.0):
    """Adjacent leaf pairs and their cut costs.

    The cost of separating two leaves is
    ``weight * |border| * exp(-gamma_b * mean edge strength on the border)``,
    so cutting along strong edges is cheap.
    """
    pairs, length, mean = regions.border_stats(edges)
    return pairs, weight * length * np.exp(-gamma_b * mean)


def pairwise(i: int, j: int, edges: np.ndarray, regions: RegionMap,
             gamma_b: float = 5.0, weight: float = 1.0) -> float:
    if j not in regions.adjacency[i]:
        raise ContractError(f"regions {i} and {j} are not adjacent")
    pairs, costs = pairwise_table(regions, edges, gamma_b, weight)
    a, b = min(i, j), max(i, j)
    hit = np.flatnonzero((pairs[:, 0] == a) & (pairs[:, 1] == b))
    return float(costs[hit[0]])


def pylon_labels(tree: SegTree, node_hists: np.ndarray, prior: PriorSegmentation,
                 beta: float, pairs: np.ndarray, costs: np.ndarray) -> pylon.PylonLabeling:
    if not beta > 0:
        raise ContractError(f"beta must be positive, got {beta}")
    return pylon.pylon_infer(tree, unary_table(node_hists, prior, beta), pairs, costs)


def _components(n: int, pairs: np.ndarray, joined: np.ndarray) -> np.ndarray:
    p = pairs[joined]
    g = sparse.coo_matrix((np.ones(len(p)), (p[:, 0], p[:, 1])), shape=(n, n))
    _, comp = connected_components(g, directed=False)
    # renumber in order of first appearance for stable ids
    _, first = np.unique(comp, return_index=True)
    order = np.argsort(np.argsort(first))
    return order[comp]


@dataclass(frozen=True)
class Hierarchy:
    """Soft region boundaries from averaging binary boundary maps.

    ``strength[p]`` is the fraction of averaged maps (the superpixel map plus
    one map per beta) in which adjacent pair ``pairs[p]`` is separated.
    Boundaries with strength above a threshold t are kept; regions joined by
    weaker boundaries are merged.
    """

    regions: RegionMap
    pairs: np.ndarray
    strength: np.ndarray
    leaf_labels: np.ndarray  # (n_betas, N)
    node_labels: np.ndarray  # (n_betas, 2N-1) Pylon labels per beta

    def region_partition(self, t: float) -> np.ndarray:
        return _components(self.regions.n, self.pairs, self.strength <= t)

    def segmentation(self, t: float) -> np.ndarray:
        return self.region_partition(t)[self.regions.labels]

    def thresholds(self) -> np.ndarray:
        """Distinct boundary strengths: one threshold per distinct scale."""
        return np.unique(np.concatenate([[0.0], self.strength]))

    def ucm2(self) -> np.ndarray:
        """Boundary strengths on the doubled (2H+1) x (2W+1) grid.

        Pixel (y, x) sits at (2y+1, 2x+1); the edge between horizontally
        adjacent pixels at (2y+1, 2x+2), between vertical ones at
        (2y+2, 2x+1). Even-even corners take the max of their incident edges.
        """
        lab = self.regions.labels
        h, w = lab.shape
        n = self.regions.n
        lut = sparse.coo_matrix(
            (np.concatenate([self.strength, self.strength]),
             (np.concatenate([self.pairs[:, 0], self.pairs[:, 1]]),
              np.concatenate([self.pairs[:, 1], self.pairs[:, 0]]))),
            shape=(n, n)).tocsr()
        out = np.zeros((2 * h + 1, 2 * w + 1))
        a, b = lab[:, :-1], lab[:, 1:]
        out[1:-1:2, 2:-1:2] = np.asarray(lut[a.ravel(), b.ravel()]).reshape(a.shape)
        a, b = lab[:-1, :], lab[1:, :]
        out[2:-1:2, 1:-1:2] = np.asarray(lut[a.ravel(), b.ravel()]).reshape(a.shape)
        corners = np.zeros((h + 1, w + 1))
        hz = out[1::2, 0::2]   # (h, w+1) horizontal-edge slots
        vt = out[0::2, 1::2]   # (h+1, w) vertical-edge slots
        corners[:-1, :] = np.maximum(corners[:-1, :], hz)
        corners[1:, :] = np.maximum(corners[1:, :], hz)
        corners[:, :-1] = np.maximum(corners[:, :-1], vt)
        corners[:, 1:] = np.maximum(corners[:, 1:], vt)
        out[0::2, 0::2] = corners
        return out

    def soft_map(self) -> np.ndarray:
        """Per-pixel view: the strongest boundary touching each pixel."""
        u = self.ucm2()
        return np.maximum.reduce([u[1::2, 0:-1:2], u[1::2, 2::2],
                                  u[0:-1:2, 1::2], u[2::2, 1::2]])


def threshold_ucm2(ucm2: np.ndarray, t: float) -> np.ndarray:
    """Connected components of pixels whose separating edges are <= t."""
    ucm2 = np.asarray(ucm2, dtype=np.float64)
    h, w = (ucm2.shape[0] - 1) // 2, (ucm2.shape[1] - 1) // 2
    idx = np.arange(h * w).reshape(h, w)
    hz = ucm2[1::2, 2:-1:2] <= t
    vt = ucm2[2:-1:2, 1::2] <= t
    r = np.concatenate([idx[:, :-1][hz], idx[:-1, :][vt]])
    c = np.concatenate([idx[:, 1:][hz], idx[1:, :][vt]])
    pairs = np.column_stack([r, c])
    return _components(h * w, pairs, np.ones(len(pairs), dtype=bool)).reshape(h, w)


def beta_sweep(tree: SegTree, prior: PriorSegmentation, betas: Sequence[float],
               regions: RegionMap, node_hists: np.ndarray, pairs: np.ndarray,
               costs: np.ndarray, checks: bool = True) -> Hierarchy:
    """Run Pylon inference for every beta and average the boundary maps."""
    if len(betas) == 0:
        raise ContractError("beta list is empty")
    nodes, leaf = [], []
    for beta in betas:
        res = pylon_labels(tree, node_hists, prior, beta, pairs, costs)
        if checks and not pylon.is_valid(tree, res.labels):
            raise ModelError(f"Pylon labeling for beta={beta} violates the path constraint")
        nodes.append(res.labels)
        leaf.append(pylon.leaf_labels(tree, res.labels))
    leaf = np.array(leaf)
    split = (leaf[:, pairs[:, 0]] != leaf[:, pairs[:, 1]]).sum(axis=0)
    strength = (1.0 + split) / (1.0 + len(betas))
    return Hierarchy(regions, pairs, strength, leaf, np.array(nodes))
