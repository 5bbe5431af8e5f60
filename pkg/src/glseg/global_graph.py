"""Directed global connections from saliency-space reconstruction.

Each region is reconstructed as an affine combination of its R nearest
regions in saliency space, drawn from a pool bounded by a wrap-around image
distance. The coefficients form the rows of K.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .errors import ContractError
from .regions import RegionMap

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GlobalCoefficients:
    K: sparse.csr_matrix
    R: int
    alpha: float


def geodesic_distance(c_i, c_j, width: float, height: float):
    """Distance on the image plane wrapped at its borders (a torus).

    ``c_i`` and ``c_j`` are (x, y) points or arrays of them; broadcasting
    applies.
    """
    d = np.abs(np.asarray(c_i, float) - np.asarray(c_j, float))
    dx = np.minimum(d[..., 0], width - d[..., 0])
    dy = np.minimum(d[..., 1], height - d[..., 1])
    return np.sqrt(dx * dx + dy * dy)


def default_range(width: float, height: float) -> float:
    return 0.75 * max(width, height)


def select_neighbors(i: int, regions: RegionMap, saliency: np.ndarray, R: int,
                     pool_range: float | None = None) -> np.ndarray:
    """The R regions closest to ``i`` in saliency space, ties by lower id.

    Candidates are restricted to regions within ``pool_range`` geodesic
    distance of ``i``.
    """
    if R < 1:
        raise ContractError(f"R must be >= 1, got {R}")
    h, w = regions.shape
    if pool_range is None:
        pool_range = default_range(w, h)
    geo = geodesic_distance(regions.centroids[i], regions.centroids, w, h)
    geo[i] = np.inf
    pool = np.flatnonzero(geo <= pool_range)
    if pool.size == 0 and regions.n > 1:
        log.warning("region %d: empty pool within range %g; using the nearest region",
                    i, pool_range)
        pool = np.array([int(np.argmin(geo))])
    dist = np.linalg.norm(saliency[pool] - saliency[i], axis=1)
    order = pool[np.lexsort((pool, dist))]
    if len(order) < R:
        log.warning("region %d: only %d candidates for R=%d", i, len(order), R)
    return order[:R]


def solve_coefficients(i: int, neighbors, saliency: np.ndarray, alpha: float) -> np.ndarray:
    """Sum-to-one reconstruction weights of region ``i`` from ``neighbors``.

    Solves ``(G + alpha I) w = 1`` with G the Gram matrix of the neighbour
    offsets ``saliency[j] - saliency[i]``, then rescales w to sum to one.
    """
    neighbors = np.asarray(neighbors, dtype=np.int64)
    if neighbors.size == 0:
        raise ContractError(f"region {i} has no neighbours")
    if not alpha > 0:
        raise ContractError(f"alpha must be positive, got {alpha}")
    if neighbors.size == 1:
        return np.ones(1)
    Z = saliency[neighbors] - saliency[i]
    G = Z @ Z.T
    G[np.diag_indices_from(G)] += alpha
    w = linalg.solve(G, np.ones(len(neighbors)), assume_a="sym")
    return w / w.sum()


def build_global(regions: RegionMap, saliency: np.ndarray, R: int, alpha: float,
                 pool_range: float | None = None) -> GlobalCoefficients:
    """Assemble K row by row; row i has its weights at its neighbour columns."""
    n = regions.n
    if n < 2:
        raise ContractError("global connections need at least two regions")
    saliency = np.asarray(saliency, dtype=np.float64)
    rows, cols, vals = [], [], []
    for i in range(n):
        nb = select_neighbors(i, regions, saliency, R, pool_range)
        if nb.size == 0:
            continue
        w = solve_coefficients(i, nb, saliency, alpha)
        rows.append(np.full(nb.size, i))
        cols.append(nb)
        vals.append(w)
    K = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows),
                                                  np.concatenate(cols))), shape=(n, n))
    return GlobalCoefficients(K, R, alpha)
