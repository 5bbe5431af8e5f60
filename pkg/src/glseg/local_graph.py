"""Co-occurrence statistics of nearby regions and the local affinity W.

For every feature channel a symmetric 2-D Gaussian kernel density over the
values of spatially close region pairs is tabulated on a B x B grid of bin
centres. The co-occurrence of two values is the pointwise mutual information
``log P(u, v) / (P(u) P(v))`` read from that grid, and the affinity of two
regions is the exponentiated sum of their per-channel co-occurrences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import ContractError, ModelError
from .regions import RegionFeatures, RegionMap

log = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-8
MIN_BANDWIDTH = 0.02


@dataclass(frozen=True)
class CoOccurrenceModel:
    joint: np.ndarray       # (C, B, B), each slice sums to 1, symmetric
    marginal: np.ndarray    # (C, B), each row sums to 1
    bandwidth: np.ndarray   # (C,)
    n_samples: int
    floor: float = DENSITY_FLOOR

    @property
    def bins(self) -> int:
        return self.joint.shape[1]

    @property
    def n_channels(self) -> int:
        return self.joint.shape[0]

    def co_floor(self) -> float:
        """Smallest co-occurrence value reachable for any channel."""
        return float(np.log(self.floor))


@dataclass(frozen=True)
class LocalAffinity:
    W: sparse.csr_matrix
    D: np.ndarray


def close_pairs(centroids: np.ndarray, radius: float) -> np.ndarray:
    """Unordered index pairs (i < j) with centroid distance <= radius."""
    pairs = cKDTree(centroids).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.sort(pairs, axis=1)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def silverman_bandwidth(values: np.ndarray, n_pairs: int) -> float:
    """Silverman's rule for a 2-D Gaussian kernel, floored at MIN_BANDWIDTH."""
    sd = float(np.std(values))
    return max(MIN_BANDWIDTH, sd * max(n_pairs, 1) ** (-1.0 / 6.0))


def kde_grid(u: np.ndarray, v: np.ndarray, h: float, bins: int) -> np.ndarray:
    """Symmetrised Gaussian kernel sum over value pairs, normalised to mass 1."""
    centers = (np.arange(bins) + 0.5) / bins
    gu = np.exp(-0.5 * ((centers[None, :] - u[:, None]) / h) ** 2)
    gv = np.exp(-0.5 * ((centers[None, :] - v[:, None]) / h) ** 2)
    joint = gu.T @ gv
    joint = joint + joint.T
    return joint / joint.sum()


def fit_cooccurrence(regions: RegionMap, feats: RegionFeatures, e1: float,
                     bandwidth: float | None = None, bins: int = 64,
                     channels: np.ndarray | None = None) -> CoOccurrenceModel:
    """Fit one co-occurrence density per local feature channel.

    Samples are all unordered region pairs whose centroids lie within ``e1``
    pixels. ``bandwidth=None`` picks one per channel by Silverman's rule.
    """
    if regions.n < 2:
        raise ModelError("co-occurrence needs at least two regions")
    if not e1 > 0:
        raise ContractError(f"e1 must be positive, got {e1}")
    if bins < 8:
        raise ContractError(f"need at least 8 bins, got {bins}")
    x = feats.local_channels() if channels is None else np.asarray(channels, float)
    pairs = close_pairs(regions.centroids, e1)
    if len(pairs) == 0:
        log.warning("no region pairs within e1=%g; sampling adjacent pairs", e1)
        pairs = regions.pairs
    if len(pairs) == 0:
        raise ModelError("no region pairs to sample")
    joints, hs = [], []
    for c in range(x.shape[1]):
        u, v = x[pairs[:, 0], c], x[pairs[:, 1], c]
        h = bandwidth if bandwidth is not None else silverman_bandwidth(
            np.concatenate([u, v]), len(pairs))
        hs.append(h)
        joints.append(kde_grid(u, v, h, bins))
    joint = np.stack(joints)
    return CoOccurrenceModel(joint, joint.sum(axis=2), np.array(hs), len(pairs))


def _interp_weights(values: np.ndarray, bins: int):
    pos = np.clip(np.asarray(values, float) * bins - 0.5, 0.0, bins - 1.0)
    lo = np.minimum(np.floor(pos).astype(np.int64), bins - 2)
    return lo, pos - lo


def co_channels(model: CoOccurrenceModel, vi: np.ndarray, vj: np.ndarray) -> np.ndarray:
    """Per-channel co-occurrence for value arrays of shape (P, C)."""
    vi, vj = np.atleast_2d(vi), np.atleast_2d(vj)
    # order each pair so that co(a, b) and co(b, a) are bit-identical
    vi, vj = np.minimum(vi, vj), np.maximum(vi, vj)
    b = model.bins
    li, ti = _interp_weights(vi, b)
    lj, tj = _interp_weights(vj, b)
    c = np.arange(model.n_channels)[None, :]
    J, m = model.joint, model.marginal
    pij = ((1 - ti) * (1 - tj) * J[c, li, lj] + ti * (1 - tj) * J[c, li + 1, lj]
           + (1 - ti) * tj * J[c, li, lj + 1] + ti * tj * J[c, li + 1, lj + 1])
    pi = (1 - ti) * m[c, li] + ti * m[c, li + 1]
    pj = (1 - tj) * m[c, lj] + tj * m[c, lj + 1]
    # floor the ratio, not the densities: value pairs outside the support of
    # the marginals get the floor rather than a 0/0 blow-up
    f = model.floor
    return np.log(np.maximum(pij / (pi * pj + f * f), f))


def co(model: CoOccurrenceModel, v_i: float, v_j: float, channel: int = 0) -> float:
    """Co-occurrence of two scalar values on one channel."""
    vi = np.zeros((1, model.n_channels))
    vj = np.zeros((1, model.n_channels))
    vi[0, channel] = v_i
    vj[0, channel] = v_j
    return float(co_channels(model, vi, vj)[0, channel])


def build_affinity(regions: RegionMap, feats: RegionFeatures, model: CoOccurrenceModel,
                   e2: float, channels: np.ndarray | None = None) -> LocalAffinity:
    """Sparse symmetric W over region pairs with centroid distance <= e2."""
    x = feats.local_channels() if channels is None else np.asarray(channels, float)
    n = regions.n
    pairs = close_pairs(regions.centroids, e2)
    if len(pairs):
        score = co_channels(model, x[pairs[:, 0]], x[pairs[:, 1]]).sum(axis=1)
        w = np.exp(score)
    else:
        w = np.zeros(0)
    connected = np.zeros(n, dtype=bool)
    connected[pairs.ravel()] = True
    extra = []
    if not connected.all():
        tree = cKDTree(regions.centroids)
        floor_w = float(np.exp(model.n_channels * model.co_floor()))
        for i in np.flatnonzero(~connected):
            _, nn = tree.query(regions.centroids[i], k=2)
            j = int(nn[1] if nn[0] == i else nn[0])
            log.warning("region %d has no neighbour within e2=%g; linking to %d", i, e2, j)
            extra.append((min(i, j), max(i, j), floor_w))
    rows = [pairs[:, 0]]
    cols = [pairs[:, 1]]
    vals = [w]
    if extra:
        seen = {(int(i), int(j)) for i, j in pairs}
        extra = [e for e in dict.fromkeys(extra) if (e[0], e[1]) not in seen]
        rows.append(np.array([e[0] for e in extra], dtype=np.int64))
        cols.append(np.array([e[1] for e in extra], dtype=np.int64))
        vals.append(np.array([e[2] for e in extra]))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    W = sparse.coo_matrix((np.concatenate([v, v]), (np.concatenate([r, c]),
                                                     np.concatenate([c, r]))),
                          shape=(n, n)).tocsr()
    W.sum_duplicates()
    return LocalAffinity(W, np.asarray(W.sum(axis=1)).ravel())
