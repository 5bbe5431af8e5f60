"""Over-segmentation, region adjacency and the binary merge tree."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from skimage import measure, segmentation

from . import gridio
from .errors import ContractError, IngestionError
from .imgproc import ImagePlane, PixelFeatureStack, rgb_to_lab

log = logging.getLogger(__name__)


def crossing_pairs(labels: np.ndarray):
    """Flat pixel indices (p, q) of 4-neighbour pairs with different labels."""
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    horiz = labels[:, :-1] != labels[:, 1:]
    vert = labels[:-1, :] != labels[1:, :]
    p = np.concatenate([idx[:, :-1][horiz], idx[:-1, :][vert]])
    q = np.concatenate([idx[:, 1:][horiz], idx[1:, :][vert]])
    return p, q


@dataclass(frozen=True)
class RegionMap:
    """Per-pixel region ids in [0, n) with geometry and adjacency."""

    labels: np.ndarray
    n: int
    centroids: np.ndarray   # (n, 2) as (x, y)
    sizes: np.ndarray       # (n,) pixel counts
    adjacency: tuple        # tuple of frozensets

    @property
    def shape(self):
        return self.labels.shape

    @classmethod
    def from_labels(cls, labels, split_disconnected=True) -> "RegionMap":
        """Compact arbitrary integer labels into a valid RegionMap.

        Regions made of several 4-connected pieces become separate regions
        when ``split_disconnected`` is set.
        """
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.size == 0:
            raise ContractError(f"labels must be a nonempty 2-D grid, got {labels.shape}")
        if split_disconnected:
            shifted = labels.astype(np.int64) - int(labels.min()) + 1
            comp = measure.label(shifted, background=0, connectivity=1)
            # measure.label numbers components from 1 in raster order
            _, compact = np.unique(comp, return_inverse=True)
        else:
            _, compact = np.unique(labels, return_inverse=True)
        compact = compact.reshape(labels.shape).astype(np.int64)
        n = int(compact.max()) + 1
        h, w = compact.shape
        flat = compact.ravel()
        sizes = np.bincount(flat, minlength=n)
        ys, xs = np.divmod(np.arange(h * w), w)
        cx = np.bincount(flat, weights=xs, minlength=n) / sizes
        cy = np.bincount(flat, weights=ys, minlength=n) / sizes
        p, q = crossing_pairs(compact)
        a, b = flat[p], flat[q]
        keys = np.unique(np.minimum(a, b) * n + np.maximum(a, b))
        nbrs = [set() for _ in range(n)]
        for i, j in zip(*np.divmod(keys, n)):
            nbrs[i].add(int(j))
            nbrs[j].add(int(i))
        return cls(compact, n, np.column_stack([cx, cy]), sizes,
                   tuple(frozenset(s) for s in nbrs))

    @cached_property
    def pairs(self) -> np.ndarray:
        """Sorted (P, 2) array of adjacent region pairs with i < j."""
        out = [(i, j) for i in range(self.n) for j in self.adjacency[i] if i < j]
        return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)

    def border_stats(self, edges: np.ndarray):
        """Per adjacent pair: border length and mean edge strength.

        Border length counts 4-neighbour pixel pairs straddling the two
        regions; each such pair contributes the mean of its two pixels'
        edge strengths.
        """
        p, q = crossing_pairs(self.labels)
        flat = self.labels.ravel()
        e = np.asarray(edges, dtype=np.float64).ravel()
        a, b = flat[p], flat[q]
        keys = np.minimum(a, b) * self.n + np.maximum(a, b)
        uniq, inv = np.unique(keys, return_inverse=True)
        length = np.bincount(inv, minlength=len(uniq)).astype(np.float64)
        strength = np.bincount(inv, weights=0.5 * (e[p] + e[q]), minlength=len(uniq))
        pairs = np.column_stack(np.divmod(uniq, self.n))
        return pairs, length, strength / length


@dataclass(frozen=True)
class RegionFeatures:
    """Region-level means of the pixel feature stack."""

    lab: np.ndarray        # (n, 3) native Lab means
    cov_diag: np.ndarray   # (n, 3)
    saliency: np.ndarray   # (n, 24)
    gray: np.ndarray       # (n,)

    def local_channels(self) -> np.ndarray:
        """The six channels used by the co-occurrence model, each in [0, 1].

        Lab means are rescaled like the saliency channels; RGB variances are
        multiplied by 4, the largest variance a [0, 1] signal can have being
        1/4.
        """
        lab = np.column_stack([self.lab[:, 0] / 100.0,
                               (self.lab[:, 1] + 128.0) / 255.0,
                               (self.lab[:, 2] + 128.0) / 255.0])
        return np.clip(np.column_stack([lab, 4.0 * self.cov_diag]), 0.0, 1.0)


def region_features(regions: RegionMap, pix: PixelFeatureStack) -> RegionFeatures:
    flat = regions.labels.ravel()
    n = regions.n

    def mean(stack):
        stack = stack.reshape(flat.size, -1)
        sums = np.stack([np.bincount(flat, weights=stack[:, k], minlength=n)
                         for k in range(stack.shape[1])], axis=1)
        return sums / regions.sizes[:, None]

    return RegionFeatures(lab=mean(pix.lab), cov_diag=mean(pix.cov_diag),
                          saliency=mean(pix.saliency), gray=mean(pix.gray)[:, 0])


def compute_edges_fallback(img: ImagePlane, sigma: float = 1.0) -> np.ndarray:
    """Gradient magnitude of the smoothed Lab image, normalised to [0, 1]."""
    lab = rgb_to_lab(img).data
    mag = np.zeros(lab.shape[:2])
    for c in range(3):
        ch = ndimage.gaussian_filter(lab[:, :, c], sigma, mode="nearest")
        gy, gx = np.gradient(ch) if min(ch.shape) > 1 else (np.zeros_like(ch),) * 2
        mag += gx * gx + gy * gy
    mag = np.sqrt(mag)
    peak = mag.max()
    if peak < 1e-9:
        return np.zeros_like(mag)
    return np.clip(mag / peak, 0.0, 1.0)


def ingest_external(labels_path, edges_path) -> tuple[RegionMap, np.ndarray]:
    """Load a superpixel label map and an edge map produced elsewhere."""
    labels = gridio.read_label_grid(labels_path)
    edges = gridio.read_scalar_grid(edges_path)
    return validate_external(labels, edges)


def validate_external(labels, edges) -> tuple[RegionMap, np.ndarray]:
    labels = np.asarray(labels)
    edges = np.asarray(edges, dtype=np.float64)
    if labels.shape != edges.shape:
        raise IngestionError(
            f"label map {labels.shape} and edge map {edges.shape} differ in size")
    if labels.min() < 0:
        bad = int(labels[labels < 0].flat[0])
        raise IngestionError(f"negative region id {bad}", region_id=bad)
    if not np.all(np.isfinite(edges)):
        raise IngestionError("edge map contains non-finite values")
    regions = RegionMap.from_labels(labels, split_disconnected=True)
    empty = np.flatnonzero(regions.sizes == 0)
    if empty.size:
        raise IngestionError(f"region {int(empty[0])} is empty", region_id=int(empty[0]))
    return regions, np.clip(edges, 0.0, 1.0)


def grid_partition(shape, target_n: int) -> np.ndarray:
    h, w = shape
    nx, ny = _grid_dims(shape, target_n)
    rows = np.arange(h) * ny // h
    cols = np.arange(w) * nx // w
    return rows[:, None] * nx + cols[None, :]


def _grid_dims(shape, target_n):
    h, w = shape
    nx = max(1, min(w, int(round(math.sqrt(target_n * w / h)))))
    ny = max(1, min(h, int(round(target_n / nx))))
    return nx, ny


def superpixels(img: ImagePlane, edges: np.ndarray, target_n: int,
                compactness: float = 0.0) -> RegionMap:
    """Compact watershed of the edge map from a regular grid of seeds."""
    h, w = img.height, img.width
    npix = h * w
    if not 2 <= target_n <= npix:
        raise ContractError(f"target_n must lie in [2, {npix}], got {target_n}")
    if target_n == npix:
        return RegionMap.from_labels(np.arange(npix).reshape(h, w))
    nx, ny = _grid_dims((h, w), target_n)
    if nx * ny > npix or min(h // ny, w // nx) < 1:
        log.warning("image too small for %d seeds; using a grid partition", target_n)
        return RegionMap.from_labels(grid_partition((h, w), target_n))
    edges = np.asarray(edges, dtype=np.float64)
    ybounds = np.arange(ny + 1) * h // ny
    xbounds = np.arange(nx + 1) * w // nx
    # move each seed to the weakest edge within a quarter of the seed spacing
    # (and inside its own grid cell) so that seeds do not start on a ridge;
    # ties go to the pixel nearest the cell centre
    r = max(2, int(0.25 * min(h / ny, w / nx)))
    markers = np.zeros((h, w), dtype=np.int64)
    label = 0
    for i in range(ny):
        y = (ybounds[i] + ybounds[i + 1]) // 2
        y0, y1 = max(ybounds[i], y - r), min(ybounds[i + 1], y + r + 1)
        for j in range(nx):
            x = (xbounds[j] + xbounds[j + 1]) // 2
            x0, x1 = max(xbounds[j], x - r), min(xbounds[j + 1], x + r + 1)
            cy, cx = np.mgrid[y0:y1, x0:x1]
            cy, cx = cy.ravel(), cx.ravel()
            ring = (cy - y) ** 2 + (cx - x) ** 2
            k = np.lexsort((ring, edges[cy, cx]))[0]
            label += 1
            markers[cy[k], cx[k]] = label
    ws = segmentation.watershed(edges, markers, connectivity=1,
                                compactness=compactness)
    return RegionMap.from_labels(ws)


@dataclass(frozen=True)
class SegTree:
    """Binary merge tree: leaves 0..n-1 are regions, the root is 2n-2."""

    n_leaves: int
    parent: np.ndarray     # (2n-1,), root has -1
    children: np.ndarray   # (2n-1, 2), leaves have -1
    level: np.ndarray      # (2n-1,), 0 for leaves, nondecreasing upwards
    size: np.ndarray       # (2n-1,) pixel counts

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    def is_leaf(self, node) -> bool:
        return node < self.n_leaves

    @cached_property
    def leaf_sets(self) -> tuple:
        """Leaf ids below every node (children always precede parents)."""
        sets = [np.array([i]) for i in range(self.n_leaves)]
        for node in range(self.n_leaves, self.n_nodes):
            a, b = self.children[node]
            sets.append(np.concatenate([sets[a], sets[b]]))
        return tuple(sets)

    def path_to_root(self, node):
        out = [node]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out


def build_tree(regions: RegionMap, edges: np.ndarray) -> SegTree:
    """Greedy agglomeration by mean boundary strength.

    The adjacent pair with the weakest mean border is merged first; ties go
    to the lexicographically smaller id pair. Merge levels take a running
    maximum so that every path to the root is monotone.
    """
    n = regions.n
    if n < 2:
        raise ContractError("a merge tree needs at least two regions")
    pairs, length, mean = regions.border_stats(edges)
    total = 2 * n - 1
    parent = np.full(total, -1, dtype=np.int64)
    children = np.full((total, 2), -1, dtype=np.int64)
    level = np.zeros(total)
    size = np.zeros(total, dtype=np.int64)
    size[:n] = regions.sizes

    border = [dict() for _ in range(n)]  # node -> {nbr: [length, strength sum]}
    heap = []
    for (i, j), ln, m in zip(pairs.tolist(), length, mean):
        border[i][j] = [ln, m * ln]
        border[j][i] = [ln, m * ln]
        heap.append((m, i, j))
    heapq.heapify(heap)
    alive = np.zeros(total, dtype=bool)
    alive[:n] = True

    nxt = n
    while nxt < total:
        if heap:
            m, a, b = heapq.heappop(heap)
            if not (alive[a] and alive[b]):
                continue
        else:
            # disconnected adjacency graph: join the two lowest live ids
            a, b = np.flatnonzero(alive)[:2]
            m = level[:nxt].max()
        node = nxt
        nxt += 1
        alive[a] = alive[b] = False
        alive[node] = True
        parent[a] = parent[b] = node
        children[node] = (a, b)
        level[node] = max(m, level[a], level[b])
        size[node] = size[a] + size[b]
        merged = {}
        for src in (border[a], border[b]):
            for k, (ln, s) in src.items():
                if k in (a, b):
                    continue
                acc = merged.setdefault(k, [0.0, 0.0])
                acc[0] += ln
                acc[1] += s
        border.append(merged)
        border[a] = border[b] = None
        for k, (ln, s) in merged.items():
            nb = border[k]
            nb.pop(a, None)
            nb.pop(b, None)
            nb[node] = [ln, s]
            heapq.heappush(heap, (s / ln, k, node))
    return SegTree(n, parent, children, level, size)
