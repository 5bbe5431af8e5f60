"""End-to-end segmentation: regions, graph partition, multi-class inference."""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import global_graph, local_graph, multiclass, pylon, regions as regmod, spectral
from .config import PipelineConfig
from .errors import GlsegError
from .imgproc import ImagePlane, pixel_features

log = logging.getLogger(__name__)

PHASES = ("Region structure generation",
          "Graph construct. and partition",
          "Multi-class segmentation")


class PhaseError(GlsegError):
    """Wraps a failure with the pipeline phase it occurred in."""

    def __init__(self, phase, cause):
        self.phase = phase
        self.cause = cause
        super().__init__(f"[{phase}] {cause}")


@dataclass
class PipelineResult:
    config: PipelineConfig
    regions: regmod.RegionMap
    edges: np.ndarray
    tree: regmod.SegTree | None = None
    features: regmod.RegionFeatures | None = None
    local: local_graph.LocalAffinity | None = None
    global_: global_graph.GlobalCoefficients | None = None
    operator: sparse.csr_matrix | None = None
    degrees: np.ndarray | None = None
    basis: spectral.EigenBasis | None = None
    prior: multiclass.PriorSegmentation | None = None
    hierarchy: multiclass.Hierarchy | None = None
    timings: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)


@contextmanager
def _phase(result: PipelineResult, name: str):
    t0 = time.perf_counter()
    try:
        yield
    except PhaseError:
        raise
    except GlsegError as exc:
        raise PhaseError(name, exc) from exc
    finally:
        result.timings[name] = result.timings.get(name, 0.0) + time.perf_counter() - t0


def min_rayleigh(A, D, n_vectors: int = 100, seed: int = 0) -> float:
    """Smallest y^T A y / y^T y over random Gaussian vectors."""
    Y = np.random.default_rng(seed).standard_normal((A.shape[0], n_vectors))
    return float(np.min(np.einsum("ij,ij->j", Y, A @ Y) / np.einsum("ij,ij->j", Y, Y)))


def build_graph(img: ImagePlane, regions: regmod.RegionMap, cfg: PipelineConfig):
    """Region features, W, K and the combined operator."""
    feats = regmod.region_features(regions, pixel_features(img, cfg.gammas))
    model = local_graph.fit_cooccurrence(regions, feats, cfg.e1, cfg.bandwidth, cfg.bins)
    local = local_graph.build_affinity(regions, feats, model, cfg.e2)
    glob = global_graph.build_global(regions, feats.saliency, cfg.R, cfg.alpha,
                                     cfg.geodesic_range)
    W = local.W
    if cfg.normalize_affinity:
        W = W / local.D.mean()
    A, D = spectral.assemble_operator(W, glob.K, cfg.mu)
    return feats, local, glob, A, D


def run_partition(img: ImagePlane, cfg: PipelineConfig | None = None,
                  regions: regmod.RegionMap | None = None,
                  edges: np.ndarray | None = None) -> PipelineResult:
    """Phases 1 and 2: region structure and the eigenvector partitions."""
    cfg = cfg or PipelineConfig()
    res = PipelineResult(cfg, regions, edges)
    with _phase(res, PHASES[0]):
        if res.edges is None:
            res.edges = regmod.compute_edges_fallback(img, cfg.edge_sigma)
        if res.regions is None:
            res.regions = regmod.superpixels(img, res.edges, min(cfg.target_n, img.height * img.width),
                                             compactness=cfg.compactness)
        if res.regions.shape != (img.height, img.width):
            raise PhaseError(PHASES[0], GlsegError("region map does not match the image size"))
        res.tree = regmod.build_tree(res.regions, res.edges)
    with _phase(res, PHASES[1]):
        res.features, res.local, res.global_, res.operator, res.degrees = \
            build_graph(img, res.regions, cfg)
        d = min(cfg.d, res.regions.n - 2)
        res.basis = spectral.solve_partitions(res.operator, res.degrees, d,
                                              tol=cfg.eig_tol, maxiter=cfg.eig_maxiter,
                                              seed=cfg.seed)
    res.checks["min_rayleigh"] = min_rayleigh(res.operator, res.degrees)
    res.checks["max_residual"] = float(res.basis.residuals.max())
    return res


def run_pipeline(img: ImagePlane, cfg: PipelineConfig | None = None,
                 regions: regmod.RegionMap | None = None,
                 edges: np.ndarray | None = None) -> PipelineResult:
    """All three phases; the result carries the soft boundary hierarchy."""
    res = run_partition(img, cfg, regions, edges)
    cfg = res.config
    with _phase(res, PHASES[2]):
        L = min(cfg.L, res.regions.n)
        res.prior = multiclass.kmeans_prior(res.basis, L, seed=cfg.seed,
                                            sizes=res.regions.sizes,
                                            weighted=cfg.kmeans_weighted)
        counts = multiclass.node_counts(
            res.tree, multiclass.leaf_counts(res.basis, res.regions.sizes, L))
        hists = multiclass.normalize_blocks(counts)
        pairs, costs = multiclass.pairwise_table(res.regions, res.edges, cfg.gamma_b,
                                                  cfg.pairwise_weight)
        res.hierarchy = multiclass.beta_sweep(res.tree, res.prior, cfg.betas, res.regions,
                                              hists, pairs, costs)
    res.checks["pylon_valid"] = all(pylon.is_valid(res.tree, lab)
                                    for lab in res.hierarchy.node_labels)
    return res
