"""Region benchmark metrics: Segmentation Covering, PRI and VoI.

Every metric takes one proposal segmentation and a list of ground truths
(several annotators per image) and averages over the ground truths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError

METRICS = ("covering", "pri", "voi")
HIGHER_IS_BETTER = {"covering": True, "pri": True, "voi": False}


def _as_list(gts):
    if isinstance(gts, np.ndarray) and gts.ndim == 2:
        return [gts]
    return list(gts)


def contingency(seg: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Joint pixel counts, rows indexed by ``seg`` segments, columns by ``gt``."""
    seg = np.asarray(seg)
    gt = np.asarray(gt)
    if seg.shape != gt.shape:
        raise ContractError(f"segmentation {seg.shape} and ground truth {gt.shape} differ")
    _, s = np.unique(seg.ravel(), return_inverse=True)
    _, g = np.unique(gt.ravel(), return_inverse=True)
    ns, ng = s.max() + 1, g.max() + 1
    return np.bincount(s * ng + g, minlength=ns * ng).reshape(ns, ng)


def _covering_one(seg, gt) -> float:
    c = contingency(seg, gt).astype(np.float64)
    seg_sizes = c.sum(axis=1)
    gt_sizes = c.sum(axis=0)
    union = gt_sizes[None, :] + seg_sizes[:, None] - c
    iou = c / union
    return float((gt_sizes * iou.max(axis=0)).sum() / c.sum())


def _rand_one(seg, gt) -> float:
    c = contingency(seg, gt).astype(np.int64)
    n = int(c.sum())
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    same_both = int((c * (c - 1) // 2).sum())
    same_seg = int((c.sum(axis=1) * (c.sum(axis=1) - 1) // 2).sum())
    same_gt = int((c.sum(axis=0) * (c.sum(axis=0) - 1) // 2).sum())
    disagree = same_seg + same_gt - 2 * same_both
    return (total - disagree) / total


def _entropy(p):
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _voi_one(seg, gt) -> float:
    c = contingency(seg, gt).astype(np.float64)
    p = c / c.sum()
    h_joint = _entropy(p.ravel())
    h_seg = _entropy(p.sum(axis=1))
    h_gt = _entropy(p.sum(axis=0))
    mutual = h_seg + h_gt - h_joint
    return max(0.0, h_seg + h_gt - 2.0 * mutual)


def covering(seg, gts) -> float:
    """Mean over ground truths of the size-weighted best IoU of each gt segment."""
    return float(np.mean([_covering_one(seg, g) for g in _as_list(gts)]))


def pri(seg, gts) -> float:
    """Mean Rand index over ground truths."""
    return float(np.mean([_rand_one(seg, g) for g in _as_list(gts)]))


def voi(seg, gts) -> float:
    """Mean variation of information (nats) over ground truths."""
    return float(np.mean([_voi_one(seg, g) for g in _as_list(gts)]))


METRIC_FUNCS = {"covering": covering, "pri": pri, "voi": voi}


def evaluate(seg, gts) -> dict:
    return {m: METRIC_FUNCS[m](seg, gts) for m in METRICS}


@dataclass
class BenchmarkReport:
    """Per-image, per-scale metric values with ODS/OIS summaries."""

    images: list
    scales: np.ndarray
    table: dict                     # metric -> (n_images, n_scales)
    ods: dict = field(default_factory=dict)
    ods_scale: dict = field(default_factory=dict)
    ois: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["image,scale," + ",".join(METRICS)]
        for i, name in enumerate(self.images):
            for s, scale in enumerate(self.scales):
                vals = ",".join(f"{self.table[m][i, s]:.6f}" for m in METRICS)
                lines.append(f"{name},{scale:g},{vals}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        head = f"{'':<8}| {'Covering':^13} | {'PRI':^13} | {'VoI':^13}"
        sub = f"{'':<8}| {'ODS':>6} {'OIS':>6} | {'ODS':>6} {'OIS':>6} | {'ODS':>6} {'OIS':>6}"
        row = f"{'glseg':<8}| " + " | ".join(
            f"{self.ods[m]:6.3f} {self.ois[m]:6.3f}" for m in METRICS)
        return "\n".join([head, sub, "-" * len(sub), row]) + "\n"


def aggregate(table: Mapping[str, np.ndarray], scales: Sequence[float] | None = None,
              images: Sequence[str] | None = None) -> BenchmarkReport:
    """ODS picks one scale for the whole dataset, OIS the best scale per image."""
    if not table:
        raise ContractError("empty metric table")
    arrays = {m: np.atleast_2d(np.asarray(v, dtype=np.float64)) for m, v in table.items()}
    shape = next(iter(arrays.values())).shape
    if shape[0] == 0 or shape[1] == 0:
        raise ContractError("empty metric table")
    if any(a.shape != shape for a in arrays.values()):
        raise ContractError("all metrics must share the image x scale grid")
    scales = np.arange(shape[1], dtype=float) if scales is None else np.asarray(scales, float)
    images = [str(i) for i in range(shape[0])] if images is None else list(images)
    rep = BenchmarkReport(images, scales, arrays)
    for m, a in arrays.items():
        higher = HIGHER_IS_BETTER.get(m, True)
        means = a.mean(axis=0)
        best = int(np.argmax(means) if higher else np.argmin(means))
        rep.ods[m] = float(means[best])
        rep.ods_scale[m] = float(scales[best])
        rep.ois[m] = float((a.max(axis=1) if higher else a.min(axis=1)).mean())
    return rep
