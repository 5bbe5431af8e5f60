"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and
then asserts, so the suite status and the printed lines agree.
"""

import itertools
import os
from pathlib import Path

import numpy as np
import pytest
from scipy import linalg

from conftest import (all_pylon_labelings, brute_energy, dense_partitions, random_graph,
                      random_tree, report_criterion)
from glseg.cli import run_eval, timing_table
from glseg.config import PipelineConfig
from glseg.evaluation import covering, pri, voi
from glseg.global_graph import build_global
from glseg.imgproc import load_image
from glseg.pipeline import PHASES, min_rayleigh, run_pipeline
from glseg.pylon import is_valid, pylon_infer
from glseg.regions import RegionMap, ingest_external
from glseg.spectral import assemble_operator, solve_partitions
from glseg.synthetic import natural_like, split_object

PIPELINE_RUNS = []   # every full pipeline run made here, for criterion 6


def pipeline(img, cfg=None, **kw):
    res = run_pipeline(img, cfg, **kw)
    PIPELINE_RUNS.append(res)
    return res


def test_c1_spectral_matches_dense_oracle():
    rng = np.random.default_rng(2024)
    worst_val = worst_angle = 0.0
    for trial in range(25):
        n = int(rng.integers(8, 13))
        mu = (0.0, 1.0, 8.0)[trial % 3]
        W, K = random_graph(n, rng)
        A, D = assemble_operator(W, K, mu)
        basis = solve_partitions(A, D, 3)
        ref_vals, ref_vecs = dense_partitions(A, D, 3)
        rel = np.abs(basis.values - ref_vals) / np.maximum(np.abs(ref_vals), 1e-300)
        angle = linalg.subspace_angles(basis.vectors, ref_vecs).max()
        worst_val, worst_angle = max(worst_val, rel.max()), max(worst_angle, angle)
    ok = worst_val <= 1e-7 and worst_angle < 1e-5
    report_criterion(1, "spectral vs dense oracle", ok,
                     f"25 graphs, max rel eigenvalue err {worst_val:.2e} (<=1e-7), "
                     f"max principal angle {worst_angle:.2e} (<1e-5)")
    assert ok


def lagrange_row(x, S, alpha):
    r = len(S)
    kkt = np.zeros((r + 1, r + 1))
    kkt[:r, :r] = 2 * (S @ S.T + alpha * np.eye(r))
    kkt[:r, r] = kkt[r, :r] = 1.0
    return np.linalg.solve(kkt, np.concatenate([2 * S @ x, [1.0]]))[:r]


def test_c2_lle_rows_match_lagrange_oracle():
    rng = np.random.default_rng(77)
    worst = worst_sum = worst_shift = 0.0
    for trial in range(25):
        n = int(rng.integers(4, 21))
        R = int(rng.integers(1, 7))
        h = int(rng.integers(1, 5))
        w = -(-n // h)
        labels = np.minimum(np.arange(h * w), n - 1).reshape(h, w)
        regions = RegionMap.from_labels(labels, split_disconnected=False)
        sal = rng.random((n, 24))
        K = build_global(regions, sal, R, 1e-10).K.toarray()
        K2 = build_global(regions, sal + rng.normal(size=24), R, 1e-10).K.toarray()
        for i in range(n):
            d = sorted((np.linalg.norm(sal[j] - sal[i]), j) for j in range(n) if j != i)
            nb = [j for _, j in d[:R]]
            assert set(np.flatnonzero(K[i])) <= set(nb)
            worst = max(worst, np.abs(K[i, nb] - lagrange_row(sal[i], sal[nb], 1e-10)).max())
        worst_sum = max(worst_sum, np.abs(K.sum(axis=1) - 1).max())
        worst_shift = max(worst_shift, np.abs(K - K2).max())
    ok = worst <= 1e-7 and worst_sum <= 1e-10 and worst_shift <= 1e-8
    report_criterion(2, "LLE rows vs Lagrange oracle", ok,
                     f"25 sets, max coef err {worst:.2e} (<=1e-7), row-sum err "
                     f"{worst_sum:.2e} (<=1e-10), translation change {worst_shift:.2e} (<=1e-8)")
    assert ok


def test_c3_pylon_matches_exhaustive_search():
    rng = np.random.default_rng(5)
    mismatches, sizes = 0, []
    for trial in range(10):
        n = int(rng.integers(2, 6))
        tree = random_tree(n, rng)
        # integer potentials keep every energy sum exact in floating point
        unary = rng.integers(-20, 21, size=(tree.n_nodes, 2)).astype(float)
        pairs = np.array([(i, j) for i, j in itertools.combinations(range(n), 2)
                          if rng.random() < 0.6], dtype=np.int64).reshape(-1, 2)
        costs = rng.integers(0, 15, size=len(pairs)).astype(float)
        res = pylon_infer(tree, unary, pairs, costs)
        best = min(brute_energy(tree, unary, pairs, costs, lab)
                   for lab in all_pylon_labelings(tree, 2))
        mismatches += not (is_valid(tree, res.labels) and res.energy == best)
        sizes.append(n)
    ok = mismatches == 0
    report_criterion(3, "Pylon vs exhaustive enumeration", ok,
                     f"10 trees (N={sizes}), L=2, {mismatches} energy mismatches (exact)")
    assert ok


def test_c4_metrics_exhaustive_on_3x3():
    # all 2-label partitions of a 3x3 image, one representative per label swap
    X = np.array([[0] + list(bits) for bits in itertools.product((0, 1), repeat=8)])
    n = 9
    iu = np.triu_indices(n, 1)
    same = (X[:, :, None] == X[:, None, :])[:, iu[0], iu[1]]          # (256, 36)
    masks = [(sum(1 << k for k in range(n) if x[k] == 0),
              sum(1 << k for k in range(n) if x[k] == 1)) for x in X]
    pop = lambda m: bin(m).count("1")
    max_voi = max_cov = 0.0
    pri_exact = True
    for a in range(len(X)):
        rand_oracle = (same[a][None, :] == same).sum(axis=1) / same.shape[1]
        for b in range(len(X)):
            sa, sb = X[a].reshape(3, 3), X[b].reshape(3, 3)
            pri_exact &= pri(sa, sb) == rand_oracle[b]
            # entropy oracle from raw label pairs
            cells = {}
            for u, v in zip(X[a], X[b]):
                cells[(u, v)] = cells.get((u, v), 0) + 1
            ent = lambda counts: -sum(c / n * np.log(c / n) for c in counts if c)
            h_ab = ent(cells.values())
            h_a = ent(np.bincount(X[a], minlength=2))
            h_b = ent(np.bincount(X[b], minlength=2))
            max_voi = max(max_voi, abs(voi(sa, sb) - (2 * h_ab - h_a - h_b)))
            # covering oracle from bitmask regions
            gt_regs = [m for m in masks[b] if m]
            seg_regs = [m for m in masks[a] if m]
            cov = sum(pop(g) * max(pop(g & s) / pop(g | s) for s in seg_regs)
                      for g in gt_regs) / n
            max_cov = max(max_cov, abs(covering(sa, sb) - cov))
    ok = bool(pri_exact) and max_voi <= 1e-12 and max_cov <= 1e-12
    report_criterion(4, "metrics vs brute force on all 3x3 2-label partitions", ok,
                     f"{len(X) ** 2} pairs, PRI exact={bool(pri_exact)}, max VoI err "
                     f"{max_voi:.1e}, max Covering err {max_cov:.1e} (<=1e-12)")
    assert ok


@pytest.mark.slow
def test_c5_global_connections_improve_covering():
    cfg = PipelineConfig()
    best = {0.0: [], 8.0: []}
    for seed in range(20):
        img, gt = split_object(seed)
        for mu in best:
            h = pipeline(img, cfg.replace(mu=mu)).hierarchy
            best[mu].append(max(covering(h.segmentation(t), gt) for t in h.thresholds()))
    m0, m8 = np.mean(best[0.0]), np.mean(best[8.0])
    wins = int(np.sum(np.array(best[8.0]) > np.array(best[0.0])))
    ok = m8 - m0 >= 0.05
    report_criterion(5, "global connections (mu=8 vs mu=0)", ok,
                     f"20 split-object images, mean best Covering mu=0 {m0:.4f}, "
                     f"mu=8 {m8:.4f}, gain {m8 - m0:+.4f} (>=0.05), mu=8 better on {wins}/20")
    assert ok


@pytest.mark.slow
def test_c7_runtime_on_bsds_sized_images():
    rows = []
    for seed in range(5):
        res = pipeline(natural_like(seed, 321, 481), PipelineConfig(target_n=600))
        rows.append([res.timings[p] for p in PHASES] + [sum(res.timings.values())])
    mean_total = float(np.mean([r[-1] for r in rows]))
    ok = mean_total <= 9.3
    print("\n" + timing_table(rows))
    report_criterion(7, "runtime on 321x481, target_n=600", ok,
                     f"5 images, mean total {mean_total:.2f} s (<=9.3 s; stretch <=3 s "
                     f"{'met' if mean_total <= 3 else 'not met'}), per-phase means "
                     + ", ".join(f"{p}: {np.mean([r[k] for r in rows]):.2f} s"
                                 for k, p in enumerate(PHASES)))
    assert ok


@pytest.mark.slow
def test_c6_psd_residual_and_pylon_invariants():
    # runs after criteria 5 and 7 (file order) and checks every run they made,
    # plus a few of its own so it also stands alone
    for seed in range(3):
        pipeline(natural_like(100 + seed, 120, 160), PipelineConfig(target_n=200))
    worst_psd, worst_res, invalid = np.inf, 0.0, 0
    for res in PIPELINE_RUNS:
        worst_psd = min(worst_psd, min_rayleigh(res.operator, res.degrees, 100))
        worst_res = max(worst_res, float(res.basis.residuals.max()))
        invalid += sum(not is_valid(res.tree, lab) for lab in res.hierarchy.node_labels)
    ok = worst_psd >= -1e-10 and worst_res <= 1e-8 and invalid == 0
    report_criterion(6, "PSD / residual / Pylon invariants", ok,
                     f"{len(PIPELINE_RUNS)} pipeline runs, min Rayleigh {worst_psd:.3e} "
                     f"(>=-1e-10), max residual {worst_res:.2e} (<=1e-8), "
                     f"{invalid} invalid Pylon labelings")
    assert ok


def _dataset_paths():
    images = os.environ.get("GLSEG_BSDS_IMAGES")
    gt = os.environ.get("GLSEG_BSDS_GT")
    if not images or not gt:
        return None
    return (Path(images), Path(gt), os.environ.get("GLSEG_BSDS_SUPERPIXELS"),
            os.environ.get("GLSEG_BSDS_EDGES"))


def test_c8_bsds_dataset_gated(tmp_path):
    paths = _dataset_paths()
    if paths is None:
        report_criterion(8, "BSDS500 Covering (dataset-gated)", None,
                         "set GLSEG_BSDS_IMAGES and GLSEG_BSDS_GT (plus optional "
                         "GLSEG_BSDS_SUPERPIXELS / GLSEG_BSDS_EDGES) to run")
        pytest.skip("BSDS500 not available")
    images, gt, sp_dir, edge_dir = paths
    from glseg import gridio
    cfg = PipelineConfig()
    for path in sorted(p for p in images.iterdir() if p.suffix.lower() in (".png", ".ppm")):
        kw = {}
        if sp_dir and edge_dir:
            kw["regions"], kw["edges"] = ingest_external(
                next(Path(sp_dir).glob(path.stem + ".*")),
                next(Path(edge_dir).glob(path.stem + ".*")))
        res = run_pipeline(load_image(path), cfg, **kw)
        gridio.write_csv(tmp_path / f"{path.stem}.ucm2.csv", res.hierarchy.ucm2(), fmt="%.6g")
    report = run_eval(tmp_path, gt)
    external = bool(sp_dir and edge_dir)
    ods = report.ods["covering"]
    ok = ods >= 0.59 if external else True
    report_criterion(8, "BSDS500 Covering", ok,
                     f"ODS {ods:.3f}, OIS {report.ois['covering']:.3f} "
                     + ("(target >=0.59 with external superpixels)" if external
                        else "(internal edges: values reported only)"))
    assert ok
