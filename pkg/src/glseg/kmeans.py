"""Seeded k-means with k-means++ initialisation."""

from __future__ import annotations

import numpy as np


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator, weights=None) -> np.ndarray:
    n = len(X)
    w = np.ones(n) if weights is None else np.asarray(weights, float)
    centers = [X[rng.choice(n, p=w / w.sum())]]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        p = closest * w
        if p.sum() <= 0:
            # all remaining mass sits on chosen centres; pick any unused point
            idx = rng.choice(n)
        else:
            idx = rng.choice(n, p=p / p.sum())
        centers.append(X[idx])
        closest = np.minimum(closest, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans(X, k: int, seed: int = 0, weights=None, max_iter: int = 100):
    """Lloyd iterations from a k-means++ start.

    Returns ``(assignment, centers, inertia)``. An emptied cluster is
    re-seeded with the point farthest from its current centre.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    w = np.ones(n) if weights is None else np.asarray(weights, float)
    rng = np.random.default_rng(seed)
    C = kmeans_pp(X, k, rng, w)
    assign = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, C)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            own = np.where(counts[new] > 1, d2[np.arange(n), new], -1.0)
            far = int(np.argmax(own))
            counts[new[far]] -= 1
            new[far] = c
            counts[c] = 1
            d2[far] = 0.0
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for c in range(k):
            m = assign == c
            C[c] = np.average(X[m], axis=0, weights=w[m])
    d2 = _sq_dists(X, C)
    inertia = float((w * d2[np.arange(n), assign]).sum())
    return assign, C, inertia
