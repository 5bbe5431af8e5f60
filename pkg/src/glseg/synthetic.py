"""Synthetic images with known ground truth for tests and benchmarks."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imgproc import ImagePlane


def constant(h: int, w: int, value=(0.5, 0.5, 0.5)) -> ImagePlane:
    return ImagePlane.from_rgb(np.broadcast_to(np.asarray(value, float), (h, w, 3)).copy())


def two_tone(h: int, w: int, left=(0.1, 0.2, 0.6), right=(0.9, 0.8, 0.2)):
    """Left half ``left``, right half ``right``; returns (image, gt)."""
    img = np.empty((h, w, 3))
    img[:, : w // 2] = left
    img[:, w // 2:] = right
    gt = np.zeros((h, w), dtype=np.int64)
    gt[:, w // 2:] = 1
    return ImagePlane.from_rgb(img), gt


def textured_background(h: int, w: int, rng: np.random.Generator,
                        colors=((0.25, 0.45, 0.20), (0.55, 0.50, 0.30)),
                        scale: float = 3.0) -> np.ndarray:
    """Blotchy two-colour texture from thresholded smoothed noise."""
    field = ndimage.gaussian_filter(rng.standard_normal((h, w)), scale)
    mix = (field > 0).astype(float)[:, :, None]
    c0, c1 = (np.asarray(c, float) for c in colors)
    img = (1 - mix) * c0 + mix * c1
    img += 0.02 * rng.standard_normal((h, w, 3))
    return img


def split_object(seed: int, size: int = 200, part_radius: float | None = None,
                 color=(0.85, 0.15, 0.15)):
    """One object drawn as two distant same-coloured discs on a texture.

    Returns ``(image, gt)`` where gt marks both discs with label 1 and the
    background with 0.
    """
    rng = np.random.default_rng(seed)
    h = w = size
    img = textured_background(h, w, rng)
    r = part_radius or size * rng.uniform(0.13, 0.17)
    yy, xx = np.mgrid[0:h, 0:w]
    margin = r + 4
    # one disc in the upper-left quadrant, the other in the lower-right
    c1 = rng.uniform(margin, size / 2 - r / 2, 2)
    c2 = size - rng.uniform(margin, size / 2 - r / 2, 2)
    gt = np.zeros((h, w), dtype=np.int64)
    for cy, cx in (c1, c2):
        gt[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = 1
    obj = np.asarray(color, float) + 0.02 * rng.standard_normal((h, w, 3))
    img = np.where(gt[:, :, None] == 1, obj, img)
    return ImagePlane.from_rgb(np.clip(img, 0, 1)), gt


def natural_like(seed: int, h: int = 321, w: int = 481) -> ImagePlane:
    """A BSDS-sized image with several textured regions, for timing runs."""
    rng = np.random.default_rng(seed)
    img = textured_background(h, w, rng, scale=4.0)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(4):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry, rx = rng.uniform(20, 80, 2)
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
        img[mask] = rng.uniform(0, 1, 3) + 0.03 * rng.standard_normal((mask.sum(), 3))
    return ImagePlane.from_rgb(np.clip(img, 0, 1))
