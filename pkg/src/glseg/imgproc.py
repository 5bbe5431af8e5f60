"""Image loading, color-space conversion and per-pixel features.

Channel values are floats. RGB and HSV planes live in [0, 1]; Lab planes keep
their native scale (L in [0, 100], a and b roughly in [-128, 127]).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage
from skimage import color

from .errors import ContractError, ImageIOError

RGB_TAGS = ("R", "G", "B")
LAB_TAGS = ("L", "a", "b")
HS_TAGS = ("H", "S")

DEFAULT_GAMMAS = (0.5, 1.5, 2.0)
SALIENCY_CHANNELS = ("R", "G", "B", "L", "a", "b", "H", "S")


@dataclass(frozen=True)
class ImagePlane:
    """A multi-channel raster; ``data`` has shape (height, width, channels)."""

    data: np.ndarray
    tags: tuple[str, ...]

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != len(self.tags):
            raise ContractError(
                f"data shape {self.data.shape} does not match tags {self.tags}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def channel(self, tag: str) -> np.ndarray:
        return self.data[:, :, self.tags.index(tag)]

    @classmethod
    def from_rgb(cls, rgb) -> "ImagePlane":
        arr = np.asarray(rgb, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ContractError(f"expected an (H, W, 3) array, got {arr.shape}")
        return cls(np.clip(arr, 0.0, 1.0), RGB_TAGS)


@dataclass(frozen=True)
class PixelFeatureStack:
    """Per-pixel features feeding the region descriptors."""

    lab: np.ndarray        # (H, W, 3) native Lab
    cov_diag: np.ndarray   # (H, W, 3) RGB variances over a 3x3 window
    saliency: np.ndarray   # (H, W, 24)
    gray: np.ndarray       # (H, W)


def _require(img: ImagePlane, tags):
    if img.tags != tuple(tags):
        raise ContractError(f"expected channels {tuple(tags)}, got {img.tags}")


def load_image(path) -> ImagePlane:
    """Read an 8-bit RGB PNG or binary PPM into an RGB plane scaled to [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("RGBA", "LA", "P", "L", "1"):
                im = im.convert("RGB")
            elif mode != "RGB":
                raise ImageIOError(path, f"unsupported pixel format {mode!r} "
                                         "(need 8-bit RGB)")
            arr = np.asarray(im, dtype=np.uint8)
    except ImageIOError:
        raise
    except FileNotFoundError:
        raise ImageIOError(path, "no such file") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(path, f"cannot read image ({exc})") from None
    return ImagePlane(arr.astype(np.float64) / 255.0, RGB_TAGS)


def save_rgb(path, img: ImagePlane):
    _require(img, RGB_TAGS)
    arr = np.round(np.clip(img.data, 0, 1) * 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(path)


# sRGB primaries to XYZ; the rows sum to the D65 white so white maps to a = b = 0
_RGB2XYZ = np.array([[0.4124564, 0.3575761, 0.1804375],
                     [0.2126729, 0.7151522, 0.0721750],
                     [0.0193339, 0.1191920, 0.9503041]])
_WHITE = _RGB2XYZ.sum(axis=1)


def rgb_to_lab(img: ImagePlane) -> ImagePlane:
    """sRGB (D65) to CIELAB."""
    _require(img, RGB_TAGS)
    c = img.data
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    t = (lin @ _RGB2XYZ.T) / _WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta ** 3, np.cbrt(t), t / (3 * delta ** 2) + 4.0 / 29.0)
    lab = np.stack([116.0 * f[..., 1] - 16.0,
                    500.0 * (f[..., 0] - f[..., 1]),
                    200.0 * (f[..., 1] - f[..., 2])], axis=-1)
    return ImagePlane(lab, LAB_TAGS)


def rgb_to_hs(img: ImagePlane) -> ImagePlane:
    """Hue (turns, in [0, 1)) and saturation of HSV. Achromatic hue is 0."""
    _require(img, RGB_TAGS)
    hsv = color.rgb2hsv(img.data)
    return ImagePlane(np.ascontiguousarray(hsv[:, :, :2]), HS_TAGS)


def gamma_correct(plane, gamma: float) -> np.ndarray:
    if not gamma > 0:
        raise ContractError(f"gamma must be positive, got {gamma}")
    return np.power(np.asarray(plane, dtype=np.float64), gamma)


def rescale_lab(lab: np.ndarray) -> np.ndarray:
    """Map native Lab values to [0, 1]: L/100, (a+128)/255, (b+128)/255."""
    out = np.empty_like(lab, dtype=np.float64)
    out[..., 0] = lab[..., 0] / 100.0
    out[..., 1:] = (lab[..., 1:] + 128.0) / 255.0
    return np.clip(out, 0.0, 1.0)


def saliency_features(img: ImagePlane,
                      gammas: Sequence[float] = DEFAULT_GAMMAS) -> np.ndarray:
    """Per-pixel saliency vectors of shape (H, W, 8 * len(gammas)).

    Base channels are ``SALIENCY_CHANNELS`` (each in [0, 1]); the output is
    grouped by gamma, so entry ``g * 8 + c`` is channel ``c`` raised to
    ``gammas[g]``.
    """
    _require(img, RGB_TAGS)
    base = np.concatenate([
        img.data,
        rescale_lab(rgb_to_lab(img).data),
        rgb_to_hs(img).data,
    ], axis=2)
    base = np.clip(base, 0.0, 1.0)
    return np.concatenate([gamma_correct(base, g) for g in gammas], axis=2)


def rgb_covariance_diagonal(img: ImagePlane) -> np.ndarray:
    """Per-channel RGB variance over a 3x3 window with replicate padding."""
    _require(img, RGB_TAGS)
    x = img.data
    mean = ndimage.uniform_filter(x, size=(3, 3, 1), mode="nearest")
    mean_sq = ndimage.uniform_filter(x * x, size=(3, 3, 1), mode="nearest")
    return np.maximum(mean_sq - mean * mean, 0.0)


def gray(img: ImagePlane) -> np.ndarray:
    _require(img, RGB_TAGS)
    return color.rgb2gray(img.data)


def pixel_features(img: ImagePlane,
                   gammas: Sequence[float] = DEFAULT_GAMMAS) -> PixelFeatureStack:
    return PixelFeatureStack(
        lab=rgb_to_lab(img).data,
        cov_diag=rgb_covariance_diagonal(img),
        saliency=saliency_features(img, gammas),
        gray=gray(img),
    )
