"""Readers and writers for label maps and scalar grids (PNG and CSV)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageIOError


def _read_png(path: Path) -> tuple[np.ndarray, int]:
    """Return (array, bit depth) for a single-channel PNG."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L"):
                return np.asarray(im, dtype=np.uint16).astype(np.int64), 16
            if mode == "I":
                return np.asarray(im, dtype=np.int64), 16
            if mode in ("L", "P"):
                return np.asarray(im, dtype=np.uint8).astype(np.int64), 8
            if mode == "1":
                return np.asarray(im, dtype=np.uint8).astype(np.int64), 8
    except FileNotFoundError:
        raise ImageIOError(path, "no such file") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(path, f"cannot read image ({exc})") from None
    raise ImageIOError(path, f"expected a single-channel PNG, got mode {mode!r}")


def _read_csv(path: Path, dtype=float) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=dtype, ndmin=2)
    except FileNotFoundError:
        raise ImageIOError(path, "no such file") from None
    except ValueError as exc:
        raise ImageIOError(path, f"malformed CSV grid ({exc})") from None
    return arr


def read_label_grid(path) -> np.ndarray:
    """Integer label grid from a 16-bit (or 8-bit) PNG or an integer CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        arr = _read_csv(path)
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ImageIOError(path, "label CSV contains non-integer values")
        return arr.astype(np.int64)
    return _read_png(path)[0]


def read_scalar_grid(path) -> np.ndarray:
    """Float grid from CSV, or a PNG rescaled to [0, 1] by its bit depth."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_csv(path)
    arr, depth = _read_png(path)
    return arr.astype(np.float64) / float(2 ** depth - 1)


def write_label_png(path, labels: np.ndarray):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 65535:
        raise ImageIOError(path, "labels do not fit in 16 bits")
    Image.fromarray(labels.astype(np.uint16)).save(path)


def write_scalar_png(path, grid: np.ndarray):
    """Write a [0, 1] grid as a 16-bit grayscale PNG."""
    q = np.round(np.clip(grid, 0.0, 1.0) * 65535).astype(np.uint16)
    Image.fromarray(q).save(path)


def write_csv(path, grid: np.ndarray, fmt="%.10g"):
    grid = np.asarray(grid)
    if np.issubdtype(grid.dtype, np.integer):
        fmt = "%d"
    np.savetxt(path, np.atleast_2d(grid), delimiter=",", fmt=fmt)


def write_coo_csv(path, matrix):
    """Dump a sparse matrix as ``i,j,value`` rows."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write("i,j,value\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r},{c},{v:.17g}\n")
