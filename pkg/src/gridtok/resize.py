"""Deterministic image resampling in plain numpy.

Interpolation kernels in imaging libraries drift subtly between versions;
doing the arithmetic here keeps partition plans and pipeline outputs
byte-reproducible. Both kernels use half-pixel-center coordinate mapping.
"""

from __future__ import annotations

import numpy as np


def _source_coords(out_size: int, in_size: int) -> np.ndarray:
    scale = in_size / out_size
    coords = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    return np.clip(coords, 0.0, in_size - 1.0)


def resize(image: np.ndarray, width: int, height: int, kernel: str = "bilinear") -> np.ndarray:
    """Resize ``image`` (HxW or HxWxC) to ``height`` x ``width``.

    Anisotropic stretch: each axis is scaled independently, no aspect
    preservation or letterboxing. uint8 inputs come back as rounded uint8;
    float inputs come back as float64. A same-size call returns a copy.
    """
    if image.ndim not in (2, 3):
        raise ValueError(f"expected HxW or HxWxC image, got shape {image.shape}")
    if width < 1 or height < 1:
        raise ValueError(f"target size must be positive, got {width}x{height}")
    in_h, in_w = image.shape[:2]
    if (in_h, in_w) == (height, width):
        return image.copy()

    if kernel == "nearest":
        ys = np.minimum((np.arange(height) + 0.5) * (in_h / height), in_h - 1).astype(np.intp)
        xs = np.minimum((np.arange(width) + 0.5) * (in_w / width), in_w - 1).astype(np.intp)
        return image[np.ix_(ys, xs)].copy()
    if kernel != "bilinear":
        raise ValueError(f"unknown resample kernel {kernel!r}")

    src = image.astype(np.float64, copy=False)
    sy = _source_coords(height, in_h)
    sx = _source_coords(width, in_w)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    tail = (1,) * (src.ndim - 2)
    fy = (sy - y0).reshape(height, 1, *tail)
    fx = (sx - x0).reshape(1, width, *tail)

    # Lerp form a + t*(b - a): constant inputs stay exactly constant.
    rows0 = src[y0]
    rows1 = src[y1]
    top = rows0[:, x0] + fx * (rows0[:, x1] - rows0[:, x0])
    bottom = rows1[:, x0] + fx * (rows1[:, x1] - rows1[:, x0])
    out = top + fy * (bottom - top)

    if image.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out
