"""Patch origins, stitching, resizing and thresholding of scene rasters."""
from __future__ import annotations

import enum
import math

import numpy as np

DN_MAX = 65535
DEFAULT_PATCH = 384


class Overlap(str, enum.Enum):
    NONE = "none"
    HALF = "half"


def _axis_origins(length: int, size: int, stride: int) -> list[int]:
    n = math.ceil((length - size) / stride) + 1
    # the last window is pulled back inside the scene so every patch is full size
    return [min(i * stride, length - size) for i in range(n)]


def extract_patches(height: int, width: int, patch_size: int = DEFAULT_PATCH,
                    mode: Overlap | str = Overlap.NONE) -> list[tuple[int, int]]:
    """Row-major list of patch origins covering an ``height x width`` scene.

    Non-overlapping tiling yields ``ceil(H/ps) * ceil(W/ps)`` patches; the last
    row and column are anchored to the scene edge, so they overlap their
    neighbours when the size does not divide evenly.
    """
    mode = Overlap(mode)
    if patch_size < 1:
        raise ValueError("patch size must be positive")
    if patch_size > min(height, width):
        raise ValueError(f"patch {patch_size} larger than scene {height}x{width}")
    stride = patch_size if mode is Overlap.NONE else max(patch_size // 2, 1)
    rows = _axis_origins(height, patch_size, stride)
    cols = _axis_origins(width, patch_size, stride)
    return [(r, c) for r in rows for c in cols]


def crop(raster: np.ndarray, origin: tuple[int, int], size: int) -> np.ndarray:
    r, c = origin
    return raster[r:r + size, c:c + size]


def empty_fraction(patch: np.ndarray) -> float:
    """Fraction of pixels whose every band is zero."""
    patch = np.asarray(patch)
    empty = np.all(patch == 0, axis=-1) if patch.ndim == 3 else patch == 0
    return float(empty.mean())


def is_empty_patch(patch: np.ndarray, threshold: float = 0.8) -> bool:
    return empty_fraction(patch) > threshold


def normalize(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / DN_MAX


def denormalize(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(values) * DN_MAX + 0.5), 0, DN_MAX).astype(np.uint16)


def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` corner-aligned linear interpolation weights."""
    if n_in < 1 or n_out < 1:
        raise ValueError("sizes must be positive")
    m = np.zeros((n_out, n_in))
    if n_in == 1 or n_out == 1:
        m[:, 0] = 1.0
        return m
    pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.minimum(np.floor(pos).astype(int), n_in - 2)
    frac = pos - lo
    rows = np.arange(n_out)
    m[rows, lo] = 1.0 - frac
    m[rows, lo + 1] += frac
    return m


def resize_bilinear(raster: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of an ``(H, W)`` or ``(H, W, C)`` array."""
    raster = np.asarray(raster, dtype=np.float64)
    h, w = raster.shape[:2]
    if (h, w) == (out_h, out_w):
        return raster.copy()
    rows = interp_matrix(h, out_h)
    cols = interp_matrix(w, out_w)
    return np.einsum("ih,hw...,jw->ij...", rows, raster, cols, optimize=True)


def resize_nearest(raster: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = raster.shape[:2]
    ri = np.minimum((np.arange(out_h) * h / out_h).astype(int), h - 1)
    ci = np.minimum((np.arange(out_w) * w / out_w).astype(int), w - 1)
    return raster[ri][:, ci]


def stitch(patch_maps, origins, height: int, width: int) -> np.ndarray:
    """Average overlapping patch outputs into a scene map.

    Raises ``ValueError`` if any pixel is covered by no patch.
    """
    patch_maps = list(patch_maps)
    if not patch_maps:
        raise ValueError("no patches to stitch")
    extra = patch_maps[0].shape[2:]
    mean = np.zeros((height, width) + extra)
    count = np.zeros((height, width) + (1,) * len(extra))
    for pm, (r, c) in zip(patch_maps, origins, strict=True):
        ph, pw = pm.shape[:2]
        region = (slice(r, r + ph), slice(c, c + pw))
        count[region] += 1
        # running mean: exact when all covering patches agree
        mean[region] += (pm - mean[region]) / count[region]
    if np.any(count == 0):
        raise ValueError(f"{int(np.sum(count == 0))} pixels not covered by any patch")
    return mean


def binarize(prob_map: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return np.asarray(prob_map) >= threshold


def argmax_mask(prob_map: np.ndarray) -> np.ndarray:
    """One-hot ``(H, W, K)`` masks; ties go to the lower class index."""
    prob_map = np.asarray(prob_map)
    k = prob_map.shape[-1]
    return np.eye(k, dtype=bool)[np.argmax(prob_map, axis=-1)]
