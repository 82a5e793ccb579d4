"""Online geometric augmentation applied identically to a patch and its GT."""
from __future__ import annotations

import numpy as np

from .tiling import resize_bilinear, resize_nearest


def geometric_augment(patch: np.ndarray, gt: np.ndarray, rng: np.random.Generator,
                      flip: bool = True, rotate: bool = True,
                      zoom_range: tuple[float, float] = (1.0, 1.2)):
    """Random horizontal flip, rotation by a multiple of 90 degrees and central zoom.

    ``patch`` is ``(H, W, C)`` and ``gt`` is ``(H, W)`` or ``(H, W, K)``. The
    GT is zoomed with nearest-neighbour sampling so it stays binary. All random
    draws are taken from ``rng`` in a fixed order.
    """
    do_flip = bool(rng.integers(2)) if flip else False
    k = int(rng.integers(4)) if rotate else 0
    zoom = float(rng.uniform(*zoom_range)) if zoom_range[1] > zoom_range[0] else zoom_range[0]

    if do_flip:
        patch, gt = patch[:, ::-1], gt[:, ::-1]
    if k:
        patch, gt = np.rot90(patch, k, axes=(0, 1)), np.rot90(gt, k, axes=(0, 1))
    if zoom > 1.0:
        h, w = patch.shape[:2]
        ch, cw = max(int(round(h / zoom)), 1), max(int(round(w / zoom)), 1)
        r0, c0 = (h - ch) // 2, (w - cw) // 2
        patch = resize_bilinear(patch[r0:r0 + ch, c0:c0 + cw], h, w)
        gt = resize_nearest(gt[r0:r0 + ch, c0:c0 + cw], h, w)
    return np.ascontiguousarray(patch), np.ascontiguousarray(gt)
