"""Raster handling: tiling, resizing, stitching, augmentation, I/O and synthetic data."""
from .augment import geometric_augment
from .labels import GroundTruth, MergeScheme, from_masks, merge_classes
from .synth import synth_scene
from .tiling import (
    Overlap,
    argmax_mask,
    binarize,
    crop,
    denormalize,
    empty_fraction,
    extract_patches,
    interp_matrix,
    is_empty_patch,
    normalize,
    resize_bilinear,
    resize_nearest,
    stitch,
)

__all__ = [
    "GroundTruth", "MergeScheme", "Overlap",
    "argmax_mask", "binarize", "crop", "denormalize", "empty_fraction", "extract_patches",
    "from_masks", "geometric_augment", "interp_matrix", "is_empty_patch", "merge_classes",
    "normalize", "resize_bilinear", "resize_nearest", "stitch", "synth_scene",
]
