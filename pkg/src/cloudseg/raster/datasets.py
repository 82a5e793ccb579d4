"""Enumerate and load on-disk datasets. Nothing here downloads data.

38-Cloud and 95-Cloud store one file per band and patch in per-band
directories, e.g. ``train_red/red_patch_12_2_by_7_LC08_L1TP_...TIF`` with the
GT under ``train_gt/gt_patch_...``. SPARCS ships per-image ``<id>_data.tif``
(ten Landsat 8 bands) and ``<id>_mask.png`` label images.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io import BANDS, read_image, read_mask, write_band, write_mask
from .labels import GroundTruth, MergeScheme, merge_classes

_PATCH_NAME = re.compile(r"^(red|green|blue|nir|gt)_(patch_\d+_\d+_by_\d+)_(.+)\.(tif|TIF|tiff|png)$")

# positions of Landsat 8 B4, B3, B2, B5 (R, G, B, Nir) in SPARCS data cubes
SPARCS_RGBN = (3, 2, 1, 4)
SPARCS_BANDS = 10


@dataclass(frozen=True)
class PatchRecord:
    patch_id: str
    scene_id: str
    band_paths: tuple[Path, ...]
    gt_path: Path | None


def patch_id(index: int, row: int, col: int) -> str:
    """38-Cloud style identifier: running index, then row ``by`` column (1-based)."""
    return f"patch_{index}_{row + 1}_by_{col + 1}"


def cloud38_patches(root, split: str = "train") -> list[PatchRecord]:
    """Patch records of a 38-Cloud / 95-Cloud style directory tree."""
    root = Path(root)
    red_dir = root / f"{split}_red"
    if not red_dir.is_dir():
        raise FileNotFoundError(red_dir)
    records = []
    for red in sorted(red_dir.iterdir()):
        m = _PATCH_NAME.match(red.name)
        if not m or m.group(1) != "red":
            continue
        stem = red.name[len("red_"):]
        paths = tuple(root / f"{split}_{b}" / f"{b}_{stem}" for b in BANDS)
        missing = [p for p in paths if not p.is_file()]
        if missing:
            raise FileNotFoundError(missing[0])
        gt = root / f"{split}_gt" / f"gt_{stem}"
        records.append(PatchRecord(m.group(2), m.group(3), paths, gt if gt.is_file() else None))
    return records


def load_patch(record: PatchRecord) -> tuple[np.ndarray, np.ndarray | None]:
    raster = np.stack([read_image(p) for p in record.band_paths], axis=-1).astype(np.uint16)
    gt = read_mask(record.gt_path) if record.gt_path is not None else None
    return raster, gt


def write_cloud38_patch(root, split: str, pid: str, scene_id: str, raster: np.ndarray,
                        gt: np.ndarray | None = None) -> None:
    root = Path(root)
    for i, b in enumerate(BANDS):
        d = root / f"{split}_{b}"
        d.mkdir(parents=True, exist_ok=True)
        write_band(d / f"{b}_{pid}_{scene_id}.TIF", raster[..., i])
    if gt is not None:
        d = root / f"{split}_gt"
        d.mkdir(parents=True, exist_ok=True)
        write_mask(d / f"gt_{pid}_{scene_id}.TIF", gt)


def sparcs_images(root) -> list[str]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(root)
    return sorted(p.name[: -len("_data.tif")] for p in root.glob("*_data.tif"))


def load_sparcs(root, image_id: str, scheme: MergeScheme | str = MergeScheme.SPARCS_THREE_CLASS
                ) -> tuple[np.ndarray, GroundTruth]:
    """R, G, B, Nir raster and merged ground truth of one SPARCS image."""
    root = Path(root)
    cube = read_image(root / f"{image_id}_data.tif")
    if cube.ndim != 3:
        raise ValueError(f"{image_id}: expected a multi-band cube, got shape {cube.shape}")
    if cube.shape[-1] != SPARCS_BANDS and cube.shape[0] == SPARCS_BANDS:
        cube = np.moveaxis(cube, 0, -1)
    raster = cube[..., list(SPARCS_RGBN)].astype(np.uint16)
    labels = read_image(root / f"{image_id}_mask.png")
    return raster, merge_classes(labels, scheme)
