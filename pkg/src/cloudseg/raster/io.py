"""File formats for bands, masks, probability maps and scene directories.

Bands are single-channel 16-bit TIFFs and masks are 8-bit TIFFs holding 0 or
255. Probability maps are raw little-endian float32 arrays next to a JSON
sidecar carrying their shape. A scene directory holds one file per band, the
cloud and shadow masks and an MTL metadata file.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import tifffile
from PIL import Image

from ..sdaa import Scene, format_mtl, parse_mtl

BANDS = ("red", "green", "blue", "nir")


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() in (".tif", ".tiff"):
        return tifffile.imread(path)
    with Image.open(path) as im:
        return np.array(im)


def write_band(path, band: np.ndarray) -> None:
    band = np.asarray(band)
    if band.ndim != 2:
        raise ValueError("bands are single-channel")
    tifffile.imwrite(path, band.astype(np.uint16))


def write_mask(path, mask: np.ndarray) -> None:
    tifffile.imwrite(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def read_mask(path) -> np.ndarray:
    return read_image(path) > 127


def write_prob_map(path, prob: np.ndarray, scene_id: str = "") -> Path:
    """Write ``<path>.f32`` and its ``<path>.json`` sidecar; return the data path."""
    path = Path(path).with_suffix(".f32")
    prob = np.asarray(prob, dtype="<f4")
    path.write_bytes(np.ascontiguousarray(prob).tobytes())
    meta = {"shape": list(prob.shape), "dtype": "float32-le", "order": "row-major", "scene_id": scene_id}
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path


def read_prob_map(path) -> tuple[np.ndarray, dict]:
    path = Path(path).with_suffix(".f32")
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<f4")
    return data.reshape(meta["shape"]), meta


def write_scene(root, scene: Scene) -> Path:
    d = Path(root) / scene.scene_id
    d.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(BANDS):
        write_band(d / f"{name}.tif", scene.raster[..., i])
    write_mask(d / "cloud.tif", scene.cloud_mask)
    write_mask(d / "shadow.tif", scene.shadow_mask)
    (d / "MTL.txt").write_text(format_mtl(scene.geometry, scene.scene_id))
    return d


def read_scene(directory) -> Scene:
    d = Path(directory)
    raster = np.stack([read_image(d / f"{name}.tif") for name in BANDS], axis=-1).astype(np.uint16)
    return Scene(
        raster=raster,
        cloud_mask=read_mask(d / "cloud.tif"),
        shadow_mask=read_mask(d / "shadow.tif"),
        geometry=parse_mtl((d / "MTL.txt").read_text()),
        scene_id=d.name,
    )


def list_scenes(root) -> list[Path]:
    """Scene directories under ``root``, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"no such scene directory: {root}")
    return sorted(p for p in root.iterdir() if (p / "MTL.txt").is_file())
