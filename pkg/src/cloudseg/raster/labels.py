"""Relabelling of dataset class codes into cloud / shadow / clear ground truth."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# USGS Landsat 8 Biome labels
BIOME_FILL, BIOME_SHADOW, BIOME_CLEAR, BIOME_THIN_CLOUD, BIOME_CLOUD = 0, 64, 128, 192, 255

# SPARCS labels
(SPARCS_SHADOW, SPARCS_SHADOW_OVER_WATER, SPARCS_WATER, SPARCS_SNOW,
 SPARCS_LAND, SPARCS_CLOUD, SPARCS_FLOODED) = range(7)


class MergeScheme(str, enum.Enum):
    BIOME_BINARY_CLOUD = "biome-binary-cloud"
    BIOME_BINARY_SHADOW = "biome-binary-shadow"
    SPARCS_THREE_CLASS = "sparcs-three-class"
    SPARCS_BINARY = "sparcs-binary"
    SPARCS_BINARY_SHADOW = "sparcs-binary-shadow"


_SCHEMES = {
    MergeScheme.BIOME_BINARY_CLOUD: {
        "cloud": (BIOME_CLOUD, BIOME_THIN_CLOUD),
        "clear": (BIOME_CLEAR, BIOME_SHADOW),
    },
    MergeScheme.BIOME_BINARY_SHADOW: {
        "shadow": (BIOME_SHADOW,),
        "clear": (BIOME_CLEAR, BIOME_THIN_CLOUD, BIOME_CLOUD),
    },
    MergeScheme.SPARCS_THREE_CLASS: {
        "cloud": (SPARCS_CLOUD,),
        "shadow": (SPARCS_SHADOW, SPARCS_SHADOW_OVER_WATER),
        "clear": (SPARCS_WATER, SPARCS_SNOW, SPARCS_LAND, SPARCS_FLOODED),
    },
    MergeScheme.SPARCS_BINARY: {
        "cloud": (SPARCS_CLOUD,),
        "clear": (SPARCS_SHADOW, SPARCS_SHADOW_OVER_WATER, SPARCS_WATER, SPARCS_SNOW,
                  SPARCS_LAND, SPARCS_FLOODED),
    },
    MergeScheme.SPARCS_BINARY_SHADOW: {
        "shadow": (SPARCS_SHADOW, SPARCS_SHADOW_OVER_WATER),
        "clear": (SPARCS_WATER, SPARCS_SNOW, SPARCS_LAND, SPARCS_CLOUD, SPARCS_FLOODED),
    },
}


@dataclass
class GroundTruth:
    """One boolean mask per class, in a fixed class order."""

    masks: dict[str, np.ndarray]

    @property
    def classes(self) -> list[str]:
        return list(self.masks)

    def stack(self) -> np.ndarray:
        """``(H, W, K)`` boolean stack in class order."""
        return np.stack([self.masks[c] for c in self.masks], axis=-1)

    def labels(self) -> np.ndarray:
        """Class index per pixel, -1 where no class applies (fill)."""
        stack = self.stack()
        return np.where(stack.any(axis=-1), np.argmax(stack, axis=-1), -1)


def merge_classes(labels: np.ndarray, scheme: MergeScheme | str) -> GroundTruth:
    """Collapse dataset label codes; pixels with unlisted codes (Biome fill) get no class."""
    table = _SCHEMES[MergeScheme(scheme)]
    labels = np.asarray(labels)
    return GroundTruth({name: np.isin(labels, codes) for name, codes in table.items()})


def from_masks(cloud: np.ndarray, shadow: np.ndarray, task: str) -> GroundTruth:
    """Ground truth for ``task`` in {"cloud", "shadow", "multiclass"} from boolean masks."""
    cloud = np.asarray(cloud, dtype=bool)
    shadow = np.asarray(shadow, dtype=bool)
    if task == "cloud":
        return GroundTruth({"cloud": cloud, "clear": ~cloud})
    if task == "shadow":
        return GroundTruth({"shadow": shadow, "clear": ~shadow})
    if task == "multiclass":
        return GroundTruth({"cloud": cloud, "shadow": shadow & ~cloud, "clear": ~(cloud | shadow)})
    raise ValueError(f"unknown task {task!r}")
