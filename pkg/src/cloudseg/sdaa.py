"""Sunlight-direction-aware shadow augmentation.

A scene with clouds and shadows is turned into a new training sample in four
steps: the original shadows are removed by per-component histogram matching,
the sun azimuth is rotated by an offset, the cloud mask is shifted along the
new sun direction to obtain a synthetic shadow mask (SSM), and the SSM pixels
are darkened by a gamma transform on raw digital numbers.
"""
from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

AZIMUTH_OFFSETS = (90.0, 180.0, 270.0)
SHIFTS = (20, 40, 60, 80, 100)
GAMMAS = (0.8, 0.825, 0.85, 0.875, 0.9, 0.925, 0.95, 0.975)

RING_WIDTH = 15
HIST_BINS = 256
DN_MAX = 65535


class ShadowFreeSceneError(ValueError):
    """Raised when a scene has no shadow pixels to remove."""


@dataclass(frozen=True)
class SolarGeometry:
    azimuth_deg: float
    zenith_deg: float

    def __post_init__(self):
        if not 0.0 <= self.azimuth_deg < 360.0:
            raise ValueError(f"azimuth {self.azimuth_deg} outside [0, 360)")
        if not 0.0 <= self.zenith_deg < 90.0:
            raise ValueError(f"zenith {self.zenith_deg} outside [0, 90)")

    @classmethod
    def from_elevation(cls, azimuth_deg: float, elevation_deg: float) -> "SolarGeometry":
        return cls(azimuth_deg, 90.0 - elevation_deg)


@dataclass(frozen=True)
class SdaaParams:
    azimuth_offset_deg: float
    shift_r_px: float
    gamma: float
    zenith_offset_deg: float = 0.0

    def __post_init__(self):
        if self.shift_r_px < 0:
            raise ValueError(f"shift must be non-negative, got {self.shift_r_px}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")

    @property
    def tag(self) -> str:
        return f"az{self.azimuth_offset_deg:g}_r{self.shift_r_px:g}_g{self.gamma:g}"


@dataclass
class Scene:
    """Raw 16-bit raster (H, W, 4; R, G, B, Nir) with its masks and sun angles."""

    raster: np.ndarray
    cloud_mask: np.ndarray
    shadow_mask: np.ndarray
    geometry: SolarGeometry
    scene_id: str = ""

    def __post_init__(self):
        self.cloud_mask = np.asarray(self.cloud_mask, dtype=bool)
        self.shadow_mask = np.asarray(self.shadow_mask, dtype=bool)
        hw = self.raster.shape[:2]
        if self.cloud_mask.shape != hw or self.shadow_mask.shape != hw:
            raise ValueError("raster and masks must share height and width")
        if np.any(self.cloud_mask & self.shadow_mask):
            raise ValueError("cloud and shadow masks overlap")


@dataclass
class AugmentedSample:
    raster: np.ndarray
    ssm: np.ndarray
    cloud_mask: np.ndarray
    params: SdaaParams
    provenance: str

    def provenance_record(self) -> dict:
        return {"scene_id": self.provenance, **asdict(self.params)}

    def provenance_json(self) -> str:
        return json.dumps(self.provenance_record(), sort_keys=True, indent=2) + "\n"


_MTL_LINE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*=\s*(.*?)\s*$")


def parse_mtl_fields(text: str) -> dict[str, str]:
    """Flatten a Landsat MTL document into ``{KEY: raw value}``.

    GROUP/END_GROUP nesting is ignored; later duplicates win.
    """
    fields = {}
    for line in text.splitlines():
        match = _MTL_LINE.match(line)
        if not match:
            continue
        key, value = match.groups()
        if key in ("GROUP", "END_GROUP"):
            continue
        fields[key] = value.strip('"')
    return fields


def parse_mtl(text: str) -> SolarGeometry:
    fields = parse_mtl_fields(text)
    values = {}
    for key in ("SUN_AZIMUTH", "SUN_ELEVATION"):
        if key not in fields:
            raise KeyError(f"{key} missing from metadata")
        try:
            values[key] = float(fields[key])
        except ValueError:
            raise ValueError(f"{key} is not a number: {fields[key]!r}") from None
    azimuth = values["SUN_AZIMUTH"]
    # Collection products report azimuth in (-180, 180]
    if -180.0 <= azimuth < 0.0:
        azimuth += 360.0
    return SolarGeometry.from_elevation(azimuth, values["SUN_ELEVATION"])


def format_mtl(geom: SolarGeometry, scene_id: str = "") -> str:
    """Minimal MTL document carrying the sun angles, readable by :func:`parse_mtl`."""
    lines = ["GROUP = L1_METADATA_FILE"]
    if scene_id:
        lines += ["  GROUP = METADATA_FILE_INFO", f'    LANDSAT_SCENE_ID = "{scene_id}"', "  END_GROUP = METADATA_FILE_INFO"]
    lines += [
        "  GROUP = IMAGE_ATTRIBUTES",
        f"    SUN_AZIMUTH = {geom.azimuth_deg!r}",
        f"    SUN_ELEVATION = {90.0 - geom.zenith_deg!r}",
        "  END_GROUP = IMAGE_ATTRIBUTES",
        "END_GROUP = L1_METADATA_FILE",
        "END",
    ]
    return "\n".join(lines) + "\n"


def _histogram(values: np.ndarray):
    edges = np.linspace(values.min(), values.max(), HIST_BINS + 1)
    hist, _ = np.histogram(values, bins=edges)
    cdf = np.concatenate([[0.0], np.cumsum(hist)]) / values.size
    return edges, hist, cdf


def _inverse_cdf(q: np.ndarray, edges, hist, cdf) -> np.ndarray:
    filled = np.flatnonzero(hist)
    # first non-empty bin whose upper CDF exceeds q; at a bin boundary this
    # picks the later bin, which makes forward and inverse maps agree
    pick = np.searchsorted(cdf[filled + 1], q, side="right")
    j = filled[np.clip(pick, 0, filled.size - 1)]
    frac = np.clip((q - cdf[j]) / (cdf[j + 1] - cdf[j]), 0.0, 1.0)
    return edges[j] + frac * (edges[j + 1] - edges[j])


def match_histogram(source: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Map ``source`` values onto the distribution of ``reference``.

    Both histograms use 256 bins over their own value range and the CDFs are
    interpolated linearly inside each bin. The result is real-valued.
    """
    source = np.asarray(source, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if reference.min() == reference.max():
        return np.full(source.shape, reference.min())
    if source.min() == source.max():
        quantile = np.full(source.shape, 0.5)
    else:
        s_edges, _, s_cdf = _histogram(source)
        quantile = np.interp(source, s_edges, s_cdf)
    return _inverse_cdf(quantile, *_histogram(reference))


def _to_dn(values: np.ndarray, dtype) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, DN_MAX).astype(dtype)


def remove_shadows(scene: Scene) -> np.ndarray:
    """Return a copy of the raster with every shadow component histogram-matched
    to its shadow-free, cloud-free neighbourhood, band by band."""
    shadow = scene.shadow_mask
    if not shadow.any():
        raise ShadowFreeSceneError(f"scene {scene.scene_id!r} has no shadow pixels")
    raster = scene.raster
    empty = np.all(raster == 0, axis=-1)
    clear = ~shadow & ~scene.cloud_mask & ~empty
    if not clear.any():
        raise ValueError(f"scene {scene.scene_id!r} has no clear pixels to match against")

    labels, n = ndimage.label(shadow, structure=np.ones((3, 3), dtype=bool))
    out = raster.copy()
    square = np.ones((3, 3), dtype=bool)
    for k, window in enumerate(ndimage.find_objects(labels), start=1):
        # grow the bounding box by the ring width so dilation stays local
        rows = slice(max(window[0].start - RING_WIDTH, 0), window[0].stop + RING_WIDTH)
        cols = slice(max(window[1].start - RING_WIDTH, 0), window[1].stop + RING_WIDTH)
        component = labels[rows, cols] == k
        ring = ndimage.binary_dilation(component, structure=square, iterations=RING_WIDTH)
        ring &= clear[rows, cols]
        for b in range(raster.shape[-1]):
            band = raster[rows, cols, b]
            reference = band[ring] if ring.any() else raster[..., b][clear]
            matched = match_histogram(band[component], reference)
            out[rows, cols, b][component] = _to_dn(matched, raster.dtype)
    return out


def shadow_shift(geom: SolarGeometry, params: SdaaParams) -> tuple[float, float]:
    """Real-valued (dy, dx) displacement from cloud to cast shadow, in pixels."""
    zen = math.radians(geom.zenith_deg + params.zenith_offset_deg)
    az = math.radians(geom.azimuth_deg + params.azimuth_offset_deg)
    return (params.shift_r_px * math.sin(zen) * math.cos(az),
            params.shift_r_px * math.sin(zen) * math.sin(az))


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5)).astype(np.int64)


def project_shadows(cloud_mask: np.ndarray, geom: SolarGeometry, params: SdaaParams) -> np.ndarray:
    """Synthetic shadow mask obtained by shifting every cloud pixel.

    Positions that leave the raster are dropped, and so are positions that
    land on cloud, since a cloud hides the shadow beneath it.
    """
    cloud_mask = np.asarray(cloud_mask, dtype=bool)
    if not cloud_mask.any():
        raise ValueError("cloud mask is empty")
    h, w = cloud_mask.shape
    dy, dx = shadow_shift(geom, params)
    ys, xs = np.nonzero(cloud_mask)
    ys = _round_half_away(ys + dy)
    xs = _round_half_away(xs + dx)
    inside = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    ssm = np.zeros_like(cloud_mask)
    ssm[ys[inside], xs[inside]] = True
    ssm &= ~cloud_mask
    return ssm


def apply_gamma(raster: np.ndarray, ssm: np.ndarray, gamma: float) -> np.ndarray:
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    out = raster.copy()
    selected = raster[ssm].astype(np.float64)
    out[ssm] = _to_dn(selected**gamma, raster.dtype)
    return out


def augment(scene: Scene, params: SdaaParams) -> AugmentedSample:
    if not scene.cloud_mask.any():
        raise ValueError(f"scene {scene.scene_id!r} has no clouds to cast shadows")
    deshadowed = remove_shadows(scene)
    ssm = project_shadows(scene.cloud_mask, scene.geometry, params)
    raster = apply_gamma(deshadowed, ssm, params.gamma)
    return AugmentedSample(raster, ssm, scene.cloud_mask.copy(), params, scene.scene_id)


def augment_all(scene: Scene, params_list) -> list[AugmentedSample]:
    """``augment`` for several parameter sets, removing the original shadows once."""
    if not scene.cloud_mask.any():
        raise ValueError(f"scene {scene.scene_id!r} has no clouds to cast shadows")
    deshadowed = remove_shadows(scene)
    out = []
    for params in params_list:
        ssm = project_shadows(scene.cloud_mask, scene.geometry, params)
        out.append(AugmentedSample(apply_gamma(deshadowed, ssm, params.gamma), ssm,
                                   scene.cloud_mask.copy(), params, scene.scene_id))
    return out


def default_param_grid() -> list[SdaaParams]:
    return [SdaaParams(a, r, g) for a, r, g in itertools.product(AZIMUTH_OFFSETS, SHIFTS, GAMMAS)]
