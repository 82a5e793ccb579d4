"""Synthetic four-band scenes with physically consistent cloud shadows."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..sdaa import Scene, SdaaParams, SolarGeometry, project_shadows

# typical surface DN per band (R, G, B, Nir)
GROUND_DN = np.array([7500.0, 8500.0, 9500.0, 15000.0])
CLOUD_DN = np.array([26000.0, 26500.0, 27500.0, 27000.0])
# snow-like ground: as bright as cloud in the visible bands, dark in Nir
BRIGHT_GROUND_DN = np.array([24000.0, 24500.0, 25500.0, 12000.0])
SHADOW_FACTOR = 0.45


def _blobs(rng, shape, coverage, smoothness):
    """Boolean mask of smooth random blobs covering ``coverage`` of the pixels."""
    if coverage <= 0:
        return np.zeros(shape, dtype=bool)
    if coverage >= 1:
        return np.ones(shape, dtype=bool)
    field = ndimage.gaussian_filter(rng.standard_normal(shape), smoothness, mode="wrap")
    return field > np.quantile(field, 1.0 - coverage)


def synth_scene(seed: int, dims=(64, 64), cloud_cover: float = 0.3,
                geometry: SolarGeometry | None = None, scene_id: str | None = None,
                bright_ground: float = 0.0, fill_fraction: float = 0.0) -> Scene:
    """Deterministic synthetic scene.

    Clouds are thresholded smooth noise at the requested coverage. Shadows are
    cast from the clouds along the sun direction with a random shift, the same
    projection SDAA uses. ``bright_ground`` adds snow-like confusers and
    ``fill_fraction`` zeroes a corner triangle in every band, like the fill
    around north-aligned Landsat scenes.
    """
    rng = np.random.default_rng(seed)
    h, w = dims
    if geometry is None:
        geometry = SolarGeometry(float(rng.uniform(0, 360)), float(rng.uniform(20, 60)))
    smooth = max(min(h, w) / 12.0, 1.0)

    texture = ndimage.gaussian_filter(rng.standard_normal((h, w)), smooth / 2, mode="wrap")
    texture /= texture.std() + 1e-12
    raster = GROUND_DN * (1.0 + 0.12 * texture[..., None])

    snow = _blobs(rng, (h, w), bright_ground, smooth)
    raster[snow] = BRIGHT_GROUND_DN * (1.0 + 0.05 * texture[snow][:, None])

    cloud = _blobs(rng, (h, w), cloud_cover, smooth)
    shift = float(rng.uniform(0.08, 0.2)) * min(h, w)
    if cloud.any():
        shadow = project_shadows(cloud, geometry, SdaaParams(0.0, shift, 1.0))
    else:
        shadow = np.zeros((h, w), dtype=bool)
    raster[shadow] *= SHADOW_FACTOR
    density = np.clip(0.8 + 0.2 * texture[cloud], 0.5, 1.0)
    raster[cloud] = CLOUD_DN * density[:, None]

    raster += rng.normal(0.0, 150.0, size=raster.shape)
    raster = np.clip(np.rint(raster), 1, 65535).astype(np.uint16)

    if fill_fraction > 0:
        yy, xx = np.mgrid[0:h, 0:w]
        # corner triangle with area fill_fraction * h * w
        reach = np.sqrt(2.0 * fill_fraction) * min(h, w)
        fill = yy + xx < reach
        raster[fill] = 0
        cloud &= ~fill
        shadow &= ~fill

    return Scene(raster, cloud, shadow, geometry, scene_id or f"synth_{seed:06d}")
