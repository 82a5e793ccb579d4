import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cloudseg import sdaa
from cloudseg.sdaa import Scene, SdaaParams, SolarGeometry

FLAT_MTL = "SUN_AZIMUTH = 127.68\nSUN_ELEVATION = 60.00\n"
NESTED_MTL = """GROUP = L1_METADATA_FILE
  GROUP = METADATA_FILE_INFO
    ORIGIN = "Image courtesy of the U.S. Geological Survey"
    LANDSAT_SCENE_ID = "LC80010812013365LGN00"
  END_GROUP = METADATA_FILE_INFO
  GROUP = IMAGE_ATTRIBUTES
    CLOUD_COVER = 34.56
    SUN_AZIMUTH = 127.68
    SUN_ELEVATION = 60.00
    EARTH_SUN_DISTANCE = 0.9833
  END_GROUP = IMAGE_ATTRIBUTES
END_GROUP = L1_METADATA_FILE
END
"""


def square_scene(h=80, w=80, seed=0):
    """Cloud block with its own shadow to the south on a textured background."""
    rng = np.random.default_rng(seed)
    raster = rng.integers(8000, 10000, size=(h, w, 4)).astype(np.uint16)
    cloud = np.zeros((h, w), bool)
    cloud[10:25, 10:30] = True
    shadow = np.zeros((h, w), bool)
    shadow[30:40, 12:28] = True
    raster[cloud] = 25000
    raster[shadow] = (raster[shadow] * 0.5).astype(np.uint16)
    return Scene(raster, cloud, shadow, SolarGeometry(127.68, 30.0), "synthetic")


class TestParseMtl:
    def test_flat(self):
        g = sdaa.parse_mtl(FLAT_MTL)
        assert g.azimuth_deg == 127.68
        assert g.zenith_deg == pytest.approx(30.0, abs=1e-12)

    def test_nested(self):
        assert sdaa.parse_mtl(NESTED_MTL) == sdaa.parse_mtl(FLAT_MTL)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            sdaa.parse_mtl("SUN_AZIMUTH = 10\nSUN_ELEVATION = 95.0")

    def test_missing_key(self):
        with pytest.raises(KeyError):
            sdaa.parse_mtl("SUN_ELEVATION = 45.0")

    def test_bad_number(self):
        with pytest.raises(ValueError):
            sdaa.parse_mtl("SUN_AZIMUTH = east\nSUN_ELEVATION = 45.0")

    def test_negative_azimuth_wraps(self):
        g = sdaa.parse_mtl("SUN_AZIMUTH = -40.5\nSUN_ELEVATION = 45.0")
        assert g.azimuth_deg == pytest.approx(319.5)

    @given(st.floats(0, 359.99), st.floats(0.01, 90.0))
    def test_round_trip(self, az, elev):
        g = SolarGeometry.from_elevation(az, elev)
        parsed = sdaa.parse_mtl(sdaa.format_mtl(g, "X"))
        assert parsed.azimuth_deg == g.azimuth_deg
        assert parsed.zenith_deg == pytest.approx(g.zenith_deg, abs=1e-12)


class TestRemoveShadows:
    def test_constant_patch_becomes_background(self):
        raster = np.full((40, 40, 4), 9000, np.uint16)
        shadow = np.zeros((40, 40), bool)
        shadow[15:25, 15:25] = True
        raster[shadow] = 3000
        scene = Scene(raster, np.zeros_like(shadow), shadow, SolarGeometry(0, 30))
        out = sdaa.remove_shadows(scene)
        assert np.all(out == 9000)

    def test_matching_to_self_is_identity(self):
        rng = np.random.default_rng(7)
        values = rng.integers(1000, 5000, size=64).astype(np.float64)
        np.testing.assert_allclose(sdaa.match_histogram(values, values), values, atol=0.5)

    def test_same_distribution_region(self):
        # shadow region whose pixels are a permutation of its ring's pixels
        raster = np.full((60, 60, 4), 0, np.uint16)
        rng = np.random.default_rng(1)
        raster[...] = rng.integers(2000, 2400, size=(60, 60, 4))
        shadow = np.zeros((60, 60), bool)
        shadow[25:35, 25:35] = True
        scene = Scene(raster, np.zeros_like(shadow), shadow, SolarGeometry(0, 30))
        out = sdaa.remove_shadows(scene)
        # the ring histogram only approximates the shadow's; the shift stays small
        assert np.abs(out.astype(int) - raster.astype(int))[shadow].mean() < 20

    def test_non_shadow_unchanged(self):
        scene = square_scene()
        out = sdaa.remove_shadows(scene)
        np.testing.assert_array_equal(out[~scene.shadow_mask], scene.raster[~scene.shadow_mask])
        # shadow brightened back to background level
        assert out[scene.shadow_mask].mean() > 1.5 * scene.raster[scene.shadow_mask].mean()

    def test_empty_shadow_rejected(self):
        scene = square_scene()
        scene.shadow_mask[:] = False
        with pytest.raises(sdaa.ShadowFreeSceneError):
            sdaa.remove_shadows(scene)

    def test_all_shadow_rejected(self):
        raster = np.full((8, 8, 4), 100, np.uint16)
        scene = Scene(raster, np.zeros((8, 8)), np.ones((8, 8)), SolarGeometry(0, 30))
        with pytest.raises(ValueError):
            sdaa.remove_shadows(scene)

    def test_ring_blocked_falls_back_to_global(self):
        raster = np.full((60, 60, 4), 7000, np.uint16)
        cloud = np.zeros((60, 60), bool)
        cloud[:40, :40] = True
        shadow = np.zeros((60, 60), bool)
        shadow[10:20, 10:20] = True
        cloud &= ~shadow
        raster[cloud] = 30000
        raster[shadow] = 1000
        out = sdaa.remove_shadows(Scene(raster, cloud, shadow, SolarGeometry(0, 30)))
        assert np.all(out[shadow] == 7000)


class TestProjectShadows:
    def setup_method(self):
        self.cloud = np.zeros((200, 200), bool)
        self.cloud[20:40, 60:90] = True

    def test_zero_shift_is_empty(self):
        ssm = sdaa.project_shadows(self.cloud, SolarGeometry(127.68, 30), SdaaParams(90, 0, 0.9))
        assert not ssm.any()

    def test_due_north_offset(self):
        ssm = sdaa.project_shadows(self.cloud, SolarGeometry(0.0, 30.0), SdaaParams(0, 100, 0.9))
        expected = np.zeros_like(self.cloud)
        expected[70:90, 60:90] = True
        np.testing.assert_array_equal(ssm, expected)

    def test_reference_angle(self):
        geom = SolarGeometry(127.68, 30.0)
        dy, dx = sdaa.shadow_shift(geom, SdaaParams(90, 100, 0.9))
        # mpmath: 50 cos(217.68 deg) = -39.5718, 50 sin(217.68 deg) = -30.5625
        assert dy == pytest.approx(-39.57184739826929, abs=1e-9)
        assert dx == pytest.approx(-30.56254069098458, abs=1e-9)
        cloud = np.zeros((200, 200), bool)
        cloud[100, 100] = True
        ssm = sdaa.project_shadows(cloud, geom, SdaaParams(90, 100, 0.9))
        assert list(zip(*np.nonzero(ssm))) == [(60, 69)]

    def test_out_of_bounds_discarded(self):
        cloud = np.zeros((10, 10), bool)
        cloud[0, 0] = True
        ssm = sdaa.project_shadows(cloud, SolarGeometry(0.0, 30.0), SdaaParams(180, 20, 0.9))
        assert not ssm.any()

    def test_empty_cloud(self):
        with pytest.raises(ValueError):
            sdaa.project_shadows(np.zeros((5, 5), bool), SolarGeometry(0, 30), SdaaParams(90, 20, 0.9))

    def test_round_half_away(self):
        np.testing.assert_array_equal(sdaa._round_half_away(np.array([-2.5, -0.5, 0.5, 2.5, 1.49])), [-3, -1, 1, 3, 1])

    @given(st.sampled_from(sdaa.default_param_grid()), st.floats(0, 359.9), st.floats(0, 89.9))
    def test_disjoint_from_cloud(self, params, az, zen):
        ssm = sdaa.project_shadows(self.cloud, SolarGeometry(az, zen), params)
        assert not np.any(ssm & self.cloud)


class TestGamma:
    def test_identity(self):
        raster = np.arange(64, dtype=np.uint16).reshape(4, 4, 4) * 1000
        out = sdaa.apply_gamma(raster, np.ones((4, 4), bool), 1.0)
        np.testing.assert_array_equal(out, raster)

    def test_reference_value(self):
        raster = np.full((2, 2, 4), 10000, np.uint16)
        mask = np.array([[True, False], [False, False]])
        out = sdaa.apply_gamma(raster, mask, 0.9)
        assert np.all(out[0, 0] == 3981)
        assert np.all(out[~mask] == 10000)

    def test_invalid_gamma(self):
        with pytest.raises(ValueError):
            sdaa.apply_gamma(np.ones((2, 2, 4), np.uint16), np.ones((2, 2), bool), 0.0)

    @given(st.integers(1, 65535), st.sampled_from(sdaa.GAMMAS))
    def test_never_brightens(self, dn, gamma):
        raster = np.full((1, 1, 4), dn, np.uint16)
        assert np.all(sdaa.apply_gamma(raster, np.ones((1, 1), bool), gamma) <= dn)


class TestAugment:
    def test_changes_confined_to_shadows(self):
        scene = square_scene()
        params = SdaaParams(180, 20, 0.975)
        sample = sdaa.augment(scene, params)
        changed = np.any(sample.raster != scene.raster, axis=-1)
        assert not np.any(changed & ~(scene.shadow_mask | sample.ssm))
        assert sample.ssm.any()
        np.testing.assert_array_equal(sample.cloud_mask, scene.cloud_mask)
        assert sample.provenance == "synthetic"

    def test_cloud_pixels_bit_identical(self):
        scene = square_scene()
        sample = sdaa.augment(scene, SdaaParams(270, 40, 0.8))
        deshadowed = sdaa.remove_shadows(scene)
        np.testing.assert_array_equal(sample.raster[scene.cloud_mask], deshadowed[scene.cloud_mask])
        assert not np.any(sample.ssm & sample.cloud_mask)

    def test_shadow_free_rejected(self):
        scene = square_scene()
        scene.shadow_mask[:] = False
        with pytest.raises(sdaa.ShadowFreeSceneError):
            sdaa.augment(scene, SdaaParams(90, 20, 0.9))

    def test_offsets_rotate_shift(self):
        scene = square_scene(h=120, w=120)
        cloud = np.zeros((120, 120), bool)
        cloud[55:60, 55:60] = True
        scene = Scene(scene.raster, cloud, np.zeros_like(cloud) | (np.arange(120)[:, None] == 100) & (np.arange(120) < 5),
                      scene.geometry)
        a = sdaa.augment(scene, SdaaParams(90, 40, 0.9)).ssm
        b = sdaa.augment(scene, SdaaParams(270, 40, 0.9)).ssm
        for mask, offset in ((a, 90), (b, 270)):
            az = math.radians(scene.geometry.azimuth_deg + offset)
            s = 40 * math.sin(math.radians(30))
            ys, xs = np.nonzero(mask)
            assert ys.mean() - 57 == pytest.approx(s * math.cos(az), abs=1)
            assert xs.mean() - 57 == pytest.approx(s * math.sin(az), abs=1)

    def test_provenance_record(self):
        sample = sdaa.augment(square_scene(), SdaaParams(90, 20, 0.9))
        rec = sample.provenance_record()
        assert rec == {"scene_id": "synthetic", "azimuth_offset_deg": 90, "shift_r_px": 20,
                       "gamma": 0.9, "zenith_offset_deg": 0.0}


class TestGrid:
    def test_size_and_values(self):
        grid = sdaa.default_param_grid()
        assert len(grid) == 120
        assert len(set(grid)) == 120
        assert all(0.8 <= p.gamma <= 0.975 for p in grid)
        assert {p.shift_r_px for p in grid} == {20, 40, 60, 80, 100}
        assert {p.azimuth_offset_deg for p in grid} == {90, 180, 270}
        assert all(p.zenith_offset_deg == 0 for p in grid)

    @pytest.mark.parametrize("kwargs", [dict(shift_r_px=-1), dict(gamma=0), dict(gamma=1.2)])
    def test_invalid(self, kwargs):
        base = dict(azimuth_offset_deg=90, shift_r_px=20, gamma=0.9)
        with pytest.raises(ValueError):
            SdaaParams(**{**base, **kwargs})
