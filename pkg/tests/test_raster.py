import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cloudseg import raster as rs
from cloudseg.raster import datasets, io, labels
from cloudseg.sdaa import SolarGeometry


class TestExtractPatches:
    def test_even_split(self):
        assert rs.extract_patches(768, 768, 384) == [(0, 0), (0, 384), (384, 0), (384, 384)]

    def test_sparcs_size(self):
        origins = rs.extract_patches(1000, 1000, 384)
        assert len(origins) == 9
        assert sorted({r for r, _ in origins}) == [0, 384, 616]

    def test_half_overlap_degenerate(self):
        assert rs.extract_patches(384, 384, 384, "half") == [(0, 0)]

    def test_half_overlap_stride(self):
        origins = rs.extract_patches(768, 384, 384, "half")
        assert origins == [(0, 0), (192, 0), (384, 0)]

    def test_too_large(self):
        with pytest.raises(ValueError):
            rs.extract_patches(100, 300, 200)

    @given(st.integers(1, 64), st.integers(0, 200), st.integers(0, 200), st.sampled_from(["none", "half"]))
    def test_bookkeeping_and_coverage(self, ps, dh, dw, mode):
        h, w = ps + dh, ps + dw
        origins = rs.extract_patches(h, w, ps, mode)
        if mode == "none":
            assert len(origins) == math.ceil(h / ps) * math.ceil(w / ps)
        cover = np.zeros((h, w), int)
        for r, c in origins:
            assert 0 <= r <= h - ps and 0 <= c <= w - ps
            cover[r:r + ps, c:c + ps] += 1
        assert cover.min() >= 1


class TestEmptyPatch:
    def test_threshold(self):
        patch = np.ones((20, 20, 4), np.uint16)
        patch.reshape(-1, 4)[:340] = 0  # 85%
        assert rs.is_empty_patch(patch)
        patch = np.ones((20, 20, 4), np.uint16)
        patch.reshape(-1, 4)[:200] = 0
        assert not rs.is_empty_patch(patch)

    def test_single_zero_band_not_empty(self):
        patch = np.full((8, 8, 4), 500, np.uint16)
        patch[..., 2] = 0
        assert rs.empty_fraction(patch) == 0.0
        assert not rs.is_empty_patch(patch)


class TestNormalize:
    def test_values(self):
        out = rs.normalize(np.array([65535, 0, 32768], np.uint16))
        assert out[0] == 1.0 and out[1] == 0.0
        assert out[2] == pytest.approx(0.500007629510948, abs=1e-12)

    def test_round_trip_all_values(self):
        dn = np.arange(65536, dtype=np.uint16)
        norm = rs.normalize(dn)
        assert np.all(np.diff(norm) > 0)
        np.testing.assert_array_equal(rs.denormalize(norm), dn)


class TestResize:
    def test_constant(self):
        out = rs.resize_bilinear(np.full((5, 7, 4), 0.3), 11, 3)
        np.testing.assert_allclose(out, 0.3)

    def test_ramp(self):
        out = rs.resize_bilinear(np.array([[0.0, 1.0], [0.0, 1.0]]), 4, 4)
        np.testing.assert_allclose(out, np.tile([0, 1 / 3, 2 / 3, 1], (4, 1)))

    def test_identity(self):
        x = np.random.default_rng(0).random((6, 6, 2))
        np.testing.assert_array_equal(rs.resize_bilinear(x, 6, 6), x)

    def test_corners_preserved(self):
        x = np.random.default_rng(1).random((9, 5))
        out = rs.resize_bilinear(x, 17, 13)
        for a, b in (((0, 0), (0, 0)), ((0, -1), (0, -1)), ((-1, 0), (-1, 0)), ((-1, -1), (-1, -1))):
            assert out[a] == pytest.approx(x[b])

    def test_matrix_rows_sum_to_one(self):
        for n_in, n_out in ((1, 5), (5, 1), (3, 8), (8, 3)):
            np.testing.assert_allclose(rs.interp_matrix(n_in, n_out).sum(axis=1), 1.0)


class TestStitch:
    def test_constant_patches(self):
        origins = rs.extract_patches(40, 40, 20)
        scene = rs.stitch([np.full((20, 20), 0.7)] * len(origins), origins, 40, 40)
        np.testing.assert_allclose(scene, 0.7)

    def test_overlap_mean(self):
        scene = rs.stitch([np.full((10, 10), 0.2), np.full((10, 10), 0.6)], [(0, 0), (0, 6)], 10, 16)
        np.testing.assert_allclose(scene[:, 6:10], 0.4)
        np.testing.assert_allclose(scene[:, :6], 0.2)
        np.testing.assert_allclose(scene[:, 10:], 0.6)

    def test_missing_patch(self):
        with pytest.raises(ValueError):
            rs.stitch([np.zeros((10, 10))] * 3, [(0, 0), (0, 10), (10, 0)], 20, 20)

    def test_multiclass(self):
        origins = rs.extract_patches(30, 30, 20, "half")
        pm = np.full((20, 20, 3), 1 / 3)
        np.testing.assert_allclose(rs.stitch([pm] * len(origins), origins, 30, 30), 1 / 3)

    @given(st.integers(4, 30), st.integers(0, 40), st.integers(0, 40), st.sampled_from(["none", "half"]),
           st.floats(0, 1))
    def test_round_trip(self, ps, dh, dw, mode, value):
        h, w = ps + dh, ps + dw
        origins = rs.extract_patches(h, w, ps, mode)
        scene = rs.stitch([np.full((ps, ps), value)] * len(origins), origins, h, w)
        assert np.all(scene == value)


class TestThreshold:
    def test_inclusive(self):
        np.testing.assert_array_equal(rs.binarize(np.array([0.49, 0.5, 0.51])), [False, True, True])

    def test_argmax(self):
        out = rs.argmax_mask(np.array([[[0.2, 0.5, 0.3], [0.4, 0.4, 0.2]]]))
        np.testing.assert_array_equal(out[0, 0], [False, True, False])
        np.testing.assert_array_equal(out[0, 1], [True, False, False])


class TestGeometricAugment:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.patch = rng.random((16, 16, 4))
        self.gt = rng.random((16, 16)) > 0.6

    def test_seeded(self):
        a = rs.geometric_augment(self.patch, self.gt, np.random.default_rng(5))
        b = rs.geometric_augment(self.patch, self.gt, np.random.default_rng(5))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_flip_twice(self):
        once = self.patch[:, ::-1]
        np.testing.assert_array_equal(once[:, ::-1], self.patch)

    @pytest.mark.parametrize("seed", range(8))
    def test_area_preserved_without_zoom(self, seed):
        p, g = rs.geometric_augment(self.patch, self.gt, np.random.default_rng(seed), zoom_range=(1.0, 1.0))
        assert g.sum() == self.gt.sum()
        assert g.shape == self.gt.shape and p.shape == self.patch.shape

    @pytest.mark.parametrize("seed", range(8))
    def test_same_transform_for_image_and_gt(self, seed):
        # encode the GT into a band; after augmentation they must still agree
        patch = self.patch.copy()
        patch[..., 0] = self.gt
        p, g = rs.geometric_augment(patch, self.gt, np.random.default_rng(seed), zoom_range=(1.0, 1.0))
        np.testing.assert_array_equal(p[..., 0] > 0.5, g)

    def test_zoom_keeps_gt_binary(self):
        _, g = rs.geometric_augment(self.patch, self.gt, np.random.default_rng(3), zoom_range=(1.2, 1.2))
        assert g.dtype == bool and g.shape == (16, 16)


class TestMergeClasses:
    def test_biome(self):
        codes = np.array([labels.BIOME_THIN_CLOUD, labels.BIOME_SHADOW, labels.BIOME_CLOUD,
                          labels.BIOME_CLEAR, labels.BIOME_FILL])
        gt = rs.merge_classes(codes, "biome-binary-cloud")
        np.testing.assert_array_equal(gt.masks["cloud"], [1, 0, 1, 0, 0])
        np.testing.assert_array_equal(gt.masks["clear"], [0, 1, 0, 1, 0])
        gt = rs.merge_classes(codes, "biome-binary-shadow")
        np.testing.assert_array_equal(gt.masks["shadow"], [0, 1, 0, 0, 0])

    def test_sparcs_three_class(self):
        codes = np.arange(7)
        gt = rs.merge_classes(codes, "sparcs-three-class")
        assert gt.classes == ["cloud", "shadow", "clear"]
        np.testing.assert_array_equal(gt.labels(), [1, 1, 2, 2, 2, 0, 2])

    @pytest.mark.parametrize("scheme", list(rs.MergeScheme))
    def test_partition(self, scheme):
        rng = np.random.default_rng(0)
        if scheme.value.startswith("biome"):
            codes = rng.choice([0, 64, 128, 192, 255], size=(20, 20))
            valid = codes != 0
        else:
            codes = rng.integers(0, 7, size=(20, 20))
            valid = np.ones_like(codes, bool)
        stack = rs.merge_classes(codes, scheme).stack()
        np.testing.assert_array_equal(stack.sum(axis=-1), valid.astype(int))


class TestSynth:
    def test_no_cloud(self):
        s = rs.synth_scene(0, (32, 32), 0.0)
        assert not s.cloud_mask.any() and not s.shadow_mask.any()

    def test_deterministic(self):
        a = rs.synth_scene(11, (48, 48), 0.3, bright_ground=0.1)
        b = rs.synth_scene(11, (48, 48), 0.3, bright_ground=0.1)
        np.testing.assert_array_equal(a.raster, b.raster)
        np.testing.assert_array_equal(a.cloud_mask, b.cloud_mask)
        assert a.geometry == b.geometry

    def test_coverage(self):
        s = rs.synth_scene(4, (512, 512), 0.5)
        assert 0.45 <= s.cloud_mask.mean() <= 0.55
        assert s.raster.dtype == np.uint16

    @given(st.integers(0, 10_000), st.floats(0, 0.8))
    def test_disjoint_masks(self, seed, cover):
        s = rs.synth_scene(seed, (32, 32), cover)
        assert not np.any(s.cloud_mask & s.shadow_mask)

    def test_fill(self):
        s = rs.synth_scene(2, (64, 64), 0.3, fill_fraction=0.3)
        assert rs.empty_fraction(s.raster) == pytest.approx(0.3, abs=0.03)


class TestIO:
    def test_scene_round_trip(self, tmp_path):
        s = rs.synth_scene(3, (32, 40), 0.3, scene_id="abc")
        io.write_scene(tmp_path, s)
        back = io.read_scene(tmp_path / "abc")
        np.testing.assert_array_equal(back.raster, s.raster)
        np.testing.assert_array_equal(back.cloud_mask, s.cloud_mask)
        np.testing.assert_array_equal(back.shadow_mask, s.shadow_mask)
        assert back.geometry.azimuth_deg == s.geometry.azimuth_deg
        assert back.geometry.zenith_deg == pytest.approx(s.geometry.zenith_deg, abs=1e-12)
        assert io.list_scenes(tmp_path) == [tmp_path / "abc"]

    def test_mask_file_values(self, tmp_path):
        io.write_mask(tmp_path / "m.tif", np.array([[True, False]]))
        np.testing.assert_array_equal(io.read_image(tmp_path / "m.tif"), [[255, 0]])

    def test_prob_map(self, tmp_path):
        prob = np.random.default_rng(0).random((5, 7)).astype(np.float32)
        path = io.write_prob_map(tmp_path / "scene", prob, "scene")
        raw = path.read_bytes()
        assert len(raw) == 5 * 7 * 4
        np.testing.assert_array_equal(np.frombuffer(raw, "<f4").reshape(5, 7), prob)
        back, meta = io.read_prob_map(path)
        np.testing.assert_array_equal(back, prob)
        assert meta == {"shape": [5, 7], "dtype": "float32-le", "order": "row-major", "scene_id": "scene"}

    def test_cloud38_layout(self, tmp_path):
        rng = np.random.default_rng(0)
        scene_id = "LC08_L1TP_006248_20160820_20170322_01_T1"
        raster = rng.integers(0, 65535, size=(8, 8, 4)).astype(np.uint16)
        gt = rng.random((8, 8)) > 0.5
        datasets.write_cloud38_patch(tmp_path, "train", datasets.patch_id(1, 0, 0), scene_id, raster, gt)
        assert (tmp_path / "train_red" / f"red_patch_1_1_by_1_{scene_id}.TIF").is_file()
        records = datasets.cloud38_patches(tmp_path)
        assert [(r.patch_id, r.scene_id) for r in records] == [("patch_1_1_by_1", scene_id)]
        back, back_gt = datasets.load_patch(records[0])
        np.testing.assert_array_equal(back, raster)
        np.testing.assert_array_equal(back_gt, gt)

    def test_sparcs(self, tmp_path):
        import tifffile
        from PIL import Image

        cube = np.zeros((10, 6, 6), np.uint16)
        for b in range(10):
            cube[b] = 1000 * (b + 1)
        tifffile.imwrite(tmp_path / "LC80010812013365LGN00_18_data.tif", cube)
        codes = np.tile(np.arange(6, dtype=np.uint8), (6, 1))
        Image.fromarray(codes).save(tmp_path / "LC80010812013365LGN00_18_mask.png")
        assert datasets.sparcs_images(tmp_path) == ["LC80010812013365LGN00_18"]
        raster, gt = datasets.load_sparcs(tmp_path, "LC80010812013365LGN00_18")
        np.testing.assert_array_equal(raster[0, 0], [4000, 3000, 2000, 5000])
        np.testing.assert_array_equal(gt.masks["cloud"][0], [0, 0, 0, 0, 0, 1])
        np.testing.assert_array_equal(gt.masks["shadow"][0], [1, 1, 0, 0, 0, 0])

    def test_missing_dirs(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            datasets.cloud38_patches(tmp_path)
        with pytest.raises(FileNotFoundError):
            io.list_scenes(tmp_path / "nope")
