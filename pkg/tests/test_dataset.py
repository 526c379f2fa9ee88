"""Tests for dataset generation, the annotation schema and target encoding."""

import json

import numpy as np
import pytest

from camdist.camera import ImageGeometry, hfov_to_fx, intrinsics_from_hfov
from camdist.dataset import (
    AnnotationRecord,
    DatasetManifest,
    decode_targets,
    encode_targets,
    generate_dataset,
    split_dataset,
)
from camdist.raster import RasterImage, read_image, write_image
from camdist.sampler import SamplerConfig, poi_displacement
from camdist.warp import generate_grid_image

GEOM = ImageGeometry(64, 64)


def make_record(**overrides) -> AnnotationRecord:
    base = dict(
        id="000000", image_path="images/000000.png",
        width_px=1392, height_px=512,
        hfov_deg=90.0, cx=696.0, cy=256.0,
        k1=0.0, k2=0.0, k3=0.0, p1=0.0, p2=0.0,
        focal_scale=1.0, source_image="src.png", seed_index=0,
    )
    base.update(overrides)
    return AnnotationRecord(**base)


@pytest.fixture
def source_dir(tmp_path):
    d = tmp_path / "sources"
    d.mkdir()
    for i in range(3):
        write_image(generate_grid_image(GEOM, 16, 2) if i == 0
                    else RasterImage(np.random.default_rng(i).integers(
                        0, 256, size=(64, 64), dtype=np.uint8)),
                    d / f"src{i}.png")
    return d


class TestTargetEncoding:
    def test_centered_90_degree_camera(self):
        rec = make_record()
        np.testing.assert_allclose(encode_targets(rec),
                                   [0.5, 0.5, 0.5, 0, 0, 0, 0, 0], atol=0)

    def test_decode_inverse_arithmetic(self):
        params = decode_targets([0.5, 0.5, 0.5, 0, 0, 0, 0, 0],
                                ImageGeometry(1392, 512))
        assert params.hfov_deg == 90.0
        assert params.cx == 696.0
        assert params.cy == 256.0

    def test_round_trip_relative_precision(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            rec = make_record(
                hfov_deg=rng.uniform(1, 179), cx=rng.uniform(1, 1391),
                cy=rng.uniform(1, 511),
                k1=rng.normal(), k2=rng.normal(), k3=rng.normal(),
                p1=rng.normal(0, 0.1), p2=rng.normal(0, 0.1))
            decoded = decode_targets(encode_targets(rec), rec.geometry)
            for name in ("hfov_deg", "cx", "cy", "k1", "k2", "k3", "p1", "p2"):
                want = getattr(rec, name)
                got = getattr(decoded, name)
                assert got == pytest.approx(want, rel=1e-12, abs=1e-15)

    def test_first_components_in_unit_interval(self):
        enc = encode_targets(make_record(hfov_deg=150.0, cx=100.0, cy=500.0))
        assert all(0.0 < v < 1.0 for v in enc[:3])

    def test_bad_shape_rejected(self):
        with pytest.raises(ValueError):
            decode_targets([0.5, 0.5], GEOM)


class TestAnnotationSchema:
    def test_json_round_trip(self):
        rec = make_record(k1=0.12, focal_scale=1.05, seed_index=17)
        again = AnnotationRecord.from_json_dict(json.loads(
            json.dumps(rec.to_json_dict())))
        assert again == rec

    def test_parameter_vector_extraction(self):
        rec = make_record(k1=0.1, p2=-0.01)
        params = rec.parameter_vector()
        assert params.k1 == 0.1
        assert params.p2 == -0.01
        assert params.hfov_deg == 90.0


class TestGenerateDataset:
    def test_zero_images_gives_empty_manifest(self, source_dir, tmp_path):
        cfg = SamplerConfig(max_displacement_px=10.0)
        manifest = generate_dataset(source_dir, GEOM, 0, cfg, tmp_path / "out")
        assert manifest.records == []
        reloaded = DatasetManifest.load(tmp_path / "out" / "manifest.json")
        assert reloaded.records == []

    def test_identity_config_reproduces_sources(self, source_dir, tmp_path):
        cfg = SamplerConfig(max_displacement_px=0.0, principal_shift_max_px=0.0)
        manifest = generate_dataset(source_dir, GEOM, 3, cfg, tmp_path / "out")
        assert len(manifest.records) == 3
        for rec in manifest.records:
            out_px = read_image(tmp_path / "out" / rec.image_path).pixels
            src_px = read_image(source_dir / rec.source_image).pixels
            assert np.array_equal(out_px, src_px)
            assert rec.k1 == rec.k2 == rec.k3 == rec.p1 == rec.p2 == 0.0

    def test_round_robin_source_assignment(self, source_dir, tmp_path):
        cfg = SamplerConfig(max_displacement_px=5.0, seed=4)
        manifest = generate_dataset(source_dir, GEOM, 5, cfg, tmp_path / "out")
        assert [r.source_image for r in manifest.records] == [
            "src0.png", "src1.png", "src2.png", "src0.png", "src1.png"]

    def test_records_revalidate_against_forward_model(self, source_dir, tmp_path):
        cfg = SamplerConfig.default_for(GEOM, max_displacement_px=10.0, seed=6)
        manifest = generate_dataset(source_dir, GEOM, 8, cfg, tmp_path / "out")
        for rec in manifest.records:
            fx_final = hfov_to_fx(rec.hfov_deg, rec.width_px)
            base_fx = fx_final / rec.focal_scale
            base = intrinsics_from_hfov(
                np.degrees(2 * np.arctan((rec.width_px / 2) / base_fx)),
                rec.geometry)
            disp = poi_displacement(rec.parameter_vector().coefficients(), base)
            assert disp <= 10.0 + cfg.bisection_tol

    def test_deterministic_across_threads(self, source_dir, tmp_path):
        cfg = SamplerConfig(max_displacement_px=8.0, seed=11)
        m1 = generate_dataset(source_dir, GEOM, 6, cfg, tmp_path / "a", threads=1)
        m2 = generate_dataset(source_dir, GEOM, 6, cfg, tmp_path / "b", threads=3)
        assert m1.records == m2.records
        for rec in m1.records:
            a = (tmp_path / "a" / rec.image_path).read_bytes()
            b = (tmp_path / "b" / rec.image_path).read_bytes()
            assert a == b

    def test_manifest_save_is_byte_stable(self, source_dir, tmp_path):
        cfg = SamplerConfig(max_displacement_px=8.0, seed=2)
        generate_dataset(source_dir, GEOM, 4, cfg, tmp_path / "a")
        generate_dataset(source_dir, GEOM, 4, cfg, tmp_path / "b")
        for name in ("manifest.json", "annotations.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes()

    def test_geometry_mismatch_rejected(self, source_dir, tmp_path):
        cfg = SamplerConfig(max_displacement_px=8.0)
        with pytest.raises(ValueError):
            generate_dataset(source_dir, ImageGeometry(32, 32), 2, cfg, tmp_path / "o")

    def test_empty_source_dir_rejected(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        cfg = SamplerConfig(max_displacement_px=8.0)
        with pytest.raises(ValueError):
            generate_dataset(empty, GEOM, 2, cfg, tmp_path / "o")

    def test_schema_write_read_write_identical(self, source_dir, tmp_path):
        cfg = SamplerConfig(max_displacement_px=8.0, seed=13)
        generate_dataset(source_dir, GEOM, 4, cfg, tmp_path / "a")
        snapshots = {name: (tmp_path / "a" / name).read_bytes()
                     for name in ("manifest.json", "annotations.jsonl")}
        manifest = DatasetManifest.load(tmp_path / "a" / "manifest.json")
        manifest.save(tmp_path / "a" / "manifest.json")
        for name, before in snapshots.items():
            assert (tmp_path / "a" / name).read_bytes() == before

    def test_saving_elsewhere_rewrites_image_paths(self, source_dir, tmp_path):
        cfg = SamplerConfig(max_displacement_px=8.0, seed=13)
        generate_dataset(source_dir, GEOM, 4, cfg, tmp_path / "a")
        manifest = DatasetManifest.load(tmp_path / "a" / "manifest.json")
        manifest.save(tmp_path / "elsewhere" / "manifest.json")
        moved = DatasetManifest.load(tmp_path / "elsewhere" / "manifest.json")
        for rec in moved.records:
            path = tmp_path / "elsewhere" / rec.image_path
            assert path.resolve().exists()


class TestSplitDataset:
    def _manifest(self, n):
        records = [make_record(id=f"{i:06d}", seed_index=i) for i in range(n)]
        return DatasetManifest(geometry=ImageGeometry(1392, 512),
                               sampler_config=SamplerConfig(),
                               sources=["s.png"], records=records)

    def test_sizes_20(self):
        train, val, test = split_dataset(self._manifest(20), seed=0)
        assert (len(train.records), len(val.records), len(test.records)) == (14, 3, 3)

    def test_disjoint_and_exhaustive(self):
        manifest = self._manifest(53)
        train, val, test = split_dataset(manifest, seed=5)
        ids = [r.id for part in (train, val, test) for r in part.records]
        assert sorted(ids) == sorted(r.id for r in manifest.records)
        assert len(set(ids)) == len(ids)

    def test_same_seed_same_split(self):
        a = split_dataset(self._manifest(40), seed=9)
        b = split_dataset(self._manifest(40), seed=9)
        for pa, pb in zip(a, b):
            assert [r.id for r in pa.records] == [r.id for r in pb.records]

    def test_different_seed_different_split(self):
        a = split_dataset(self._manifest(40), seed=1)
        b = split_dataset(self._manifest(40), seed=2)
        assert any([r.id for r in pa.records] != [r.id for r in pb.records]
                   for pa, pb in zip(a, b))

    def test_floor_arithmetic_sizes(self):
        for n in (10, 21, 97, 200):
            train, val, test = split_dataset(self._manifest(n), seed=3)
            assert len(train.records) == int(0.7 * n)
            assert len(val.records) == int(0.15 * n)
            assert len(test.records) == n - int(0.7 * n) - int(0.15 * n)

    def test_empty_manifest_rejected(self):
        with pytest.raises(ValueError):
            split_dataset(self._manifest(0), seed=0)
