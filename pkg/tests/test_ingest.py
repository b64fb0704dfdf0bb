"""Corpus construction: canonical ordering, determinism, and resume."""

import hashlib
import json

import numpy as np
import pytest
from PIL import Image

import tilesearch.ingest as ingest_mod
from tilesearch.featurizer import FeaturizerSpec, featurize
from tilesearch.ingest import (
    IngestError,
    IngestJob,
    load_job_config,
    load_scenes_json,
    lsh_index_path,
    run_ingest,
    thumbnail_path,
)
from tilesearch.store import FeatureStore, store_paths
from tilesearch.tiler import TileId, extract, load_scene, write_geo_sidecar


def write_scene_png(path, side=256, seed=0):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(side, side, 3), dtype=np.uint8)
    Image.fromarray(pixels).save(path)
    return pixels


def store_file_hashes(prefix):
    digests = {}
    for key, p in store_paths(prefix).items():
        digests[key] = hashlib.sha256(p.read_bytes()).hexdigest()
    digests["lsh"] = hashlib.sha256(lsh_index_path(prefix).read_bytes()).hexdigest()
    return digests


class TestRunIngest:
    def test_single_tile_scene(self, tmp_path):
        write_scene_png(tmp_path / "tiny.png", side=128, seed=1)
        job = IngestJob(
            scene_paths=(tmp_path / "tiny.png",),
            store_prefix=tmp_path / "out" / "corpus",
            seed=5,
        )
        report = run_ingest(job)
        assert report.tile_count == 1
        store = FeatureStore.open(tmp_path / "out" / "corpus")
        assert store.ids == ["tiny:0:0"]

    def test_nine_tile_scene_row_major(self, tmp_path):
        write_scene_png(tmp_path / "nine.png", side=256, seed=2)
        job = IngestJob(
            scene_paths=(tmp_path / "nine.png",),
            store_prefix=tmp_path / "corpus",
            seed=5,
        )
        report = run_ingest(job)
        assert report.tile_count == 9
        store = FeatureStore.open(tmp_path / "corpus")
        assert store.ids == [f"nine:{x}:{y}" for y in range(3) for x in range(3)]

    def test_store_holds_featurize_of_extract(self, tmp_path):
        write_scene_png(tmp_path / "s.png", side=256, seed=3)
        job = IngestJob(
            scene_paths=(tmp_path / "s.png",), store_prefix=tmp_path / "c", seed=9
        )
        run_ingest(job)
        store = FeatureStore.open(tmp_path / "c")
        scene, raster = load_scene(tmp_path / "s.png")
        spec = FeaturizerSpec(seed=9)
        for tid_str in store.ids:
            tile = TileId.parse(tid_str)
            expected = featurize(extract(raster, tile), spec)
            assert store.get(tid_str) == expected

    def test_parallelism_levels_are_byte_identical(self, tmp_path):
        for name, seed in (("a", 4), ("b", 5)):
            write_scene_png(tmp_path / f"{name}.png", side=256, seed=seed)
        scenes = (tmp_path / "a.png", tmp_path / "b.png")
        r1 = run_ingest(IngestJob(scene_paths=scenes, store_prefix=tmp_path / "p1", seed=7))
        r8 = run_ingest(
            IngestJob(scene_paths=scenes, store_prefix=tmp_path / "p8", seed=7, parallelism=8)
        )
        assert r1.tile_count == r8.tile_count == 18
        assert store_file_hashes(tmp_path / "p1") == store_file_hashes(tmp_path / "p8")

    def test_duplicate_scene_names_rejected(self, tmp_path):
        (tmp_path / "x").mkdir()
        write_scene_png(tmp_path / "same.png", side=128, seed=1)
        write_scene_png(tmp_path / "x" / "same.png", side=128, seed=2)
        job = IngestJob(
            scene_paths=(tmp_path / "same.png", tmp_path / "x" / "same.png"),
            store_prefix=tmp_path / "dup",
        )
        with pytest.raises(IngestError):
            run_ingest(job)

    def test_existing_store_rejected(self, tmp_path):
        write_scene_png(tmp_path / "s.png", side=128)
        job = IngestJob(scene_paths=(tmp_path / "s.png",), store_prefix=tmp_path / "c")
        run_ingest(job)
        with pytest.raises(IngestError):
            run_ingest(
                IngestJob(scene_paths=(tmp_path / "s.png",), store_prefix=tmp_path / "c")
            )

    def test_unreadable_scene_rejected(self, tmp_path):
        job = IngestJob(
            scene_paths=(tmp_path / "ghost.png",), store_prefix=tmp_path / "c"
        )
        with pytest.raises(Exception):
            run_ingest(job)

    def test_scenes_json_written(self, tmp_path):
        write_scene_png(tmp_path / "geo.png", side=256, seed=6)
        write_geo_sidecar(tmp_path / "geo.geo", (-105.0, 0.001, 0.0, 35.0, 0.0, -0.001))
        run_ingest(
            IngestJob(scene_paths=(tmp_path / "geo.png",), store_prefix=tmp_path / "c")
        )
        scenes, grid = load_scenes_json(tmp_path / "c")
        assert scenes["geo"].geo_transform == (-105.0, 0.001, 0.0, 35.0, 0.0, -0.001)
        assert grid.tile_size == 128

    def test_thumbnails_match_extract(self, tmp_path):
        pixels = write_scene_png(tmp_path / "t.png", side=256, seed=8)
        run_ingest(
            IngestJob(scene_paths=(tmp_path / "t.png",), store_prefix=tmp_path / "c")
        )
        tile = TileId("t", 1, 2)
        thumb = thumbnail_path(tmp_path / "c", tile)
        assert thumb.exists()
        with Image.open(thumb) as img:
            assert img.size == (128, 128)
            loaded = np.asarray(img)
        assert np.array_equal(loaded, extract(pixels, tile))

    def test_parts_dir_cleaned_up(self, tmp_path):
        write_scene_png(tmp_path / "s.png", side=128)
        run_ingest(IngestJob(scene_paths=(tmp_path / "s.png",), store_prefix=tmp_path / "c"))
        assert not (tmp_path / "c.parts").exists()


class TestResume:
    def test_interrupted_job_resumes_to_identical_files(self, tmp_path, monkeypatch):
        for name, seed in (("a", 10), ("b", 11), ("c", 12)):
            write_scene_png(tmp_path / f"{name}.png", side=256, seed=seed)
        scenes = tuple(tmp_path / f"{n}.png" for n in ("a", "b", "c"))

        clean = run_ingest(IngestJob(scene_paths=scenes, store_prefix=tmp_path / "clean", seed=3))
        assert clean.tile_count == 27

        # first attempt dies while featurizing scene b
        real_featurize = ingest_mod.featurize
        def exploding(pixels, spec):
            if exploding.armed and exploding.calls >= 9:  # scene a done, b starts
                raise RuntimeError("simulated crash")
            exploding.calls += 1
            return real_featurize(pixels, spec)
        exploding.calls = 0
        exploding.armed = True
        monkeypatch.setattr(ingest_mod, "featurize", exploding)

        job = IngestJob(scene_paths=scenes, store_prefix=tmp_path / "resumed", seed=3)
        with pytest.raises(RuntimeError):
            run_ingest(job)
        assert (tmp_path / "resumed.parts" / "a.feat").exists()
        assert not (tmp_path / "resumed.parts" / "b.feat").exists()

        # second attempt reuses scene a's part and featurizes only b and c
        exploding.armed = False
        exploding.calls = 0
        report = run_ingest(job)
        assert report.tile_count == 27
        assert exploding.calls == 18
        assert store_file_hashes(tmp_path / "resumed") == store_file_hashes(tmp_path / "clean")

    def test_stale_checkpoint_discarded_on_config_change(self, tmp_path, monkeypatch):
        for name, seed in (("a", 13), ("b", 14)):
            write_scene_png(tmp_path / f"{name}.png", side=256, seed=seed)
        scenes = tuple(tmp_path / f"{n}.png" for n in ("a", "b"))

        real_featurize = ingest_mod.featurize
        def dies_on_b(pixels, spec):
            if dies_on_b.calls >= 9:
                raise RuntimeError("boom")
            dies_on_b.calls += 1
            return real_featurize(pixels, spec)
        dies_on_b.calls = 0
        monkeypatch.setattr(ingest_mod, "featurize", dies_on_b)
        with pytest.raises(RuntimeError):
            run_ingest(IngestJob(scene_paths=scenes, store_prefix=tmp_path / "r", seed=1))
        monkeypatch.setattr(ingest_mod, "featurize", real_featurize)

        # different seed invalidates the checkpoint; output must match a
        # clean run of the new config
        run_ingest(IngestJob(scene_paths=scenes, store_prefix=tmp_path / "r", seed=2))
        run_ingest(IngestJob(scene_paths=scenes, store_prefix=tmp_path / "fresh", seed=2))
        assert store_file_hashes(tmp_path / "r") == store_file_hashes(tmp_path / "fresh")


class TestJobConfig:
    def test_json_config(self, tmp_path):
        write_scene_png(tmp_path / "s1.png", side=128, seed=1)
        write_scene_png(tmp_path / "s2.png", side=128, seed=2)
        cfg = {
            "scenes": ["s1.png", "s2.png"],
            "store": "out/corpus",
            "seed": 11,
            "parallelism": 2,
            "featurizer": {"patch_size": 8},
            "grid": {"tile_size": 128, "stride": 64},
            "lsh": {"tables": 16, "bits_per_key": 12},
        }
        cfg_path = tmp_path / "job.json"
        cfg_path.write_text(json.dumps(cfg))
        job = load_job_config(cfg_path)
        assert job.seed == 11
        assert job.parallelism == 2
        assert job.patch_size == 8
        assert job.lsh_tables == 16
        assert job.lsh_bits_per_key == 12
        assert job.store_prefix == tmp_path / "out/corpus"
        report = run_ingest(job)
        assert report.tile_count == 2

    def test_scenes_dir_config(self, tmp_path):
        scene_dir = tmp_path / "scenes"
        scene_dir.mkdir()
        write_scene_png(scene_dir / "b.png", side=128, seed=1)
        write_scene_png(scene_dir / "a.png", side=128, seed=2)
        cfg_path = tmp_path / "job.json"
        cfg_path.write_text(json.dumps({"scenes_dir": "scenes", "store": "c"}))
        job = load_job_config(cfg_path)
        # sorted for determinism
        assert [p.name for p in job.scene_paths] == ["a.png", "b.png"]

    def test_config_without_scenes_rejected(self, tmp_path):
        cfg_path = tmp_path / "job.json"
        cfg_path.write_text(json.dumps({"store": "c"}))
        with pytest.raises(IngestError):
            load_job_config(cfg_path)
