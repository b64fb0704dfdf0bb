"""HTTP API contract: search, tiles, thumbnails, health, errors, concurrency."""

import io
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from tilesearch.exact import QuerySpec, brute_force_search
from tilesearch.ingest import IngestJob, run_ingest
from tilesearch.service import ServiceConfig, create_app
from tilesearch.store import FeatureStore
from tilesearch.tiler import write_geo_sidecar


@pytest.fixture(scope="module")
def corpus_prefix(tmp_path_factory):
    """A 9-tile corpus with geo metadata, ingested once per module."""
    root = tmp_path_factory.mktemp("svc")
    rng = np.random.default_rng(77)
    pixels = rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
    Image.fromarray(pixels).save(root / "area.png")
    write_geo_sidecar(root / "area.geo", (-100.0, 0.01, 0.0, 40.0, 0.0, -0.01))
    prefix = root / "corpus"
    run_ingest(IngestJob(scene_paths=(root / "area.png",), store_prefix=prefix, seed=1))
    return prefix


@pytest.fixture(scope="module")
def client(corpus_prefix):
    cfg = ServiceConfig(store_prefix=corpus_prefix, background_index_load=False)
    app = create_app(cfg)
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def flat_prefix(tmp_path_factory):
    """All-constant scene: every tile shares one code, so LSH candidate sets
    cover any exact top-k."""
    root = tmp_path_factory.mktemp("flat")
    pixels = np.full((256, 256, 3), 33, dtype=np.uint8)
    Image.fromarray(pixels).save(root / "flat.png")
    prefix = root / "corpus"
    run_ingest(IngestJob(scene_paths=(root / "flat.png",), store_prefix=prefix, seed=1))
    return prefix


class TestHealth:
    def test_health_reports_corpus_size(self, client):
        body = client.get("/v1/health").json()
        assert body == {"status": "ok", "corpus_size": 9, "index_loaded": True}

    def test_index_not_loaded_when_file_missing(self, corpus_prefix, tmp_path):
        import shutil

        clone = tmp_path / "noindex"
        for suffix in (".feat", ".ids", ".meta", ".scenes.json"):
            shutil.copy(
                corpus_prefix.parent / (corpus_prefix.name + suffix),
                tmp_path / ("noindex" + suffix),
            )
        cfg = ServiceConfig(store_prefix=clone, background_index_load=False)
        with TestClient(create_app(cfg)) as c:
            body = c.get("/v1/health").json()
            assert body["index_loaded"] is False
            r = c.get("/v1/search", params={"tile": "area:0:0", "method": "lsh"})
            assert r.status_code == 503


class TestSearch:
    def test_self_match_with_include_self(self, client):
        r = client.get(
            "/v1/search",
            params={"tile": "area:0:0", "k": 1, "method": "exact", "include_self": "true"},
        )
        assert r.status_code == 200
        (hit,) = r.json()
        assert hit["tile_id"] == "area:0:0"
        assert hit["distance"] == 0
        assert hit["rank"] == 1
        assert hit["lon"] == pytest.approx(-100.0 + 64 * 0.01)
        assert hit["lat"] == pytest.approx(40.0 - 64 * 0.01)

    def test_self_excluded_by_default(self, client):
        r = client.get("/v1/search", params={"tile": "area:0:0", "k": 8, "method": "exact"})
        ids = [h["tile_id"] for h in r.json()]
        assert "area:0:0" not in ids
        assert len(ids) == 8

    def test_unknown_tile_404_with_error_body(self, client):
        r = client.get("/v1/search", params={"tile": "area:9:9", "k": 1})
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "unknown_tile"

    def test_bad_k_and_method_rejected(self, client):
        assert client.get("/v1/search", params={"tile": "area:0:0", "k": 0}).status_code == 400
        r = client.get("/v1/search", params={"tile": "area:0:0", "method": "psychic"})
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "bad_method"

    def test_lsh_and_exact_agree_when_candidates_cover(self, flat_prefix):
        cfg = ServiceConfig(store_prefix=flat_prefix, background_index_load=False)
        with TestClient(create_app(cfg)) as c:
            exact = c.get(
                "/v1/search", params={"tile": "flat:1:1", "k": 9, "method": "exact"}
            )
            lsh = c.get("/v1/search", params={"tile": "flat:1:1", "k": 9, "method": "lsh"})
            assert exact.json() == lsh.json()

    def test_service_output_matches_engine(self, client, corpus_prefix):
        store = FeatureStore.open(corpus_prefix)
        spec = QuerySpec(
            query=store.get("area:1:1"), k=5, exclude_self=True, self_id="area:1:1"
        )
        engine = brute_force_search(store, spec)
        body = client.get(
            "/v1/search", params={"tile": "area:1:1", "k": 5, "method": "exact"}
        ).json()
        assert [(h["rank"], h["tile_id"], h["distance"]) for h in body] == [
            (r.rank, r.id, r.distance) for r in engine
        ]

    def test_default_k_comes_from_config(self, corpus_prefix):
        cfg = ServiceConfig(
            store_prefix=corpus_prefix, default_k=3, background_index_load=False
        )
        with TestClient(create_app(cfg)) as c:
            body = c.get("/v1/search", params={"tile": "area:0:0"}).json()
            assert len(body) == 3

    def test_concurrent_identical_queries_get_identical_bodies(self, client):
        reference = client.get(
            "/v1/search", params={"tile": "area:2:2", "k": 9, "method": "exact"}
        ).json()
        bodies = [None] * 16
        def hammer(slot):
            r = client.get("/v1/search", params={"tile": "area:2:2", "k": 9, "method": "exact"})
            bodies[slot] = (r.status_code, r.json())
        threads = [threading.Thread(target=hammer, args=(i,)) for i in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for status, body in bodies:
            assert status == 200
            assert body == reference

    def test_admission_control_rejects_over_limit(self, corpus_prefix):
        cfg = ServiceConfig(
            store_prefix=corpus_prefix, max_concurrency=1, background_index_load=False
        )
        app = create_app(cfg)
        with TestClient(app) as c:
            # hold the only slot: the next query must fast-fail with 503
            assert app.state.search_slots.acquire(blocking=False)
            try:
                r = c.get("/v1/search", params={"tile": "area:0:0", "k": 1})
                assert r.status_code == 503
                assert r.json()["error"]["code"] == "overloaded"
            finally:
                app.state.search_slots.release()
            assert c.get("/v1/search", params={"tile": "area:0:0", "k": 1}).status_code == 200


class TestTiles:
    def test_empty_bbox(self, client):
        r = client.get("/v1/tiles", params={"bbox": "0,0,1,1"})
        assert r.status_code == 200
        assert r.json() == []

    def test_whole_extent_returns_all(self, client):
        r = client.get("/v1/tiles", params={"bbox": "-101,38,-97,41"})
        assert len(r.json()) == 9

    def test_single_center(self, client):
        lon = -100.0 + 64 * 0.01
        lat = 40.0 - 64 * 0.01
        r = client.get(
            "/v1/tiles",
            params={"bbox": f"{lon - 1e-6},{lat - 1e-6},{lon + 1e-6},{lat + 1e-6}"},
        )
        body = r.json()
        assert len(body) == 1
        assert body[0]["tile_id"] == "area:0:0"

    def test_malformed_bbox(self, client):
        r = client.get("/v1/tiles", params={"bbox": "1,2,3"})
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "bad_bbox"


class TestThumbnail:
    def test_known_tile_png(self, client):
        r = client.get("/v1/thumbnail/area:1:2.png")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        with Image.open(io.BytesIO(r.content)) as img:
            assert img.size == (128, 128)

    def test_unknown_tile_404(self, client):
        assert client.get("/v1/thumbnail/area:9:9.png").status_code == 404

    def test_request_log_line_per_request(self, client, caplog):
        import logging

        with caplog.at_level(logging.INFO, logger="tilesearch.service"):
            client.get("/v1/health")
        lines = [r.getMessage() for r in caplog.records if r.name == "tilesearch.service"]
        assert len(lines) == 1
        assert "GET" in lines[0] and "/v1/health" in lines[0] and "200" in lines[0]
        assert "ms" in lines[0]

    def test_env_overrides(self, corpus_prefix):
        cfg = ServiceConfig.load(
            None,
            env={
                "STORE_PATH": str(corpus_prefix),
                "LISTEN_ADDR": "0.0.0.0:9999",
                "MAX_CONCURRENCY": "4",
            },
        )
        assert cfg.store_prefix == corpus_prefix
        assert cfg.listen_addr == "0.0.0.0"
        assert cfg.port == 9999
        assert cfg.max_concurrency == 4
