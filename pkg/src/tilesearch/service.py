"""HTTP facade over a loaded corpus: search, tile lookup, thumbnails, health.

The service never re-implements ranking; every response is derived from the
engine modules' outputs. The store and index are shared immutable state, so
requests are isolated and admission control is just a counting semaphore:
when ``max_concurrency`` searches are in flight, new ones get a fast 503.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from .exact import QuerySpec, brute_force_search
from .ingest import load_scenes_json, scenes_json_path, lsh_index_path, thumbs_dir
from .lsh import LshIndex, lsh_search
from .store import FeatureStore
from .tiler import TileId, tile_geo

logger = logging.getLogger("tilesearch.service")


@dataclass(frozen=True)
class ServiceConfig:
    store_prefix: Path
    listen_addr: str = "127.0.0.1"
    port: int = 8768
    max_concurrency: int = 16
    default_k: int = 1000
    cors_origins: tuple[str, ...] = ()
    background_index_load: bool = True

    def __post_init__(self) -> None:
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        object.__setattr__(self, "store_prefix", Path(self.store_prefix))

    @classmethod
    def load(cls, config_path=None, env=None) -> "ServiceConfig":
        """Read a JSON config file, then apply env-var overrides
        (LISTEN_ADDR as host or host:port, STORE_PATH, MAX_CONCURRENCY)."""
        env = os.environ if env is None else env
        doc: dict = {}
        if config_path is not None:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        cfg = cls(
            store_prefix=Path(doc.get("store", doc.get("store_prefix", "corpus"))),
            listen_addr=doc.get("listen_addr", "127.0.0.1"),
            port=int(doc.get("port", 8768)),
            max_concurrency=int(doc.get("max_concurrency", 16)),
            default_k=int(doc.get("default_k", 1000)),
            cors_origins=tuple(doc.get("cors_origins", ())),
        )
        if env.get("STORE_PATH"):
            cfg = replace(cfg, store_prefix=Path(env["STORE_PATH"]))
        if env.get("LISTEN_ADDR"):
            addr = env["LISTEN_ADDR"]
            if ":" in addr:
                host, port = addr.rsplit(":", 1)
                cfg = replace(cfg, listen_addr=host, port=int(port))
            else:
                cfg = replace(cfg, listen_addr=addr)
        if env.get("MAX_CONCURRENCY"):
            cfg = replace(cfg, max_concurrency=int(env["MAX_CONCURRENCY"]))
        return cfg


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


class _Corpus:
    """Everything the endpoints read: store, geo metadata, LSH index."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = FeatureStore.open(config.store_prefix)
        self.scenes = None
        self.grid = None
        self.centers: np.ndarray | None = None
        self.tile_ids: list[str] = []
        if scenes_json_path(config.store_prefix).exists():
            self.scenes, self.grid = load_scenes_json(config.store_prefix)
            self._precompute_centers()
        self.index: LshIndex | None = None
        self.index_error: str | None = None

    def _precompute_centers(self) -> None:
        ids = self.store.ids
        centers = np.empty((len(ids), 2), dtype=np.float64)
        for i, tid in enumerate(ids):
            centers[i] = self.geo_of(tid) or (np.nan, np.nan)
        self.tile_ids = ids
        self.centers = centers

    def geo_of(self, tile_id: str):
        if self.scenes is None:
            return None
        tile = TileId.parse(tile_id)
        scene = self.scenes.get(tile.scene)
        if scene is None:
            return None
        return tile_geo(scene, tile, self.grid)

    def load_index(self) -> None:
        path = lsh_index_path(self.config.store_prefix)
        if not path.exists():
            self.index_error = f"no LSH index at {path}"
            return
        try:
            self.index = LshIndex.load(path)
        except Exception as e:  # surfaced via /v1/health and 503s
            self.index_error = str(e)


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="tilesearch", docs_url=None, redoc_url=None)
    corpus = _Corpus(config)
    app.state.corpus = corpus
    search_slots = threading.Semaphore(config.max_concurrency)
    app.state.search_slots = search_slots

    if config.background_index_load:
        threading.Thread(target=corpus.load_index, daemon=True).start()
    else:
        corpus.load_index()

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["GET"],
            allow_headers=["*"],
        )

    @app.exception_handler(HTTPException)
    async def _on_http_error(request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content={"error": detail})

    @app.middleware("http")
    async def _log_requests(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = (time.perf_counter() - started) * 1e3
        logger.info(
            "%s %s %d %.1fms",
            request.method,
            request.url.path,
            response.status_code,
            elapsed_ms,
        )
        return response

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "corpus_size": corpus.store.n,
            "index_loaded": corpus.index is not None,
        }

    @app.get("/v1/search")
    def search(
        tile: str,
        k: int | None = None,
        method: str = "exact",
        include_self: bool = False,
    ):
        k = config.default_k if k is None else k
        if k < 1:
            raise _error(400, "bad_k", f"k must be >= 1, got {k}")
        if method not in ("exact", "lsh"):
            raise _error(400, "bad_method", f"method must be exact|lsh, got {method!r}")
        if tile not in corpus.store:
            raise _error(404, "unknown_tile", f"tile {tile!r} is not in the corpus")
        if not search_slots.acquire(blocking=False):
            raise _error(503, "overloaded", "concurrent query limit reached; retry")
        try:
            spec = QuerySpec(
                query=corpus.store.get(tile),
                k=k,
                exclude_self=not include_self,
                self_id=tile,
            )
            if method == "exact":
                results = brute_force_search(corpus.store, spec)
            else:
                if corpus.index is None:
                    raise _error(
                        503,
                        "index_unavailable",
                        corpus.index_error or "LSH index still loading; retry",
                    )
                results = lsh_search(corpus.index, corpus.store, spec)
        finally:
            search_slots.release()
        payload = []
        for r in results:
            geo = corpus.geo_of(r.id)
            payload.append(
                {
                    "rank": r.rank,
                    "tile_id": r.id,
                    "distance": r.distance,
                    "lon": None if geo is None else geo[0],
                    "lat": None if geo is None else geo[1],
                }
            )
        return payload

    @app.get("/v1/tiles")
    def tiles(bbox: str):
        parts = bbox.split(",")
        try:
            lon1, lat1, lon2, lat2 = (float(p) for p in parts)
        except ValueError:
            raise _error(400, "bad_bbox", "bbox must be lon1,lat1,lon2,lat2") from None
        if corpus.centers is None:
            raise _error(400, "no_geo", "corpus has no scene geo metadata")
        lon_lo, lon_hi = sorted((lon1, lon2))
        lat_lo, lat_hi = sorted((lat1, lat2))
        lons, lats = corpus.centers[:, 0], corpus.centers[:, 1]
        inside = np.flatnonzero(
            (lons >= lon_lo) & (lons <= lon_hi) & (lats >= lat_lo) & (lats <= lat_hi)
        )
        return [
            {
                "tile_id": corpus.tile_ids[i],
                "lon": float(lons[i]),
                "lat": float(lats[i]),
            }
            for i in inside
        ]

    @app.get("/v1/thumbnail/{name}")
    def thumbnail(name: str):
        if not name.endswith(".png"):
            raise _error(404, "not_found", "thumbnails are served as <tile_id>.png")
        tile_id = name[: -len(".png")]
        if tile_id not in corpus.store:
            raise _error(404, "unknown_tile", f"tile {tile_id!r} is not in the corpus")
        tile = TileId.parse(tile_id)
        path = thumbs_dir(config.store_prefix) / tile.scene / f"{tile.grid_x}_{tile.grid_y}.png"
        if not path.exists():
            raise _error(404, "no_thumbnail", f"no thumbnail rendered for {tile_id!r}")
        return FileResponse(path, media_type="image/png")

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    uvicorn.run(create_app(config), host=config.listen_addr, port=config.port)
