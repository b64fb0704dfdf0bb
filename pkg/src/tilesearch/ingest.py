"""End-to-end corpus construction: scenes -> tiles -> codes -> store -> index.

Output row order is canonical (scene order, then row-major tile order) no
matter how many workers featurize tiles, so a given job always produces
byte-identical ``.feat``/``.ids``/``.lsh`` files. Work is checkpointed at
scene granularity: each finished scene leaves an immutable part file, and an
interrupted job resumed from its checkpoint yields files identical to an
uninterrupted run.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .bitvec import FEATURE_BYTES
from .featurizer import FeaturizerSpec, featurize
from .lsh import DEFAULT_BITS_PER_KEY, DEFAULT_TABLES, build_index, make_family
from .store import FeatureStoreBuilder, store_paths
from .tiler import DEFAULT_GRID, Scene, TileGrid, enumerate_tiles, extract, load_scene

CHECKPOINT_NAME = "checkpoint.json"


class IngestError(Exception):
    pass


@dataclass(frozen=True)
class IngestJob:
    """One corpus build. ``seed`` drives both the featurizer and the LSH family."""

    scene_paths: tuple[Path, ...]
    store_prefix: Path
    seed: int = 0
    parallelism: int = 1
    patch_size: int = 16
    grid: TileGrid = DEFAULT_GRID
    lsh_tables: int = DEFAULT_TABLES
    lsh_bits_per_key: int = DEFAULT_BITS_PER_KEY
    thumbnails: bool = True

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not self.scene_paths:
            raise IngestError("job has no scenes")
        object.__setattr__(self, "scene_paths", tuple(Path(p) for p in self.scene_paths))
        object.__setattr__(self, "store_prefix", Path(self.store_prefix))

    @property
    def featurizer_spec(self) -> FeaturizerSpec:
        return FeaturizerSpec(seed=self.seed, patch_size=self.patch_size)

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "scenes": [p.name for p in self.scene_paths],
                "seed": self.seed,
                "patch_size": self.patch_size,
                "grid": [self.grid.tile_size, self.grid.stride],
                "lsh": [self.lsh_tables, self.lsh_bits_per_key],
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class IngestReport:
    tile_count: int
    store_path: Path
    index_path: Path
    elapsed_s: float
    scenes: tuple[str, ...] = field(default=())


def scenes_json_path(prefix) -> Path:
    prefix = Path(prefix)
    return prefix.with_suffix(prefix.suffix + ".scenes.json")


def lsh_index_path(prefix) -> Path:
    prefix = Path(prefix)
    return prefix.with_suffix(prefix.suffix + ".lsh")


def thumbs_dir(prefix) -> Path:
    prefix = Path(prefix)
    return prefix.with_suffix(prefix.suffix + ".thumbs")


def _parts_dir(prefix: Path) -> Path:
    return prefix.with_suffix(prefix.suffix + ".parts")


def run_ingest(job: IngestJob) -> IngestReport:
    """Build the sealed store and its LSH index for every tile of every scene."""
    started = time.perf_counter()
    prefix = job.store_prefix
    paths = store_paths(prefix)
    if paths["feat"].exists():
        raise IngestError(f"store name {prefix} already in use ({paths['feat']} exists)")

    names = [p.stem for p in job.scene_paths]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise IngestError(f"duplicate scene names across inputs: {sorted(dupes)}")

    parts = _parts_dir(prefix)
    parts.mkdir(parents=True, exist_ok=True)
    completed = _load_checkpoint(parts, job)

    scene_metas: dict[str, Scene] = {}
    for path in job.scene_paths:
        scene, raster = load_scene(path)
        scene_metas[scene.name] = scene
        if scene.name in completed:
            continue
        _process_scene(job, parts, scene, raster)
        completed.append(scene.name)
        _save_checkpoint(parts, job, completed)

    builder = FeatureStoreBuilder()
    for name in names:
        ids_blob = (parts / f"{name}.ids").read_text(encoding="utf-8").splitlines()
        feat_blob = (parts / f"{name}.feat").read_bytes()
        if len(feat_blob) != len(ids_blob) * FEATURE_BYTES:
            raise IngestError(f"part file for scene {name!r} is corrupt; delete {parts}")
        for i, tile_id in enumerate(ids_blob):
            builder.put_raw(tile_id, feat_blob[i * FEATURE_BYTES : (i + 1) * FEATURE_BYTES])
    store = builder.seal(prefix)

    _write_scenes_json(prefix, scene_metas, job.grid)

    family = make_family(job.seed, tables=job.lsh_tables, bits_per_key=job.lsh_bits_per_key)
    index = build_index(store, family)
    index_path = index.save(lsh_index_path(prefix))

    shutil.rmtree(parts)
    return IngestReport(
        tile_count=store.n,
        store_path=paths["feat"],
        index_path=index_path,
        elapsed_s=time.perf_counter() - started,
        scenes=tuple(names),
    )


def _process_scene(job: IngestJob, parts: Path, scene: Scene, raster: np.ndarray) -> None:
    tiles = enumerate_tiles(scene, job.grid)
    spec = job.featurizer_spec

    def code_one(tile):
        return featurize(extract(raster, tile, job.grid), spec).to_bytes()

    if job.parallelism > 1:
        with ThreadPoolExecutor(max_workers=job.parallelism) as pool:
            codes = list(pool.map(code_one, tiles))
    else:
        codes = [code_one(t) for t in tiles]

    if job.thumbnails:
        out_dir = thumbs_dir(job.store_prefix) / scene.name
        out_dir.mkdir(parents=True, exist_ok=True)
        for tile in tiles:
            _write_thumbnail(out_dir, extract(raster, tile, job.grid), tile)

    tmp_feat = parts / f"{scene.name}.feat.tmp"
    tmp_ids = parts / f"{scene.name}.ids.tmp"
    tmp_feat.write_bytes(b"".join(codes))
    tmp_ids.write_text("".join(str(t) + "\n" for t in tiles), encoding="utf-8")
    tmp_feat.rename(parts / f"{scene.name}.feat")
    tmp_ids.rename(parts / f"{scene.name}.ids")


def _write_thumbnail(out_dir: Path, pixels: np.ndarray, tile) -> None:
    if pixels.dtype == np.uint16:
        pixels = (pixels >> 8).astype(np.uint8)
    if pixels.shape[2] >= 3:
        img = Image.fromarray(pixels[:, :, :3], mode="RGB")
    else:
        img = Image.fromarray(pixels[:, :, 0], mode="L")
    img.save(out_dir / f"{tile.grid_x}_{tile.grid_y}.png")


def thumbnail_path(prefix, tile) -> Path:
    return thumbs_dir(prefix) / tile.scene / f"{tile.grid_x}_{tile.grid_y}.png"


def _write_scenes_json(prefix: Path, scenes: dict[str, Scene], grid: TileGrid) -> None:
    doc = {
        "grid": {"tile_size": grid.tile_size, "stride": grid.stride},
        "scenes": {
            name: {
                "width_px": s.width_px,
                "height_px": s.height_px,
                "bands": s.bands,
                "bit_depth": s.bit_depth,
                "geo_transform": list(s.geo_transform),
            }
            for name, s in scenes.items()
        },
    }
    scenes_json_path(prefix).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_scenes_json(prefix) -> tuple[dict[str, Scene], TileGrid]:
    doc = json.loads(scenes_json_path(prefix).read_text(encoding="utf-8"))
    grid = TileGrid(**doc["grid"])
    scenes = {
        name: Scene(
            name=name,
            width_px=meta["width_px"],
            height_px=meta["height_px"],
            bands=meta["bands"],
            bit_depth=meta["bit_depth"],
            geo_transform=tuple(meta["geo_transform"]),
        )
        for name, meta in doc["scenes"].items()
    }
    return scenes, grid


def _load_checkpoint(parts: Path, job: IngestJob) -> list[str]:
    path = parts / CHECKPOINT_NAME
    if not path.exists():
        return []
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("fingerprint") != job.fingerprint():
        # different job config; stale parts are useless
        for child in parts.iterdir():
            if child.name != CHECKPOINT_NAME:
                child.unlink()
        path.unlink()
        return []
    completed = [n for n in doc.get("completed", []) if (parts / f"{n}.feat").exists()]
    return completed


def _save_checkpoint(parts: Path, job: IngestJob, completed: list[str]) -> None:
    path = parts / CHECKPOINT_NAME
    tmp = path.with_suffix(".tmp")
    tmp.write_text(
        json.dumps({"fingerprint": job.fingerprint(), "completed": completed}),
        encoding="utf-8",
    )
    tmp.rename(path)


# ---------------------------------------------------------------------------
# job config files
# ---------------------------------------------------------------------------

def load_job_config(path) -> IngestJob:
    """Build an IngestJob from a JSON (or, where available, TOML) file.

    Schema::

        scenes       list of raster paths, or
        scenes_dir   directory scanned for *.png/*.ppm/*.raw (sorted)
        store        output store prefix
        seed         integer (default 0)
        parallelism  integer >= 1 (default 1)
        featurizer   {patch_size}
        grid         {tile_size, stride}
        lsh          {tables, bits_per_key}
        thumbnails   bool (default true)

    Relative paths resolve against the config file's directory.
    """
    path = Path(path)
    if path.suffix.lower() == ".toml":
        doc = _load_toml(path)
    else:
        doc = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent

    if "scenes" in doc:
        scene_paths = [base / p for p in doc["scenes"]]
    elif "scenes_dir" in doc:
        scene_paths = discover_scenes(base / doc["scenes_dir"])
    else:
        raise IngestError(f"{path}: config needs 'scenes' or 'scenes_dir'")

    grid_doc = doc.get("grid", {})
    lsh_doc = doc.get("lsh", {})
    feat_doc = doc.get("featurizer", {})
    return IngestJob(
        scene_paths=tuple(scene_paths),
        store_prefix=base / doc["store"],
        seed=int(doc.get("seed", 0)),
        parallelism=int(doc.get("parallelism", 1)),
        patch_size=int(feat_doc.get("patch_size", 16)),
        grid=TileGrid(
            tile_size=int(grid_doc.get("tile_size", DEFAULT_GRID.tile_size)),
            stride=int(grid_doc.get("stride", DEFAULT_GRID.stride)),
        ),
        lsh_tables=int(lsh_doc.get("tables", DEFAULT_TABLES)),
        lsh_bits_per_key=int(lsh_doc.get("bits_per_key", DEFAULT_BITS_PER_KEY)),
        thumbnails=bool(doc.get("thumbnails", True)),
    )


def _load_toml(path: Path) -> dict:
    try:
        import tomllib  # Python >= 3.11
    except ImportError:
        try:
            import tomli as tomllib  # type: ignore[no-redef]
        except ImportError:
            raise IngestError(
                f"{path}: TOML configs need Python 3.11+ or the tomli package; "
                "use JSON instead"
            ) from None
    return tomllib.loads(path.read_text(encoding="utf-8"))


def discover_scenes(directory) -> list[Path]:
    """Scene rasters under ``directory``, sorted by name for determinism."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"scene directory {directory} does not exist")
    found = [
        p
        for p in sorted(directory.iterdir())
        if p.suffix.lower() in (".png", ".ppm", ".raw")
    ]
    if not found:
        raise IngestError(f"no scene rasters (*.png, *.ppm, *.raw) in {directory}")
    return found
