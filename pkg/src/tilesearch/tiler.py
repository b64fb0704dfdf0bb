"""Overlapping tile grid over source rasters and per-tile pixel extraction.

Tiles are 128 px squares whose origins sit at every multiple of the 64 px
stride, so adjacent tiles overlap by half a tile in each direction and any
object gets a chance to be roughly centered in one tile. Tiles that would
overhang the scene edge are dropped, not padded. Both constants are
configurable (``TileGrid``) so small-grid property tests stay cheap.

Geospatial positioning is a planar affine transform per scene:

    lon = c0 + px * c1 + py * c2
    lat = c3 + px * c4 + py * c5

stored as six numbers in a ``<scene>.geo`` sidecar text file (identity when
the sidecar is absent). Scene pixels come from PNG or PPM files (8-bit RGB)
or from a raw format for 16-bit data: a little-endian header of four uint32
(width, height, bands, bit_depth) followed by row-major samples.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

GeoTransform = tuple[float, float, float, float, float, float]

IDENTITY_TRANSFORM: GeoTransform = (0.0, 1.0, 0.0, 0.0, 0.0, 1.0)

_SCENE_NAME_RE = re.compile(r"^[^:\n]+$")


class TilerError(Exception):
    pass


class EmptyGridError(TilerError):
    """The scene is smaller than one tile in some axis."""


class TileBoundsError(TilerError):
    """A tile footprint falls outside the raster."""


@dataclass(frozen=True, order=True)
class TileId:
    """Grid coordinates naming one tile of one scene.

    The string form ``scene:grid_x:grid_y`` is the store key; the tile's
    pixel origin is (stride * grid_x, stride * grid_y).
    """

    scene: str
    grid_x: int
    grid_y: int

    def __post_init__(self) -> None:
        if not _SCENE_NAME_RE.match(self.scene):
            raise ValueError(f"invalid scene name {self.scene!r} (no colons/newlines)")
        if self.grid_x < 0 or self.grid_y < 0:
            raise ValueError("grid coordinates must be >= 0")

    def __str__(self) -> str:
        return f"{self.scene}:{self.grid_x}:{self.grid_y}"

    @classmethod
    def parse(cls, text: str) -> "TileId":
        parts = text.rsplit(":", 2)
        if len(parts) != 3:
            raise ValueError(f"malformed tile id {text!r}")
        scene, gx, gy = parts
        try:
            return cls(scene=scene, grid_x=int(gx), grid_y=int(gy))
        except ValueError as e:
            raise ValueError(f"malformed tile id {text!r}: {e}") from None


@dataclass(frozen=True)
class Scene:
    """Dimensions, sample format, and geo placement of one source raster."""

    name: str
    width_px: int
    height_px: int
    bands: int = 3
    bit_depth: int = 8
    geo_transform: GeoTransform = IDENTITY_TRANSFORM

    def __post_init__(self) -> None:
        if not _SCENE_NAME_RE.match(self.name):
            raise ValueError(f"invalid scene name {self.name!r}")
        if self.bit_depth not in (8, 16):
            raise ValueError(f"bit depth must be 8 or 16, got {self.bit_depth}")
        if self.bands < 1:
            raise ValueError("bands must be >= 1")
        if len(self.geo_transform) != 6:
            raise ValueError("geo_transform needs 6 coefficients")


@dataclass(frozen=True)
class TileGrid:
    """Tile size and stride; defaults are the production constants."""

    tile_size: int = 128
    stride: int = 64

    def __post_init__(self) -> None:
        if self.tile_size < 1 or self.stride < 1:
            raise ValueError("tile_size and stride must be >= 1")

    def origin(self, tile: TileId) -> tuple[int, int]:
        return self.stride * tile.grid_x, self.stride * tile.grid_y


DEFAULT_GRID = TileGrid()


def enumerate_tiles(scene: Scene, grid: TileGrid = DEFAULT_GRID) -> list[TileId]:
    """All tiles whose footprint lies fully inside the scene, row-major.

    Ordered by grid_y then grid_x; deterministic and duplicate-free.
    Raises EmptyGridError if the scene cannot hold even one tile.
    """
    nx = _tiles_along(scene.width_px, grid)
    ny = _tiles_along(scene.height_px, grid)
    if nx == 0 or ny == 0:
        raise EmptyGridError(
            f"scene {scene.name!r} is {scene.width_px}x{scene.height_px} px, "
            f"smaller than one {grid.tile_size} px tile"
        )
    return [
        TileId(scene=scene.name, grid_x=gx, grid_y=gy)
        for gy in range(ny)
        for gx in range(nx)
    ]


def _tiles_along(extent_px: int, grid: TileGrid) -> int:
    if extent_px < grid.tile_size:
        return 0
    return (extent_px - grid.tile_size) // grid.stride + 1


def extract(raster: np.ndarray, tile: TileId, grid: TileGrid = DEFAULT_GRID) -> np.ndarray:
    """Copy the tile's pixel block out of a (H, W, bands) raster."""
    if raster.ndim == 2:
        raster = raster[:, :, np.newaxis]
    if raster.ndim != 3:
        raise ValueError(f"raster must be (H, W, bands), got shape {raster.shape}")
    x0, y0 = grid.origin(tile)
    size = grid.tile_size
    if y0 + size > raster.shape[0] or x0 + size > raster.shape[1]:
        raise TileBoundsError(
            f"tile {tile} footprint exceeds raster of shape {raster.shape[:2]}"
        )
    return np.array(raster[y0 : y0 + size, x0 : x0 + size, :], copy=True)


def apply_geo(transform: GeoTransform, px: float, py: float) -> tuple[float, float]:
    c0, c1, c2, c3, c4, c5 = transform
    return c0 + px * c1 + py * c2, c3 + px * c4 + py * c5


def tile_geo(scene: Scene, tile: TileId, grid: TileGrid = DEFAULT_GRID) -> tuple[float, float]:
    """(lon, lat) of the tile center: geo transform applied to origin + half size."""
    x0, y0 = grid.origin(tile)
    half = grid.tile_size / 2
    return apply_geo(scene.geo_transform, x0 + half, y0 + half)


# ---------------------------------------------------------------------------
# scene I/O
# ---------------------------------------------------------------------------

RAW_HEADER_DTYPE = np.dtype("<u4")
RAW_SUFFIX = ".raw"


def load_scene(path, name: str | None = None) -> tuple[Scene, np.ndarray]:
    """Load a scene raster plus its geo sidecar.

    PNG/PPM load as 8-bit; ``.raw`` files use the documented 16-byte header.
    The scene name defaults to the file stem. The sidecar is ``<stem>.geo``
    next to the raster; identity transform when absent.
    """
    path = Path(path)
    if not path.exists():
        raise TilerError(f"scene file {path} does not exist")
    name = name or path.stem
    if path.suffix.lower() == RAW_SUFFIX:
        raster, bit_depth = _read_raw(path)
    else:
        with Image.open(path) as img:
            raster = np.asarray(img.convert("RGB") if img.mode not in ("RGB", "L") else img)
        if raster.ndim == 2:
            raster = raster[:, :, np.newaxis]
        bit_depth = 8
    geo = load_geo_sidecar(path.with_suffix(".geo"))
    scene = Scene(
        name=name,
        width_px=raster.shape[1],
        height_px=raster.shape[0],
        bands=raster.shape[2],
        bit_depth=bit_depth,
        geo_transform=geo,
    )
    return scene, raster


def load_geo_sidecar(path) -> GeoTransform:
    path = Path(path)
    if not path.exists():
        return IDENTITY_TRANSFORM
    values = [float(v) for v in path.read_text(encoding="utf-8").split()]
    if len(values) != 6:
        raise TilerError(f"{path} must hold exactly 6 coefficients, got {len(values)}")
    return tuple(values)  # type: ignore[return-value]


def _read_raw(path: Path) -> tuple[np.ndarray, int]:
    blob = path.read_bytes()
    if len(blob) < 16:
        raise TilerError(f"{path}: raw header truncated")
    width, height, bands, bit_depth = np.frombuffer(blob[:16], dtype=RAW_HEADER_DTYPE)
    if bit_depth not in (8, 16):
        raise TilerError(f"{path}: bit depth must be 8 or 16, got {bit_depth}")
    dtype = np.dtype("<u2") if bit_depth == 16 else np.uint8
    expected = int(width) * int(height) * int(bands) * dtype.itemsize
    body = blob[16:]
    if len(body) != expected:
        raise TilerError(
            f"{path}: payload is {len(body)} bytes, header implies {expected}"
        )
    raster = np.frombuffer(body, dtype=dtype).reshape(int(height), int(width), int(bands))
    return raster, int(bit_depth)


def write_raw_scene(path, raster: np.ndarray, bit_depth: int | None = None) -> Path:
    """Write a raster in the raw scene format (mainly for 16-bit sources)."""
    path = Path(path)
    if raster.ndim == 2:
        raster = raster[:, :, np.newaxis]
    if bit_depth is None:
        bit_depth = 16 if raster.dtype.itemsize == 2 else 8
    dtype = np.dtype("<u2") if bit_depth == 16 else np.uint8
    header = np.array(
        [raster.shape[1], raster.shape[0], raster.shape[2], bit_depth],
        dtype=RAW_HEADER_DTYPE,
    )
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(raster, dtype=dtype).tobytes())
    return path


def write_geo_sidecar(path, transform: GeoTransform) -> Path:
    path = Path(path)
    path.write_text(" ".join(repr(float(c)) for c in transform) + "\n", encoding="utf-8")
    return path
