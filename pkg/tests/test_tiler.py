"""Grid enumeration, pixel extraction, geo transforms, and scene I/O."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from tilesearch.tiler import (
    EmptyGridError,
    Scene,
    TileBoundsError,
    TileGrid,
    TileId,
    TilerError,
    enumerate_tiles,
    extract,
    load_scene,
    tile_geo,
    write_geo_sidecar,
    write_raw_scene,
)


def make_scene(w, h, name="s", bands=3, transform=(0, 1, 0, 0, 0, 1)):
    return Scene(name=name, width_px=w, height_px=h, bands=bands, geo_transform=transform)


class TestTileId:
    def test_string_form_round_trips(self):
        tid = TileId(scene="aerial_42", grid_x=3, grid_y=9)
        assert str(tid) == "aerial_42:3:9"
        assert TileId.parse(str(tid)) == tid

    def test_rejects_colon_in_scene(self):
        with pytest.raises(ValueError):
            TileId(scene="a:b", grid_x=0, grid_y=0)

    def test_rejects_negative_grid(self):
        with pytest.raises(ValueError):
            TileId(scene="s", grid_x=-1, grid_y=0)

    def test_parse_rejects_garbage(self):
        for bad in ("s", "s:1", "s:x:y", ""):
            with pytest.raises(ValueError):
                TileId.parse(bad)

    @given(st.integers(0, 10**6), st.integers(0, 10**6))
    def test_parse_inverts_str(self, gx, gy):
        tid = TileId(scene="sc", grid_x=gx, grid_y=gy)
        assert TileId.parse(str(tid)) == tid


class TestEnumerate:
    def test_single_tile_scene(self):
        tiles = enumerate_tiles(make_scene(128, 128))
        assert tiles == [TileId("s", 0, 0)]

    def test_256_square_gives_nine(self):
        tiles = enumerate_tiles(make_scene(256, 256))
        assert len(tiles) == 9
        assert tiles[0] == TileId("s", 0, 0)
        assert tiles[-1] == TileId("s", 2, 2)

    def test_192x128_gives_two(self):
        tiles = enumerate_tiles(make_scene(192, 128))
        assert tiles == [TileId("s", 0, 0), TileId("s", 1, 0)]

    def test_too_small_scene_raises(self):
        with pytest.raises(EmptyGridError):
            enumerate_tiles(make_scene(127, 400))

    def test_row_major_order_and_no_duplicates(self):
        tiles = enumerate_tiles(make_scene(384, 320))
        assert len(tiles) == len(set(tiles))
        ys = [t.grid_y for t in tiles]
        assert ys == sorted(ys)
        for y in set(ys):
            xs = [t.grid_x for t in tiles if t.grid_y == y]
            assert xs == sorted(xs)

    def test_origins_are_stride_multiples(self):
        grid = TileGrid()
        for t in enumerate_tiles(make_scene(512, 512)):
            x0, y0 = grid.origin(t)
            assert x0 % 64 == 0 and y0 % 64 == 0
            assert x0 + 128 <= 512 and y0 + 128 <= 512

    def test_interior_coverage_is_four(self):
        # every pixel >= 64 px from all edges of a 64-multiple scene lies in
        # exactly 4 tiles; the corner pixel lies in exactly 1
        scene = make_scene(320, 320)
        grid = TileGrid()
        cover = np.zeros((320, 320), dtype=np.int32)
        for t in enumerate_tiles(scene):
            x0, y0 = grid.origin(t)
            cover[y0 : y0 + 128, x0 : x0 + 128] += 1
        interior = cover[64:-64, 64:-64]
        assert (interior == 4).all()
        assert cover[0, 0] == 1

    def test_overlap_factor_approaches_four(self):
        # per-axis tile ratio -> 2 and tile-count ratio -> 4 as scenes grow
        side = 64 * 2048
        scene = make_scene(side, side)
        per_axis = (side - 128) // 64 + 1
        non_overlap = side // 128
        assert per_axis / non_overlap == pytest.approx(2.0, abs=0.01)
        assert (per_axis**2) / (non_overlap**2) == pytest.approx(4.0, abs=0.01)

    def test_custom_grid(self):
        grid = TileGrid(tile_size=8, stride=4)
        tiles = enumerate_tiles(make_scene(16, 8), grid)
        assert [(t.grid_x, t.grid_y) for t in tiles] == [(0, 0), (1, 0), (2, 0)]


class TestExtract:
    def test_constant_raster(self):
        raster = np.full((128, 128, 3), 7, dtype=np.uint8)
        out = extract(raster, TileId("s", 0, 0))
        assert out.shape == (128, 128, 3)
        assert (out == 7).all()

    def test_extract_is_a_copy(self):
        raster = np.zeros((128, 128, 3), dtype=np.uint8)
        out = extract(raster, TileId("s", 0, 0))
        out[0, 0, 0] = 9
        assert raster[0, 0, 0] == 0

    def test_offset_arithmetic(self):
        raster = np.zeros((128, 192, 3), dtype=np.uint8)
        raster[0, 64] = 255
        out = extract(raster, TileId("s", 1, 0))
        assert (out[0, 0] == 255).all()
        assert out[0, 1].sum() == 0

    def test_adjacent_tiles_share_overlap_strip(self):
        rng = np.random.default_rng(5)
        raster = rng.integers(0, 256, size=(128, 192, 3), dtype=np.uint8)
        a = extract(raster, TileId("s", 0, 0))
        b = extract(raster, TileId("s", 1, 0))
        assert np.array_equal(a[:, 64:], b[:, :64])

    def test_out_of_range_tile(self):
        raster = np.zeros((128, 128, 3), dtype=np.uint8)
        with pytest.raises(TileBoundsError):
            extract(raster, TileId("s", 1, 0))


class TestTileGeo:
    def test_identity_transform_origin_tile(self):
        scene = make_scene(256, 256)
        assert tile_geo(scene, TileId("s", 0, 0)) == (64, 64)

    def test_identity_transform_offset_tile(self):
        scene = make_scene(256, 256)
        assert tile_geo(scene, TileId("s", 1, 1)) == (128, 128)

    def test_scaling_transform(self):
        scene = make_scene(256, 256, transform=(0, 2, 0, 0, 0, 2))
        assert tile_geo(scene, TileId("s", 0, 0)) == (128, 128)

    def test_full_affine(self):
        scene = make_scene(256, 256, transform=(-100.0, 0.5, 0.0, 40.0, 0.0, -0.5))
        lon, lat = tile_geo(scene, TileId("s", 0, 0))
        assert lon == pytest.approx(-100.0 + 64 * 0.5)
        assert lat == pytest.approx(40.0 - 64 * 0.5)


class TestSceneIO:
    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        pixels = rng.integers(0, 256, size=(128, 192, 3), dtype=np.uint8)
        path = tmp_path / "area.png"
        Image.fromarray(pixels).save(path)
        scene, raster = load_scene(path)
        assert scene.name == "area"
        assert (scene.width_px, scene.height_px, scene.bands) == (192, 128, 3)
        assert scene.bit_depth == 8
        assert np.array_equal(raster, pixels)

    def test_ppm_loads(self, tmp_path):
        pixels = np.arange(128 * 128 * 3, dtype=np.uint32).reshape(128, 128, 3) % 256
        pixels = pixels.astype(np.uint8)
        path = tmp_path / "area.ppm"
        Image.fromarray(pixels).save(path)
        _, raster = load_scene(path)
        assert np.array_equal(raster, pixels)

    def test_raw_16bit_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        pixels = rng.integers(0, 65536, size=(130, 140, 3), dtype=np.uint16)
        path = write_raw_scene(tmp_path / "l8.raw", pixels)
        scene, raster = load_scene(path)
        assert scene.bit_depth == 16
        assert (scene.width_px, scene.height_px) == (140, 130)
        assert np.array_equal(raster, pixels)

    def test_raw_truncation_rejected(self, tmp_path):
        pixels = np.zeros((130, 140, 3), dtype=np.uint16)
        path = write_raw_scene(tmp_path / "l8.raw", pixels)
        path.write_bytes(path.read_bytes()[:-2])
        with pytest.raises(TilerError):
            load_scene(path)

    def test_geo_sidecar(self, tmp_path):
        pixels = np.zeros((128, 128, 3), dtype=np.uint8)
        path = tmp_path / "geo.png"
        Image.fromarray(pixels).save(path)
        write_geo_sidecar(tmp_path / "geo.geo", (-105.0, 1e-4, 0.0, 35.0, 0.0, -1e-4))
        scene, _ = load_scene(path)
        assert scene.geo_transform == (-105.0, 1e-4, 0.0, 35.0, 0.0, -1e-4)

    def test_missing_sidecar_is_identity(self, tmp_path):
        pixels = np.zeros((128, 128, 3), dtype=np.uint8)
        path = tmp_path / "noid.png"
        Image.fromarray(pixels).save(path)
        scene, _ = load_scene(path)
        assert scene.geo_transform == (0, 1, 0, 0, 0, 1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(TilerError):
            load_scene(tmp_path / "absent.png")
