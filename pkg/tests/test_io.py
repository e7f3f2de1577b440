import struct

import numpy as np
import pytest

from conftest import make_world, obj, random_aligned_world
from stixelforge import io as stx_io
from stixelforge.core import Frame, GridSpec, HeatmapPair, PointCloud, StixelType
from stixelforge.errors import (
    BadMagicError,
    DimensionMismatchError,
    InvariantViolation,
    MalformedMatrixError,
    MissingKeyError,
    ParseError,
    StixelForgeError,
    TruncatedFileError,
    VersionUnsupportedError,
)

GRID = GridSpec.for_image(64, 80, 8)


class TestVelodyne:
    def test_hand_assembled_quad(self):
        data = struct.pack("<4f", 1.0, 2.0, 3.0, 0.5)
        pc = stx_io.read_kitti_velodyne(data)
        assert len(pc) == 1
        assert np.allclose(pc.points[0], [1.0, 2.0, 3.0])
        assert pc.frame is Frame.SENSOR

    def test_empty_file(self):
        assert len(stx_io.read_kitti_velodyne(b"")) == 0

    def test_truncated(self):
        with pytest.raises(TruncatedFileError):
            stx_io.read_kitti_velodyne(b"\x00" * 17)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(50, 3)).astype(np.float32).astype(np.float64)
        pc = PointCloud(pts, Frame.SENSOR)
        again = stx_io.read_kitti_velodyne(stx_io.write_kitti_velodyne(pc))
        assert np.array_equal(again.points, pc.points)


class TestCalib:
    def synthetic_text(self):
        p2 = [700.0, 0.0, 600.0, 0.0, 0.0, 700.0, 180.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        tr = [0.0, -1.0, 0.0, 0.1, 0.0, 0.0, -1.0, -0.2, 1.0, 0.0, 0.0, 0.3]
        r0 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
        return (
            "P2: " + " ".join(map(str, p2)) + "\n"
            "R0_rect: " + " ".join(map(str, r0)) + "\n"
            "Tr_velo_to_cam: " + " ".join(map(str, tr)) + "\n"
        )

    def test_fields_match_inputs(self):
        calib = stx_io.read_kitti_calib(self.synthetic_text())
        assert calib.intrinsics.fx == 700.0
        assert calib.intrinsics.fy == 700.0
        assert calib.intrinsics.cx == 600.0
        assert calib.intrinsics.cy == 180.0
        assert np.allclose(calib.extrinsics.translation, [0.1, -0.2, 0.3])
        assert np.allclose(
            calib.extrinsics.rotation,
            [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]],
        )

    def test_missing_key(self):
        text = "\n".join(self.synthetic_text().splitlines()[:2])
        with pytest.raises(MissingKeyError):
            stx_io.read_kitti_calib(text)

    def test_malformed_matrix(self):
        text = self.synthetic_text().replace(" 0.3", "")
        with pytest.raises(MalformedMatrixError):
            stx_io.read_kitti_calib(text)

    def test_writer_round_trip(self):
        import stixelforge as sf

        calib = sf.default_calibration()
        text = stx_io.write_kitti_calib(calib)
        again = stx_io.read_kitti_calib(text, image_size=(1920, 1200))
        assert np.allclose(again.extrinsics.rotation, calib.extrinsics.rotation, atol=1e-12)
        assert again.intrinsics == calib.intrinsics

    def test_p2_baseline_folds_into_translation(self):
        text = self.synthetic_text().replace(
            "P2: 700.0 0.0 600.0 0.0",
            "P2: 700.0 0.0 600.0 70.0",
        )
        calib = stx_io.read_kitti_calib(text)
        assert calib.extrinsics.translation[0] == pytest.approx(0.1 + 0.1)


class TestStixelCsv:
    def test_empty_world_header_only(self):
        text = stx_io.write_stixel_csv(make_world([]))
        lines = text.strip().splitlines()
        assert len(lines) == 2
        assert lines[1] == "frame,column,vT,vB,type,distance"

    def test_round_trip_random_worlds(self):
        rng = np.random.default_rng(4)
        grid = GridSpec.for_image(160, 160, 8)
        for _ in range(25):
            world = random_aligned_world(rng, grid)
            again = stx_io.read_stixel_csv(stx_io.write_stixel_csv(world, frame_id="f1"))
            assert again == world

    def test_fractional_rows_and_distance_precision(self):
        world = make_world([obj(1, 10.25, 57.5, StixelType.SWIB_OBJECT, 12.3456789012345)])
        again = stx_io.read_stixel_csv(stx_io.write_stixel_csv(world))
        assert again == world

    def test_ground_type_code(self):
        world = make_world([obj(0, 10, 60, StixelType.GROUND, 4.0)])
        text = stx_io.write_stixel_csv(world)
        assert ",G," in text
        assert stx_io.read_stixel_csv(text) == world

    def test_malformed_type_code(self):
        text = stx_io.write_stixel_csv(make_world([obj(0, 1, 2)]))
        bad = text.replace(",GO,", ",XX,")
        with pytest.raises(ParseError):
            stx_io.read_stixel_csv(bad)

    def test_missing_metadata_line(self):
        with pytest.raises(ParseError):
            stx_io.read_stixel_csv("frame,column,vT,vB,type,distance\n")

    def test_parse_error_carries_line_number(self):
        text = stx_io.write_stixel_csv(make_world([obj(0, 1, 2)]))
        bad = text.replace("0,1.0,2.0", "0,banana,2.0")
        with pytest.raises(ParseError) as err:
            stx_io.read_stixel_csv(bad)
        assert err.value.line == 3


class TestHeatmapBlob:
    def make_pair(self, seed=0):
        rng = np.random.default_rng(seed)
        occ = rng.uniform(size=(GRID.rows, GRID.cols)).astype(np.float32)
        cut = rng.uniform(size=(GRID.rows, GRID.cols)).astype(np.float32)
        return HeatmapPair(occ=occ, cut=cut, grid=GRID)

    def test_round_trip_bit_exact(self):
        hm = self.make_pair()
        blob = stx_io.write_heatmap_blob(hm)
        again = stx_io.read_heatmap_blob(blob)
        assert np.array_equal(again.occ, hm.occ)
        assert np.array_equal(again.cut, hm.cut)
        assert again.grid == hm.grid
        assert stx_io.write_heatmap_blob(again) == blob

    def test_header_layout(self):
        hm = self.make_pair()
        blob = stx_io.write_heatmap_blob(hm)
        magic, version, rows, cols, stride = struct.unpack("<4sIIII", blob[:20])
        assert magic == b"SXHM"
        assert (version, rows, cols, stride) == (1, GRID.rows, GRID.cols, GRID.stride)
        assert len(blob) == 20 + 2 * GRID.rows * GRID.cols * 4

    def test_bad_magic(self):
        blob = bytearray(stx_io.write_heatmap_blob(self.make_pair()))
        blob[:4] = b"NOPE"
        with pytest.raises(BadMagicError):
            stx_io.read_heatmap_blob(bytes(blob))

    def test_unsupported_version(self):
        blob = bytearray(stx_io.write_heatmap_blob(self.make_pair()))
        blob[4:8] = struct.pack("<I", 9)
        with pytest.raises(VersionUnsupportedError):
            stx_io.read_heatmap_blob(bytes(blob))

    def test_truncation(self):
        blob = stx_io.write_heatmap_blob(self.make_pair())
        with pytest.raises(TruncatedFileError):
            stx_io.read_heatmap_blob(blob[:-1])
        with pytest.raises(TruncatedFileError):
            stx_io.read_heatmap_blob(blob[:10])


class TestOverlay:
    def checkerboard(self):
        canvas = np.zeros((80, 64, 3), dtype=np.uint8)
        canvas[::2, ::2] = 200
        return b"P6\n64 80\n255\n" + canvas.tobytes(), canvas

    def test_empty_world_keeps_background(self):
        bg, canvas = self.checkerboard()
        out = stx_io.render_overlay_ppm(make_world([]), (64, 80), bg)
        assert out == bg

    def test_ramp_endpoints(self):
        near = make_world([obj(0, 0, 8, distance=0.0)])
        out = stx_io.render_overlay_ppm(near, (64, 80))
        pixels = np.frombuffer(out.split(b"255\n", 1)[1], dtype=np.uint8).reshape(80, 64, 3)
        assert tuple(pixels[0, 0]) == (255, 0, 0)  # pure red at 0 m
        far = make_world([obj(0, 0, 8, distance=50.0)])
        out = stx_io.render_overlay_ppm(far, (64, 80))
        pixels = np.frombuffer(out.split(b"255\n", 1)[1], dtype=np.uint8).reshape(80, 64, 3)
        assert tuple(pixels[0, 0]) == (0, 255, 0)  # pure green at >= 50 m

    def test_sentinel_distance_gray(self):
        world = make_world([obj(2, 8, 24, distance=None)])
        out = stx_io.render_overlay_ppm(world, (64, 80))
        pixels = np.frombuffer(out.split(b"255\n", 1)[1], dtype=np.uint8).reshape(80, 64, 3)
        assert tuple(pixels[10, 17]) == (128, 128, 128)

    def test_byte_identical_across_runs(self):
        rng = np.random.default_rng(8)
        world = random_aligned_world(rng, GridSpec.for_image(64, 80, 8))
        bg, _ = self.checkerboard()
        assert stx_io.render_overlay_ppm(world, (64, 80), bg) == stx_io.render_overlay_ppm(
            world, (64, 80), bg
        )

    def test_dimension_mismatch(self):
        bg, _ = self.checkerboard()
        with pytest.raises(DimensionMismatchError):
            stx_io.render_overlay_ppm(make_world([]), (32, 80), bg)
        with pytest.raises(DimensionMismatchError):
            stx_io.render_overlay_ppm(make_world([], width=32), (64, 80))


class TestFuzz:
    def test_readers_raise_typed_errors_only(self):
        rng = np.random.default_rng(1234)
        readers = (
            stx_io.read_kitti_velodyne,
            stx_io.read_heatmap_blob,
            lambda b: stx_io.read_kitti_calib(b.decode("latin-1")),
            lambda b: stx_io.read_stixel_csv(b.decode("latin-1")),
        )
        for _ in range(1000):
            n = int(rng.integers(0, 200))
            blob = rng.integers(0, 256, n, dtype=np.uint8).tobytes()
            for reader in readers:
                try:
                    reader(blob)
                except StixelForgeError:
                    pass
