import numpy as np
import pytest

import stixelforge as sf
from reference import world_agreement
from stixelforge.agt import (
    AgtConfig,
    classify_cluster,
    extract_stixel,
    generate_stixel_world,
    ground_vanishing_row,
)
from stixelforge.cluster import DbscanConfig
from stixelforge.core import GridSpec, Plane, StixelType
from stixelforge.errors import DegenerateStixelError, GroundNotFoundError, InvariantViolation
from stixelforge.geometry import project_point
from stixelforge.ground import RansacConfig

PLANE = Plane(np.array([0.0, -1.0, 0.0]), 1.8)
CALIB = sf.default_calibration()
GRID = GridSpec.for_image(1920, 1200, 8)


def agt_config(**overrides):
    defaults = dict(
        ransac=RansacConfig(iterations=120, seed=0),
        dbscan=DbscanConfig(eps=0.8, min_pts=3),
        hpr_gamma=1e5,
        stride=8,
    )
    defaults.update(overrides)
    return AgtConfig(**defaults)


class TestClassifyCluster:
    def test_low_cluster_is_ground_object(self):
        pts = np.array([[0.0, 1.75, 10.0], [0.0, 1.0, 10.0]])  # lowest 0.05 above plane
        assert classify_cluster(pts, PLANE, 0.3) is StixelType.GROUND_OBJECT

    def test_elevated_cluster_is_swib(self):
        pts = np.array([[0.0, -0.5, 10.0], [0.0, -0.2, 10.0]])  # >= 2 m above plane
        assert classify_cluster(pts, PLANE, 0.3) is StixelType.SWIB_OBJECT

    def test_empty_cluster_rejected(self):
        with pytest.raises(InvariantViolation):
            classify_cluster(np.zeros((0, 3)), PLANE, 0.3)


class TestExtractStixel:
    def test_box_cluster_projected_rows(self):
        # box face at z=10, heights 0..1.8 above the plane (y in [0, 1.8])
        ys = np.linspace(0.0, 1.8, 30)
        pts = np.column_stack([np.full(30, 0.1), ys, np.full(30, 10.0)])
        intr = CALIB.intrinsics
        st = extract_stixel(pts, 5, StixelType.GROUND_OBJECT, PLANE, intr, GRID)
        top = project_point(intr, pts[0])  # y=0 is the highest point
        assert st.v_top == pytest.approx(round(top.v), abs=1.0)
        foot = project_point(intr, [0.1, 1.8, 10.0])
        assert st.v_bottom == pytest.approx(round(foot.v), abs=1.0)
        assert st.distance == pytest.approx(np.linalg.norm(pts[0]), abs=1e-9)

    def test_swib_bottom_is_preceding_top(self):
        # cluster projecting above row 120 (high overhead structure)
        pts = np.array([[0.0, -17.0, 20.0], [0.0, -16.5, 20.0]])
        st = extract_stixel(
            pts, 2, StixelType.SWIB_OBJECT, PLANE, CALIB.intrinsics, GRID,
            preceding_top_row=120.0,
        )
        assert st.v_bottom == 120.0
        assert st.stixel_type is StixelType.SWIB_OBJECT

    def test_too_short_is_degenerate(self):
        # far cluster hugging the plane: top row and footprint row 2 px apart
        pts = np.array([[0.0, 1.70, 40.0], [0.0, 1.72, 40.0]])
        with pytest.raises(DegenerateStixelError):
            extract_stixel(
                pts, 0, StixelType.GROUND_OBJECT, PLANE, CALIB.intrinsics, GRID,
                min_height=4,
            )

    def test_swib_requires_preceding_row(self):
        pts = np.array([[0.0, -1.0, 20.0]])
        with pytest.raises(InvariantViolation):
            extract_stixel(pts, 0, StixelType.SWIB_OBJECT, PLANE, CALIB.intrinsics, GRID)


class TestVanishingRow:
    def test_level_plane_vanishes_at_principal_row(self):
        intr = CALIB.intrinsics
        assert ground_vanishing_row(PLANE, intr, 100.0) == pytest.approx(intr.cy)

    def test_tilted_plane_moves_horizon(self):
        n = np.array([0.05, -1.0, 0.0])
        plane = Plane(n / np.linalg.norm(n), 1.8 / np.linalg.norm(n))
        intr = CALIB.intrinsics
        left = ground_vanishing_row(plane, intr, 0.0)
        right = ground_vanishing_row(plane, intr, 1919.0)
        assert left != right


class TestGenerateStixelWorld:
    def test_plane_only_scene(self):
        scene = sf.SceneSpec(sensor=sf.SensorRig(azimuth_step_deg=0.2))
        cloud = sf.simulate_lidar(scene)
        world = generate_stixel_world(cloud, CALIB, agt_config())
        assert world.object_stixels() == []
        ground = [s for s in world.stixels if s.stixel_type is StixelType.GROUND]
        assert len(ground) > 100  # drivable area is covered

    def test_single_box_contiguous_run(self):
        scene = sf.SceneSpec(
            boxes=(sf.Box(center=(10.0, 0.0, -0.9), extents=(2.0, 2.0, 1.8)),),
            sensor=sf.SensorRig(azimuth_step_deg=0.1),
        )
        cloud = sf.simulate_lidar(scene)
        world = generate_stixel_world(cloud, CALIB, agt_config())
        cols = sorted({s.column for s in world.object_stixels()})
        assert cols == list(range(cols[0], cols[-1] + 1))
        for s in world.object_stixels():
            assert s.stixel_type is StixelType.GROUND_OBJECT
        oracle = sf.oracle_stixel_world(scene, CALIB, GRID)
        total, ok, misses, spurious = world_agreement(oracle, world, 8)
        assert ok / total >= 0.95
        assert spurious == 0

    def test_occluded_box_produces_no_stixels(self):
        # wall in front, box fully behind it (its rays all cross the wall);
        # the cloud carries the box returns anyway, as a displaced LiDAR would
        rng = np.random.default_rng(0)
        ground = np.column_stack(
            [rng.uniform(2, 30, 3000), rng.uniform(-8, 8, 3000), np.full(3000, -1.8)]
        )
        wy, wz = np.meshgrid(np.linspace(-4, 4, 60), np.linspace(-1.8, 1.2, 30))
        wall = np.column_stack([np.full(wy.size, 8.0), wy.ravel(), wz.ravel()])
        by, bz = np.meshgrid(np.linspace(-1, 1, 15), np.linspace(-1.8, -0.6, 10))
        box = np.column_stack([np.full(by.size, 14.0), by.ravel(), bz.ravel()])
        pts = np.vstack([ground, wall, box])
        cloud = sf.PointCloud(pts, sf.Frame.SENSOR)
        cfg = agt_config(hpr_gamma=1.0, dbscan=DbscanConfig(eps=0.8, min_pts=3))
        world = generate_stixel_world(cloud, CALIB, cfg)
        box_cols = set()
        intr = CALIB.intrinsics
        for p in box:
            cam = CALIB.extrinsics.rotation @ p
            uv = project_point(intr, cam)
            box_cols.add(int(uv.u // 8))
        # every object stixel in the box's columns must belong to the wall
        # (range ~8 m), never to the hidden box (range ~14 m)
        seen_wall = False
        for s in world.object_stixels():
            if s.column in box_cols:
                assert s.distance is not None and s.distance < 12.0
                seen_wall = True
        assert seen_wall

    def test_deterministic(self):
        scene = sf.random_scene(3)
        cloud = sf.simulate_lidar(scene)
        cfg = agt_config()
        w1 = generate_stixel_world(cloud, CALIB, cfg)
        w2 = generate_stixel_world(cloud, CALIB, cfg)
        assert w1 == w2

    def test_halving_stride_never_covers_fewer_columns(self):
        scene = sf.random_scene(1, n_boxes=2)
        cloud = sf.simulate_lidar(scene)
        coarse = generate_stixel_world(cloud, CALIB, agt_config(stride=8))
        fine = generate_stixel_world(cloud, CALIB, agt_config(stride=4))
        assert len({s.column for s in fine.stixels}) >= len({s.column for s in coarse.stixels})

    def test_world_invariants_always_hold(self):
        for seed in (0, 1):
            scene = sf.random_scene(seed)
            cloud = sf.simulate_lidar(scene)
            generate_stixel_world(cloud, CALIB, agt_config())  # constructor validates

    def test_ground_not_found_propagates(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1, 1, (200, 3)) + np.array([10.0, 0.0, 0.0])
        cloud = sf.PointCloud(pts, sf.Frame.SENSOR)
        cfg = agt_config(ransac=RansacConfig(iterations=50, min_inlier_fraction=0.9, seed=0))
        with pytest.raises(GroundNotFoundError):
            generate_stixel_world(cloud, CALIB, cfg)
