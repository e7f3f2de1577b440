import numpy as np
import pytest

from stixelforge.core import CameraIntrinsics, Extrinsics, Frame, Point3, PointCloud
from stixelforge.errors import BehindCameraError, DegenerateHullError, InvariantViolation
from stixelforge.geometry import (
    project_point,
    project_points,
    remove_hidden_points,
    transform_to_camera,
)

INTR = CameraIntrinsics(fx=100.0, fy=100.0, cx=320.0, cy=240.0, width=640, height=480)


class TestTransform:
    def test_identity(self):
        pc = PointCloud(np.array([[1.0, 2.0, 3.0], [0.5, -1.0, 4.0]]), Frame.SENSOR)
        out = transform_to_camera(pc, Extrinsics.identity())
        assert np.allclose(out.points, pc.points)
        assert out.frame is Frame.CAMERA

    def test_pure_translation(self):
        ext = Extrinsics(np.eye(3), np.array([0.0, 0.0, 5.0]))
        pc = PointCloud(np.array([[1.0, 2.0, 3.0]]), Frame.SENSOR)
        assert np.allclose(transform_to_camera(pc, ext).points, [[1.0, 2.0, 8.0]])

    def test_rotation_about_z(self):
        rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        pc = PointCloud(np.array([[1.0, 0.0, 0.0]]), Frame.SENSOR)
        out = transform_to_camera(pc, Extrinsics(rot, np.zeros(3)))
        assert np.allclose(out.points, [[0.0, 1.0, 0.0]], atol=1e-15)

    def test_preserves_pairwise_distances(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(40, 3))
        theta = 0.7
        rot = np.array(
            [
                [np.cos(theta), -np.sin(theta), 0.0],
                [np.sin(theta), np.cos(theta), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        ext = Extrinsics(rot, np.array([1.0, -2.0, 0.5]))
        out = transform_to_camera(PointCloud(pts, Frame.SENSOR), ext)
        d_in = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        d_out = np.linalg.norm(out.points[:, None] - out.points[None, :], axis=2)
        assert np.abs(d_in - d_out).max() < 1e-9

    def test_requires_sensor_frame(self):
        pc = PointCloud(np.zeros((1, 3)), Frame.CAMERA)
        with pytest.raises(InvariantViolation):
            transform_to_camera(pc, Extrinsics.identity())


class TestProjection:
    def test_principal_point(self):
        p = project_point(INTR, Point3(0.0, 0.0, 10.0))
        assert (p.u, p.v) == (320.0, 240.0)

    def test_pinhole_substitution(self):
        p = project_point(INTR, Point3(1.0, 0.0, 10.0))
        assert (p.u, p.v) == (330.0, 240.0)

    def test_behind_camera(self):
        with pytest.raises(BehindCameraError):
            project_point(INTR, Point3(0.0, 0.0, -1.0))

    def test_scale_invariance_along_rays(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = rng.normal(size=3)
            p[2] = abs(p[2]) + 0.1
            lam = rng.uniform(0.1, 10.0)
            a = project_point(INTR, p)
            b = project_point(INTR, lam * p)
            assert abs(a.u - b.u) < 1e-9 and abs(a.v - b.v) < 1e-9

    def test_batch_matches_scalar(self):
        pts = np.array([[1.0, 2.0, 5.0], [0.0, 0.0, -2.0], [3.0, -1.0, 8.0]])
        uv, in_front = project_points(INTR, pts)
        assert list(in_front) == [True, False, True]
        one = project_point(INTR, pts[0])
        assert np.allclose(uv[0], [one.u, one.v])
        assert np.isnan(uv[1]).all()


def wall_and_box_cloud():
    """400-point wall grid at z=5 spanning x,y in [-2,2] with a 100-point box
    around z=10 directly behind it (camera frame)."""
    g = np.linspace(-2.0, 2.0, 20)
    wx, wy = np.meshgrid(g, g)
    wall = np.column_stack([wx.ravel(), wy.ravel(), np.full(400, 5.0)])
    b = np.linspace(-0.6, 0.6, 5)
    bx, by, bz = np.meshgrid(b, b, np.linspace(9.5, 10.5, 4))
    box = np.column_stack([bx.ravel(), by.ravel(), bz.ravel()])
    return PointCloud(np.vstack([wall, box]), Frame.CAMERA), 400, 100


class TestHiddenPointRemoval:
    def test_single_point_visible(self):
        pc = PointCloud(np.array([[0.3, -0.2, 4.0]]), Frame.CAMERA)
        assert list(remove_hidden_points(pc, 1.0)) == [0]

    def test_two_points_same_ray_both_returned(self):
        # isolated points carry no surface, so neither occludes the other
        pc = PointCloud(np.array([[0.0, 0.0, 2.0], [0.0, 0.0, 10.0]]), Frame.CAMERA)
        assert list(remove_hidden_points(pc, 1.0)) == [0, 1]

    def test_occluded_box_removed(self):
        pc, n_wall, n_box = wall_and_box_cloud()
        # every box point is hidden: its ray crosses the wall extent at z=5
        for p in pc.points[n_wall:]:
            crossing = p[:2] * 5.0 / p[2]
            assert np.all(np.abs(crossing) <= 2.0)
        visible = remove_hidden_points(pc, 1.0)
        box_visible = int(np.sum(visible >= n_wall))
        assert box_visible <= 0.01 * n_box
        assert int(np.sum(visible < n_wall)) == n_wall  # wall fully visible

    def test_subset_and_idempotent(self):
        pc, _, _ = wall_and_box_cloud()
        visible = remove_hidden_points(pc, 1.0)
        assert np.all(np.diff(visible) > 0)
        assert set(visible).issubset(range(len(pc)))
        again = remove_hidden_points(pc.subset(visible), 1.0)
        assert np.array_equal(again, np.arange(len(visible)))

    def test_degenerate_hull(self):
        # four points coplanar with the origin stay coplanar after flipping
        pts = np.array([[1.0, 0.0, 1.0], [2.0, 0.0, 1.0], [1.0, 0.0, 3.0], [3.0, 0.0, 2.0]])
        with pytest.raises(DegenerateHullError):
            remove_hidden_points(PointCloud(pts, Frame.CAMERA), 1.0)

    def test_gamma_must_be_positive(self):
        pc = PointCloud(np.array([[0.0, 0.0, 2.0]]), Frame.CAMERA)
        with pytest.raises(InvariantViolation):
            remove_hidden_points(pc, 0.0)

    def test_origin_point_rejected(self):
        pc = PointCloud(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]), Frame.CAMERA)
        with pytest.raises(InvariantViolation):
            remove_hidden_points(pc, 1.0)
