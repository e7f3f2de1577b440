"""Rigid transforms, pinhole projection, and hidden-point removal.

Hidden-point removal follows the spherical-flipping construction: points are
reflected about a sphere of radius R = gamma * max|p|, and a point is visible
from the origin exactly when its flipped image is a vertex of the convex hull
of the flipped set plus the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .core import CameraIntrinsics, Extrinsics, Frame, Point3, PointCloud
from .errors import BehindCameraError, DegenerateHullError, InvariantViolation

MIN_PROJECTION_DEPTH = 1e-9


@dataclass(frozen=True)
class PixelCoord:
    """Real-valued pixel position, u right and v down."""

    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise InvariantViolation("pixel coordinates must be finite")


def transform_to_camera(pc: PointCloud, ext: Extrinsics) -> PointCloud:
    """Apply the rigid sensor-to-camera transform to every point, in order."""
    if pc.frame is not Frame.SENSOR:
        raise InvariantViolation("transform_to_camera expects a sensor-frame cloud")
    pts = pc.points @ ext.rotation.T + ext.translation
    return PointCloud(pts, Frame.CAMERA)


def project_point(intr: CameraIntrinsics, p) -> PixelCoord:
    """Pinhole projection of one camera-frame point.

    Raises BehindCameraError when the point is not strictly in front of the
    camera (z <= 1e-9).
    """
    if isinstance(p, Point3):
        x, y, z = p.x, p.y, p.z
    else:
        x, y, z = (float(v) for v in np.asarray(p, dtype=np.float64).reshape(3))
    if z <= MIN_PROJECTION_DEPTH:
        raise BehindCameraError(f"point depth {z} is not in front of the camera")
    return PixelCoord(intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy)


def project_points(intr: CameraIntrinsics, points) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection.

    Returns (uv, in_front) where uv is (n, 2) and in_front marks points with
    positive depth; uv rows of behind-camera points are NaN.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    z = pts[:, 2]
    in_front = z > MIN_PROJECTION_DEPTH
    uv = np.full((pts.shape[0], 2), np.nan)
    zf = np.where(in_front, z, 1.0)
    uv[:, 0] = np.where(in_front, intr.fx * pts[:, 0] / zf + intr.cx, np.nan)
    uv[:, 1] = np.where(in_front, intr.fy * pts[:, 1] / zf + intr.cy, np.nan)
    return uv, in_front


def remove_hidden_points(pc: PointCloud, gamma: float = 1.0) -> np.ndarray:
    """Indices of points visible from the camera origin.

    Clouds of up to three points carry no occluding surface and are returned
    whole. Raises DegenerateHullError when the flipped cloud is collinear or
    coplanar with the origin, in which case callers should skip filtering.
    """
    if gamma <= 0:
        raise InvariantViolation("gamma must be positive")
    n = len(pc)
    if n == 0:
        raise InvariantViolation("cannot filter an empty cloud")
    pts = pc.points
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms <= 0):
        raise InvariantViolation("all points must have positive distance to the origin")
    if n <= 3:
        return np.arange(n, dtype=np.intp)
    radius = gamma * norms.max()
    flipped = pts * (2.0 * radius / norms - 1.0)[:, None]
    cloud = np.vstack([flipped, np.zeros(3)])
    try:
        hull = ConvexHull(cloud)
    except QhullError as exc:
        raise DegenerateHullError(f"convex hull is degenerate: {exc}") from exc
    visible = np.array(sorted(v for v in hull.vertices if v != n), dtype=np.intp)
    return visible
