"""Ground-plane estimation: a seeded RANSAC primitive and the two-stage fit
(coarse hypothesis, then a refit on the survivors with a tighter threshold).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Frame, Plane, PointCloud
from .errors import (
    GroundNotFoundError,
    InsufficientPointsError,
    InvariantViolation,
    NoModelFoundError,
)

_DEGENERATE_CROSS = 1e-12


@dataclass(frozen=True)
class RansacConfig:
    """Parameters of the two-stage ground fit.

    height_prior caps the height above the sensor (camera origin) a point may
    have to enter stage 1; the default -0.5 admits only points at least half a
    meter below the sensor. Negative values are expected for roof-mounted rigs.
    """

    iterations: int = 500
    inlier_threshold: float = 0.15
    stage2_threshold: float = 0.08
    height_prior: float = -0.5
    min_inlier_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise InvariantViolation("iterations must be >= 1")
        if not (self.inlier_threshold > 0 and self.stage2_threshold > 0):
            raise InvariantViolation("thresholds must be positive")
        if self.stage2_threshold > self.inlier_threshold:
            raise InvariantViolation("stage2 threshold must not exceed the stage-1 threshold")
        if not 0 < self.min_inlier_fraction <= 1:
            raise InvariantViolation("min inlier fraction must be in (0, 1]")
        if not math.isfinite(self.height_prior):
            raise InvariantViolation("height prior must be finite")


def _oriented(normal: np.ndarray, offset: float) -> Plane:
    # Flip so the origin sits on the positive side; break the through-origin
    # tie by the sign of the first nonzero normal component.
    if offset < 0:
        normal, offset = -normal, -offset
    elif offset == 0:
        for comp in normal:
            if comp != 0:
                if comp < 0:
                    normal = -normal
                break
    return Plane(normal, float(offset))


def _least_squares_plane(points: np.ndarray) -> Plane:
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    normal = vecs[:, 0]
    normal = normal / np.linalg.norm(normal)
    return _oriented(normal, -float(normal @ centroid))


def fit_plane_ransac(
    points, threshold: float, iterations: int, seed: int
) -> tuple[Plane, np.ndarray]:
    """Best-consensus plane over seeded random minimal samples.

    Returns the plane refined by least squares over the winning consensus set,
    together with that set's indices. Deterministic for a fixed seed.
    """
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 3:
        raise InsufficientPointsError(f"plane fit needs >= 3 points, got {n}")
    rng = np.random.default_rng(seed)
    best_count = -1
    best_plane: tuple[np.ndarray, float] | None = None
    scale = max(1.0, float(np.abs(pts).max()))
    for _ in range(iterations):
        tri = pts[rng.choice(n, 3, replace=False)]
        normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        norm = np.linalg.norm(normal)
        if norm <= _DEGENERATE_CROSS * scale * scale:
            continue  # degenerate sample, consumes one iteration of the budget
        normal = normal / norm
        offset = -float(normal @ tri[0])
        count = int(np.count_nonzero(np.abs(pts @ normal + offset) <= threshold))
        if count > best_count:
            best_count = count
            best_plane = (normal, offset)
    if best_plane is None:
        raise NoModelFoundError("all sampled point triples were degenerate")
    normal, offset = best_plane
    inliers = np.flatnonzero(np.abs(pts @ normal + offset) <= threshold)
    refined = _least_squares_plane(pts[inliers])
    return refined, inliers


def two_stage_ground(pc: PointCloud, cfg: RansacConfig) -> tuple[Plane, np.ndarray]:
    """Ground plane and ground-point indices of a camera-frame cloud.

    Stage 1 fits on the height-prior subset with the coarse threshold; stage 2
    refits on the stage-1 inliers with the tighter threshold. Ground points are
    the stage-1 inliers within the stage-2 threshold of the refined plane, so
    they are always a subset of the stage-1 consensus.
    """
    if pc.frame is not Frame.CAMERA:
        raise InvariantViolation("two_stage_ground expects a camera-frame cloud")
    n = len(pc)
    if n == 0:
        raise InvariantViolation("cloud is empty")
    pts = pc.points
    height_above_sensor = -pts[:, 1]
    candidates = np.flatnonzero(height_above_sensor <= cfg.height_prior)
    if candidates.size < 3:
        candidates = np.arange(n, dtype=np.intp)
    try:
        _, stage1_local = fit_plane_ransac(
            pts[candidates], cfg.inlier_threshold, cfg.iterations, cfg.seed
        )
        stage1 = candidates[stage1_local]
        plane, _ = fit_plane_ransac(
            pts[stage1], cfg.stage2_threshold, cfg.iterations, cfg.seed + 1
        )
    except (InsufficientPointsError, NoModelFoundError) as exc:
        raise GroundNotFoundError(f"ground fit failed: {exc}") from exc
    residual = np.abs(plane.height_above(pts[stage1]))
    ground = stage1[residual <= cfg.stage2_threshold]
    if ground.size / n < cfg.min_inlier_fraction:
        raise GroundNotFoundError(
            f"ground support {ground.size}/{n} below the minimum fraction "
            f"{cfg.min_inlier_fraction}"
        )
    return plane, np.sort(ground)
