"""End-to-end ground-truth generation: point cloud + calibration in, a
multi-layer StixelWorld out.

Pipeline: transform to the camera frame, fit the ground plane (two-stage
RANSAC), filter camera-invisible points off the non-ground set, bin the
survivors into grid columns, cluster each column by (range, height), then walk
each column's clusters near to far emitting ground-object and swib stixels.
A per-column ground stixel spans from the first object's contact row (or the
plane's vanishing row when the column is object-free) down to the lowest
ground return.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .cluster import ColumnBin, DbscanConfig, bin_by_column, cluster_column_objects
from .core import (
    Calibration,
    CameraIntrinsics,
    Frame,
    GridSpec,
    Plane,
    PointCloud,
    Stixel,
    StixelType,
    StixelWorld,
)
from .errors import DegenerateHullError, DegenerateStixelError, InvariantViolation
from .geometry import project_points, remove_hidden_points, transform_to_camera
from .ground import RansacConfig, two_stage_ground

log = logging.getLogger(__name__)

# Height ties within this tolerance count as "the highest point" of a cluster.
_HEIGHT_TIE = 1e-9


@dataclass(frozen=True)
class AgtConfig:
    """Knobs of the ground-truth generator."""

    ransac: RansacConfig = field(default_factory=RansacConfig)
    dbscan: DbscanConfig = field(default_factory=DbscanConfig)
    hpr_gamma: float = 1.0
    ground_attach_delta: float = 0.3
    min_stixel_height: int = 4
    stride: int = 8

    def __post_init__(self):
        if not self.hpr_gamma > 0:
            raise InvariantViolation("hpr_gamma must be positive")
        if not self.ground_attach_delta > 0:
            raise InvariantViolation("ground_attach_delta must be positive")
        if self.min_stixel_height < 1:
            raise InvariantViolation("min_stixel_height must be >= 1 px")
        if self.stride < 1:
            raise InvariantViolation("stride must be >= 1 px")


def classify_cluster(points, plane: Plane, delta: float) -> StixelType:
    """Ground object when the cluster's lowest point sits within delta of the
    plane, swib object otherwise."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] == 0:
        raise InvariantViolation("cluster is empty")
    if plane.height_above(pts).min() <= delta:
        return StixelType.GROUND_OBJECT
    return StixelType.SWIB_OBJECT


def ground_vanishing_row(plane: Plane, intr: CameraIntrinsics, u: float) -> float:
    """Image row where the ground plane vanishes at pixel column u.

    This is the row of the ray through (u, v) that is parallel to the plane;
    ground farther and farther away approaches it from below. Falls back to the
    principal row when the plane is (numerically) parallel to the optical axis
    in v, which cannot happen for a drivable ground surface.
    """
    nx, ny, nz = plane.normal
    if abs(ny) < 1e-12:
        return float(intr.cy)
    return float(intr.cy - intr.fy * (nz + nx * (u - intr.cx) / intr.fx) / ny)


def _clamp_row(v: float, height: int) -> float:
    return float(min(max(round(v), 0), height))


def extract_stixel(
    points,
    column: int,
    stixel_type: StixelType,
    plane: Plane,
    intr: CameraIntrinsics,
    grid: GridSpec,
    preceding_top_row: float | None = None,
    min_height: int = 1,
) -> Stixel:
    """Build one stixel from a cluster's camera-frame points.

    The top row comes from the cluster's maximum-height point (ties resolved
    to the highest image row). A ground object's bottom row is the plane
    footprint beneath the cluster's nearest point; a swib object's bottom row
    is the line of sight over the preceding object, i.e. preceding_top_row.
    Rows are rounded to whole pixels but not grid-quantized. Raises
    DegenerateStixelError when the result is shorter than min_height.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] == 0:
        raise InvariantViolation("cluster is empty")
    heights = plane.height_above(pts)
    uv, in_front = project_points(intr, pts)
    if not in_front.all():
        raise DegenerateStixelError("cluster contains points behind the camera")
    top_mask = heights >= heights.max() - _HEIGHT_TIE
    top_rows = uv[top_mask, 1]
    top_pick = int(np.argmin(top_rows))
    v_top = _clamp_row(float(top_rows[top_pick]), intr.height)
    top_point = pts[np.flatnonzero(top_mask)[top_pick]]

    if stixel_type is StixelType.GROUND_OBJECT:
        nearest = pts[int(np.argmin(np.linalg.norm(pts, axis=1)))]
        foot = nearest - plane.height_above(nearest)[0] * plane.normal
        if foot[2] <= 1e-9:
            raise DegenerateStixelError("footprint falls behind the camera")
        v_bottom = _clamp_row(intr.fy * foot[1] / foot[2] + intr.cy, intr.height)
    elif stixel_type is StixelType.SWIB_OBJECT:
        if preceding_top_row is None:
            raise InvariantViolation("swib extraction requires a preceding top row")
        v_bottom = _clamp_row(preceding_top_row, intr.height)
    else:
        raise InvariantViolation(f"extract_stixel handles object types only, got {stixel_type}")

    if v_bottom - v_top < min_height:
        raise DegenerateStixelError(
            f"stixel height {v_bottom - v_top} px below the minimum {min_height} px"
        )
    return Stixel(
        column=column,
        v_top=v_top,
        v_bottom=v_bottom,
        stixel_type=stixel_type,
        distance=float(np.linalg.norm(top_point)),
    )


def _column_objects(
    col: int,
    clusters: list[np.ndarray],
    cam: PointCloud,
    uv: np.ndarray,
    plane: Plane,
    intr: CameraIntrinsics,
    grid: GridSpec,
    cfg: AgtConfig,
    horizon: float,
) -> list[Stixel]:
    emitted: list[Stixel] = []
    last_top: float | None = None
    for indices in clusters:
        pts = cam.points[indices]
        rows = uv[indices, 1]
        cluster_bottom = float(rows.max())
        cluster_top = float(rows.min())
        if last_top is None:
            stype = classify_cluster(pts, plane, cfg.ground_attach_delta)
            preceding = horizon if stype is StixelType.SWIB_OBJECT else None
        else:
            if cluster_top >= last_top:
                continue  # no visible extent above the nearer stixel
            if cluster_bottom <= last_top + cfg.stride:
                stype = StixelType.SWIB_OBJECT
                preceding = last_top
            else:
                stype = classify_cluster(pts, plane, cfg.ground_attach_delta)
                preceding = last_top if stype is StixelType.SWIB_OBJECT else None
        try:
            st = extract_stixel(
                pts, col, stype, plane, intr, grid,
                preceding_top_row=preceding, min_height=cfg.min_stixel_height,
            )
        except DegenerateStixelError:
            continue
        if last_top is not None and st.v_bottom > last_top:
            # A farther stixel may only occupy rows above the nearer one.
            if last_top - st.v_top < cfg.min_stixel_height:
                continue
            st = dataclasses.replace(st, v_bottom=last_top)
        emitted.append(st)
        last_top = st.v_top
    return emitted


def _column_ground(
    col: int,
    ground_bin: ColumnBin,
    cam: PointCloud,
    uv: np.ndarray,
    objects: list[Stixel],
    horizon: float,
    intr: CameraIntrinsics,
    min_height: int,
) -> Stixel | None:
    if len(ground_bin) == 0:
        return None
    rows = uv[ground_bin.point_indices, 1]
    v_bottom = _clamp_row(float(rows.max()), intr.height)
    if objects:
        v_top = objects[0].v_bottom
    else:
        v_top = _clamp_row(horizon, intr.height)
    if v_bottom - v_top < min_height:
        return None
    far_idx = ground_bin.point_indices[int(np.argmin(rows))]
    distance = float(np.linalg.norm(cam.points[far_idx]))
    return Stixel(col, v_top, v_bottom, StixelType.GROUND, distance)


def generate_stixel_world(pc: PointCloud, calib: Calibration, cfg: AgtConfig) -> StixelWorld:
    """Run the full ground-truth pipeline on one sensor-frame cloud.

    Propagates GroundNotFoundError when the frame has no usable ground plane;
    individual degenerate stixels are skipped silently.
    """
    if len(pc) == 0:
        raise InvariantViolation("point cloud is empty")
    if pc.frame is Frame.SENSOR:
        cam = transform_to_camera(pc, calib.extrinsics)
    else:
        cam = pc
    intr = calib.intrinsics
    grid = GridSpec.for_image(intr.width, intr.height, cfg.stride)

    plane, ground_idx = two_stage_ground(cam, cfg.ransac)
    non_ground = np.setdiff1d(np.arange(len(cam), dtype=np.intp), ground_idx)

    visible = non_ground
    if non_ground.size:
        try:
            local = remove_hidden_points(cam.subset(non_ground), cfg.hpr_gamma)
            visible = non_ground[local]
        except DegenerateHullError:
            log.debug("hidden-point removal skipped: degenerate hull")

    uv, _ = project_points(intr, cam.points)
    object_bins = bin_by_column(cam, intr, grid, visible)
    ground_bins = bin_by_column(cam, intr, grid, ground_idx)

    stixels: list[Stixel] = []
    for col in range(grid.cols):
        horizon = ground_vanishing_row(plane, intr, (col + 0.5) * grid.stride)
        clusters = cluster_column_objects(object_bins[col], cam, cfg.dbscan, plane)
        objects = _column_objects(col, clusters, cam, uv, plane, intr, grid, cfg, horizon)
        stixels.extend(objects)
        ground = _column_ground(
            col, ground_bins[col], cam, uv, objects, horizon, intr, cfg.min_stixel_height
        )
        if ground is not None:
            stixels.append(ground)
    return StixelWorld(
        stixels=tuple(stixels),
        image_width=intr.width,
        image_height=intr.height,
        stixel_width=cfg.stride,
    )
