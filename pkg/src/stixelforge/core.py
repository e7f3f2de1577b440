"""Shared value types for the stixel pipeline.

Conventions used throughout the package:

* image origin is the top-left corner, u grows right, v grows down;
* camera frame is +z forward, +x right, +y down (matching the pixel axes);
* stixel pixel intervals are closed-open [v_top, v_bottom), so vertically
  adjacent stixels tile an image column without overlap;
* sky is the absence of stixels above the topmost object of a column and is
  never stored explicitly.

All types are immutable after construction and validate their invariants
eagerly, raising InvariantViolation on bad input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvariantViolation


class Frame(Enum):
    SENSOR = "sensor"
    CAMERA = "camera"


def _as_points_array(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvariantViolation(f"expected an (n, 3) point array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvariantViolation("point coordinates must be finite")
    return arr


@dataclass(frozen=True)
class Point3:
    """A single 3D point in meters; the frame is implied by context."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            if not math.isfinite(getattr(self, name)):
                raise InvariantViolation(f"Point3.{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points; indices are stable identities."""

    points: np.ndarray
    frame: Frame

    def __post_init__(self):
        arr = _as_points_array(self.points)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)
        if not isinstance(self.frame, Frame):
            raise InvariantViolation(f"frame must be a Frame, got {self.frame!r}")

    def __len__(self) -> int:
        return self.points.shape[0]

    def point(self, i: int) -> Point3:
        x, y, z = self.points[i]
        return Point3(float(x), float(y), float(z))

    def subset(self, indices) -> "PointCloud":
        """New cloud restricted to `indices`, preserving their order."""
        return PointCloud(self.points[np.asarray(indices, dtype=np.intp)], self.frame)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvariantViolation("focal lengths must be positive")
        if not (0 < self.cx < self.width):
            raise InvariantViolation("cx must lie inside the image")
        if not (0 < self.cy < self.height):
            raise InvariantViolation("cy must lie inside the image")
        for v in (self.fx, self.fy, self.cx, self.cy):
            if not math.isfinite(v):
                raise InvariantViolation("intrinsics must be finite")


@dataclass(frozen=True)
class Extrinsics:
    """Rigid sensor-to-camera transform: p_cam = rotation @ p_sensor + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if rot.shape != (3, 3):
            raise InvariantViolation("rotation must be 3x3")
        if not np.isfinite(rot).all() or not np.isfinite(t).all():
            raise InvariantViolation("extrinsics must be finite")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9):
            raise InvariantViolation("rotation must be orthonormal (within 1e-9)")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise InvariantViolation("rotation determinant must be +1 (within 1e-9)")
        rot.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Extrinsics":
        return Extrinsics(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class Plane:
    """Plane {p : normal . p + offset = 0} with a unit normal oriented so the
    camera origin lies on the positive ("above") side."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if not np.isfinite(n).all() or not math.isfinite(self.offset):
            raise InvariantViolation("plane parameters must be finite")
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise InvariantViolation("plane normal must be unit length (within 1e-12)")
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)

    def height_above(self, points) -> np.ndarray:
        """Signed distance of points to the plane; positive is above (origin side)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.normal + self.offset


class StixelType(Enum):
    GROUND = "G"
    GROUND_OBJECT = "GO"
    SWIB_OBJECT = "SO"
    SKY = "S"


OBJECT_TYPES = (StixelType.GROUND_OBJECT, StixelType.SWIB_OBJECT)


@dataclass(frozen=True)
class Stixel:
    """One vertical image segment: grid column, pixel rows [v_top, v_bottom),
    a type, and the distance from the sensor origin to its top point in meters
    (None when unknown, e.g. for decoded predictions)."""

    column: int
    v_top: float
    v_bottom: float
    stixel_type: StixelType
    distance: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.v_top) and math.isfinite(self.v_bottom)):
            raise InvariantViolation("stixel rows must be finite")
        if not 0 <= self.v_top < self.v_bottom:
            raise InvariantViolation(
                f"stixel rows must satisfy 0 <= v_top < v_bottom, got [{self.v_top}, {self.v_bottom})"
            )
        if self.column < 0:
            raise InvariantViolation("stixel column must be non-negative")
        if self.distance is not None:
            if not math.isfinite(self.distance) or self.distance < 0:
                raise InvariantViolation("stixel distance must be finite and >= 0")
        if not isinstance(self.stixel_type, StixelType):
            raise InvariantViolation(f"bad stixel type {self.stixel_type!r}")

    @property
    def is_object(self) -> bool:
        return self.stixel_type in OBJECT_TYPES

    @property
    def height_px(self) -> float:
        return self.v_bottom - self.v_top


def stixel_pixel_interval(s: Stixel) -> tuple[float, float]:
    """Closed-open pixel row interval [v_top, v_bottom) occupied by the stixel."""
    return (s.v_top, s.v_bottom)


@dataclass(frozen=True)
class StixelWorld:
    """All stixels of one frame. Multi-layer: several object stixels may stack
    in a column, but their pixel intervals must not overlap."""

    stixels: tuple[Stixel, ...]
    image_width: int
    image_height: int
    stixel_width: int

    def __post_init__(self):
        object.__setattr__(self, "stixels", tuple(self.stixels))
        if self.image_width < 1 or self.image_height < 1:
            raise InvariantViolation("image dimensions must be positive")
        if self.stixel_width < 1:
            raise InvariantViolation("stixel width must be >= 1 px")
        n_cols = self.n_columns
        per_column: dict[int, list[Stixel]] = {}
        for st in self.stixels:
            if not isinstance(st, Stixel):
                raise InvariantViolation(f"not a Stixel: {st!r}")
            if st.column >= n_cols:
                raise InvariantViolation(
                    f"stixel column {st.column} out of range for {n_cols} columns"
                )
            if st.v_bottom > self.image_height:
                raise InvariantViolation(
                    f"stixel bottom {st.v_bottom} exceeds image height {self.image_height}"
                )
            if st.is_object:
                per_column.setdefault(st.column, []).append(st)
        for col, sts in per_column.items():
            sts.sort(key=lambda s: s.v_top)
            for a, b in zip(sts, sts[1:]):
                if b.v_top < a.v_bottom:
                    raise InvariantViolation(
                        f"object stixels overlap in column {col}: "
                        f"[{a.v_top},{a.v_bottom}) vs [{b.v_top},{b.v_bottom})"
                    )

    @property
    def n_columns(self) -> int:
        return self.image_width // self.stixel_width

    def object_stixels(self) -> list[Stixel]:
        return [s for s in self.stixels if s.is_object]

    def objects_in_column(self, column: int) -> list[Stixel]:
        out = [s for s in self.stixels if s.is_object and s.column == column]
        out.sort(key=lambda s: s.v_top)
        return out


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry: stride in pixels per cell and the resulting rows x cols."""

    stride: int
    rows: int
    cols: int

    def __post_init__(self):
        if self.stride < 1:
            raise InvariantViolation("stride must be >= 1")
        if self.rows < 1 or self.cols < 1:
            raise InvariantViolation("grid must have at least one row and column")

    @staticmethod
    def for_image(width: int, height: int, stride: int) -> "GridSpec":
        if stride < 1:
            raise InvariantViolation("stride must be >= 1")
        if width % stride or height % stride:
            raise InvariantViolation(
                f"stride {stride} must divide image size {width}x{height} exactly"
            )
        return GridSpec(stride=stride, rows=height // stride, cols=width // stride)

    @property
    def image_width(self) -> int:
        return self.cols * self.stride

    @property
    def image_height(self) -> int:
        return self.rows * self.stride


def _validated_grid_matrix(mat, grid: GridSpec, name: str, dtype=None) -> np.ndarray:
    arr = np.asarray(mat)
    if dtype is not None:
        arr = arr.astype(dtype, copy=True)
    else:
        arr = arr.copy()
    if arr.shape != (grid.rows, grid.cols):
        raise InvariantViolation(
            f"{name} shape {arr.shape} does not match grid {grid.rows}x{grid.cols}"
        )
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TargetGrid:
    """Binary occupancy and cut matrices at grid resolution."""

    occ: np.ndarray
    cut: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        occ = _validated_grid_matrix(self.occ, self.grid, "occ", dtype=np.uint8)
        cut = _validated_grid_matrix(self.cut, self.grid, "cut", dtype=np.uint8)
        for name, arr in (("occ", occ), ("cut", cut)):
            if not np.isin(arr, (0, 1)).all():
                raise InvariantViolation(f"{name} entries must be 0 or 1")
        occupied_cols = occ.any(axis=0)
        cut_cols = cut.any(axis=0)
        if np.any(cut_cols & ~occupied_cols):
            raise InvariantViolation("cut marks appear in a column with no occupancy")
        object.__setattr__(self, "occ", occ)
        object.__setattr__(self, "cut", cut)


@dataclass(frozen=True)
class HeatmapPair:
    """Normalized occupancy and cut heat maps; every entry lies in [0, 1]."""

    occ: np.ndarray
    cut: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        occ = _validated_grid_matrix(self.occ, self.grid, "occ")
        cut = _validated_grid_matrix(self.cut, self.grid, "cut")
        for name, arr in (("occ", occ), ("cut", cut)):
            if not np.isfinite(arr).all():
                raise InvariantViolation(f"{name} must be finite")
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise InvariantViolation(f"{name} entries must lie in [0, 1]")
        object.__setattr__(self, "occ", occ)
        object.__setattr__(self, "cut", cut)


@dataclass(frozen=True)
class Calibration:
    """Intrinsics plus the sensor-to-camera extrinsic transform."""

    intrinsics: CameraIntrinsics
    extrinsics: Extrinsics = field(default_factory=Extrinsics.identity)
