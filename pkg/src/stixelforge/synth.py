"""Deterministic synthetic scenes: a ray-cast LiDAR simulator plus an analytic
oracle that projects the same geometry straight into a StixelWorld without any
clustering. Tests and the acceptance suite use the pair to validate the
ground-truth pipeline end to end.

Sensor frame convention: x forward, y left, z up; the ground is the plane
z = ground_z. Scene files use the flat key=value grammar (see `textconf`):

    seed = 7
    ground_z = -1.8
    noise_sigma = 0.0
    sensor.origin = 0 0 0
    sensor.channels = 128
    sensor.vertical_fov_deg = 45
    sensor.azimuth_step_deg = 0.35
    sensor.azimuth_span_deg = -60 60
    box = 10 0 -0.9 2 2 1.8        # cx cy cz ex ey ez (centers/extents, m)
    wall = 20 -6 20 6 3            # x0 y0 x1 y1 height (base on the ground)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .agt import ground_vanishing_row
from .core import (
    Calibration,
    Frame,
    GridSpec,
    Plane,
    PointCloud,
    Stixel,
    StixelType,
    StixelWorld,
)
from .errors import InvariantViolation
from .geometry import project_points
from .textconf import get_scalar, get_tuple, parse_kv

_RAY_EPS = 1e-9


@dataclass(frozen=True)
class SensorRig:
    """Spinning-LiDAR geometry: channels spread over the vertical FoV, one ray
    per azimuth step within the span."""

    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    channels: int = 128
    vertical_fov_deg: float = 45.0
    azimuth_step_deg: float = 0.35
    azimuth_span_deg: tuple[float, float] = (-60.0, 60.0)

    def __post_init__(self):
        if self.channels < 1:
            raise InvariantViolation("sensor needs at least one channel")
        if not self.vertical_fov_deg > 0:
            raise InvariantViolation("vertical FoV must be positive")
        if not self.azimuth_step_deg > 0:
            raise InvariantViolation("azimuth step must be positive")
        if not self.azimuth_span_deg[0] < self.azimuth_span_deg[1]:
            raise InvariantViolation("azimuth span must be a non-empty interval")

    def elevations_rad(self) -> np.ndarray:
        half = math.radians(self.vertical_fov_deg) / 2.0
        if self.channels == 1:
            return np.array([0.0])
        return np.linspace(-half, half, self.channels)

    def azimuths_rad(self) -> np.ndarray:
        a0, a1 = (math.radians(a) for a in self.azimuth_span_deg)
        step = math.radians(self.azimuth_step_deg)
        return np.arange(a0, a1 + step * 0.5, step)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the sensor frame: center plus full extents."""

    center: tuple[float, float, float]
    extents: tuple[float, float, float]

    def __post_init__(self):
        if any(e <= 0 for e in self.extents):
            raise InvariantViolation("box extents must be positive")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.extents) / 2.0

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.extents) / 2.0

    def corners(self) -> np.ndarray:
        lo, hi = self.lo, self.hi
        return np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )


@dataclass(frozen=True)
class Wall:
    """Vertical rectangle: a horizontal base segment extruded upward."""

    p0: tuple[float, float]
    p1: tuple[float, float]
    height: float
    z_base: float

    def __post_init__(self):
        if not self.height > 0:
            raise InvariantViolation("wall height must be positive")
        if self.p0 == self.p1:
            raise InvariantViolation("wall base endpoints must differ")

    def corners(self) -> np.ndarray:
        x0, y0 = self.p0
        x1, y1 = self.p1
        zb, zt = self.z_base, self.z_base + self.height
        return np.array([[x0, y0, zb], [x1, y1, zb], [x0, y0, zt], [x1, y1, zt]])


@dataclass(frozen=True)
class SceneSpec:
    """Ground plane height, obstacles, sensor model, and noise parameters."""

    ground_z: float = -1.8
    boxes: tuple[Box, ...] = ()
    walls: tuple[Wall, ...] = ()
    sensor: SensorRig = field(default_factory=SensorRig)
    seed: int = 0
    noise_sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "walls", tuple(self.walls))
        ox = self.sensor.origin[0]
        for box in self.boxes:
            if box.lo[0] <= ox:
                raise InvariantViolation("boxes must lie in front of the sensor (+x)")
        for wall in self.walls:
            if wall.p0[0] <= ox or wall.p1[0] <= ox:
                raise InvariantViolation("walls must lie in front of the sensor (+x)")
        if self.noise_sigma < 0:
            raise InvariantViolation("noise sigma must be >= 0")


def parse_scene(text: str) -> SceneSpec:
    """Read a SceneSpec from its key=value text form."""
    kv = parse_kv(text)
    boxes = []
    for tokens in kv.get("box", []):
        vals = tuple(float(t) for t in tokens)
        if len(vals) != 6:
            raise InvariantViolation(f"box expects 6 numbers, got {len(vals)}")
        boxes.append(Box(center=vals[:3], extents=vals[3:]))
    ground_z = get_scalar(kv, "ground_z", float, default=-1.8)
    walls = []
    for tokens in kv.get("wall", []):
        vals = tuple(float(t) for t in tokens)
        if len(vals) == 5:
            vals = vals + (ground_z,)
        if len(vals) != 6:
            raise InvariantViolation(f"wall expects 5 or 6 numbers, got {len(tokens)}")
        walls.append(Wall(p0=vals[0:2], p1=vals[2:4], height=vals[4], z_base=vals[5]))
    sensor = SensorRig(
        origin=get_tuple(kv, "sensor.origin", float, 3, default=(0.0, 0.0, 0.0)),
        channels=get_scalar(kv, "sensor.channels", int, default=128),
        vertical_fov_deg=get_scalar(kv, "sensor.vertical_fov_deg", float, default=45.0),
        azimuth_step_deg=get_scalar(kv, "sensor.azimuth_step_deg", float, default=0.35),
        azimuth_span_deg=get_tuple(kv, "sensor.azimuth_span_deg", float, 2, default=(-60.0, 60.0)),
    )
    return SceneSpec(
        ground_z=ground_z,
        boxes=tuple(boxes),
        walls=tuple(walls),
        sensor=sensor,
        seed=get_scalar(kv, "seed", int, default=0),
        noise_sigma=get_scalar(kv, "noise_sigma", float, default=0.0),
    )


def _ray_ground(origin: np.ndarray, dirs: np.ndarray, ground_z: float) -> np.ndarray:
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ground_z - origin[2]) / dz
    t = np.where((np.abs(dz) > _RAY_EPS) & (t > _RAY_EPS), t, np.inf)
    return t


def _ray_box(origin: np.ndarray, dirs: np.ndarray, box: Box) -> np.ndarray:
    lo = box.lo - origin
    hi = box.hi - origin
    t_near = np.full(dirs.shape[0], -np.inf)
    t_far = np.full(dirs.shape[0], np.inf)
    for axis in range(3):
        d = dirs[:, axis]
        parallel = np.abs(d) <= _RAY_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = lo[axis] / d
            t2 = hi[axis] / d
        lo_t = np.minimum(t1, t2)
        hi_t = np.maximum(t1, t2)
        t_near = np.where(parallel, t_near, np.maximum(t_near, lo_t))
        t_far = np.where(parallel, t_far, np.minimum(t_far, hi_t))
        # a ray parallel to this axis misses unless its origin is inside the slab
        outside = parallel & ((lo[axis] > 0) | (hi[axis] < 0))
        t_far = np.where(outside, -np.inf, t_far)
    hit = (t_near <= t_far) & (t_near > _RAY_EPS)
    return np.where(hit, t_near, np.inf)


def _ray_wall(origin: np.ndarray, dirs: np.ndarray, wall: Wall) -> np.ndarray:
    base = np.array([wall.p0[0], wall.p0[1], wall.z_base])
    edge = np.array([wall.p1[0] - wall.p0[0], wall.p1[1] - wall.p0[1], 0.0])
    normal = np.cross(edge, np.array([0.0, 0.0, 1.0]))
    normal = normal / np.linalg.norm(normal)
    denom = dirs @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((base - origin) @ normal) / denom
    q = origin + t[:, None] * dirs
    s = ((q - base) @ edge) / (edge @ edge)
    zflat = (q[:, 2] - wall.z_base) / wall.height
    hit = (
        (np.abs(denom) > _RAY_EPS)
        & (t > _RAY_EPS)
        & (s >= 0.0)
        & (s <= 1.0)
        & (zflat >= 0.0)
        & (zflat <= 1.0)
    )
    return np.where(hit, t, np.inf)


def simulate_lidar(spec: SceneSpec) -> PointCloud:
    """Cast one ray per (azimuth, channel) and keep the nearest hit per ray.

    Rays with no hit are dropped. Optional Gaussian range noise is seeded by
    the scene seed, so the result is bit-identical across runs.
    """
    origin = np.asarray(spec.sensor.origin, dtype=np.float64)
    elev = spec.sensor.elevations_rad()
    azim = spec.sensor.azimuths_rad()
    aa, ee = np.meshgrid(azim, elev, indexing="ij")
    aa = aa.ravel()
    ee = ee.ravel()
    dirs = np.column_stack(
        [np.cos(ee) * np.cos(aa), np.cos(ee) * np.sin(aa), np.sin(ee)]
    )
    t = _ray_ground(origin, dirs, spec.ground_z)
    for box in spec.boxes:
        t = np.minimum(t, _ray_box(origin, dirs, box))
    for wall in spec.walls:
        t = np.minimum(t, _ray_wall(origin, dirs, wall))
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        t = t + rng.normal(0.0, spec.noise_sigma, t.shape)
    hit = np.isfinite(t)
    points = origin + t[hit, None] * dirs[hit]
    return PointCloud(points, Frame.SENSOR)


def scene_ground_plane(spec: SceneSpec, calib: Calibration) -> Plane:
    """The scene's ground plane expressed in the camera frame."""
    rot = calib.extrinsics.rotation
    normal = rot @ np.array([0.0, 0.0, 1.0])
    anchor = rot @ np.array([0.0, 0.0, spec.ground_z]) + calib.extrinsics.translation
    offset = -float(normal @ anchor)
    if offset < 0:
        normal, offset = -normal, -offset
    return Plane(normal / np.linalg.norm(normal), offset)


def _silhouette(corners_cam: np.ndarray, intr) -> np.ndarray | None:
    """Ordered 2D hull of the projected corners; None when degenerate."""
    if (corners_cam[:, 2] <= _RAY_EPS).any():
        raise InvariantViolation("oracle objects must be fully in front of the camera")
    uv, _ = project_points(intr, corners_cam)
    try:
        hull = ConvexHull(uv)
    except QhullError:
        return None
    return uv[hull.vertices]


def _slice_rows(poly: np.ndarray, ua: float, ub: float) -> tuple[float, float] | None:
    """(min_row, max_row) of a convex polygon restricted to u in [ua, ub]."""
    rows: list[float] = []
    k = poly.shape[0]
    for i in range(k):
        u0, v0 = poly[i]
        u1, v1 = poly[(i + 1) % k]
        lo, hi = (u0, u1) if u0 <= u1 else (u1, u0)
        a, b = max(lo, ua), min(hi, ub)
        if a > b:
            continue
        if u1 == u0:
            rows.extend((v0, v1))
        else:
            for uu in (a, b):
                frac = (uu - u0) / (u1 - u0)
                rows.append(v0 + frac * (v1 - v0))
    if not rows:
        return None
    return min(rows), max(rows)


def _clamp_row(v: float, height: int) -> float:
    return float(min(max(round(v), 0), height))


@dataclass(frozen=True)
class _OracleObject:
    poly: np.ndarray
    u_min: float
    u_max: float
    attached: bool
    near_distance: float


def oracle_stixel_world(
    spec: SceneSpec,
    calib: Calibration,
    grid: GridSpec,
    *,
    ground_attach_delta: float = 0.3,
    min_stixel_height: int = 4,
) -> StixelWorld:
    """Exact per-column stixels from the scene geometry, no clustering.

    Each obstacle's image silhouette is the convex hull of its projected
    corners; a column's stixel rows are the silhouette's row extrema over the
    column's pixel range. Columns walk their obstacles near to far: the first
    one is a ground object (silhouette bottom equals the ground contact) or,
    when detached from the plane, a swib object based at the plane's vanishing
    row; every farther obstacle becomes a swib object based at the line of
    sight over its predecessor. Ground stixels run from the first obstacle's
    base (or the vanishing row) down to the nearest-ring ground return.
    """
    intr = calib.intrinsics
    rot = calib.extrinsics.rotation
    trans = calib.extrinsics.translation
    plane = scene_ground_plane(spec, calib)
    stride = grid.stride

    objects: list[_OracleObject] = []
    for obj in list(spec.boxes) + list(spec.walls):
        corners = obj.corners() @ rot.T + trans
        poly = _silhouette(corners, intr)
        if poly is None:
            continue
        objects.append(
            _OracleObject(
                poly=poly,
                u_min=float(poly[:, 0].min()),
                u_max=float(poly[:, 0].max()),
                attached=bool(plane.height_above(corners).min() <= ground_attach_delta),
                near_distance=float(np.linalg.norm(corners, axis=1).min()),
            )
        )
    objects.sort(key=lambda o: o.near_distance)

    ring_bottom = _ground_ring_rows(spec, calib, grid)

    stixels: list[Stixel] = []
    for col in range(grid.cols):
        ua, ub = col * stride, (col + 1) * stride
        horizon = ground_vanishing_row(plane, intr, (col + 0.5) * stride)
        emitted: list[Stixel] = []
        last_top: float | None = None
        for obj in objects:
            a, b = max(ua, obj.u_min), min(float(ub), obj.u_max)
            if b - a <= 1e-9:
                continue
            rows = _slice_rows(obj.poly, a, b)
            if rows is None:
                continue
            top_raw, bottom_raw = rows
            v_top = _clamp_row(top_raw, intr.height)
            if last_top is None:
                if obj.attached:
                    stype = StixelType.GROUND_OBJECT
                    v_bottom = _clamp_row(bottom_raw, intr.height)
                else:
                    stype = StixelType.SWIB_OBJECT
                    v_bottom = _clamp_row(horizon, intr.height)
            else:
                if v_top >= last_top:
                    continue  # fully hidden behind the nearer obstacle
                stype = StixelType.SWIB_OBJECT
                v_bottom = last_top
            if v_bottom - v_top < min_stixel_height:
                continue
            emitted.append(
                Stixel(col, v_top, v_bottom, stype, distance=obj.near_distance)
            )
            last_top = v_top
        stixels.extend(emitted)

        ring_row = ring_bottom[col]
        if ring_row is not None:
            v_top = emitted[0].v_bottom if emitted else _clamp_row(horizon, intr.height)
            v_bottom = _clamp_row(ring_row, intr.height)
            if v_bottom - v_top >= min_stixel_height:
                distance = _ground_distance(plane, intr, (col + 0.5) * stride, v_top, horizon)
                stixels.append(Stixel(col, v_top, v_bottom, StixelType.GROUND, distance))

    return StixelWorld(
        stixels=tuple(stixels),
        image_width=intr.width,
        image_height=intr.height,
        stixel_width=stride,
    )


def _ground_ring_rows(
    spec: SceneSpec, calib: Calibration, grid: GridSpec
) -> list[float | None]:
    """Per-column image row of the nearest ground ring (steepest channel)."""
    result: list[float | None] = [None] * grid.cols
    origin = np.asarray(spec.sensor.origin, dtype=np.float64)
    depth = origin[2] - spec.ground_z
    elev = spec.sensor.elevations_rad()
    steepest = float(elev.min())
    if depth <= 0 or steepest >= 0:
        return result
    radius = depth / math.tan(-steepest)
    a0, a1 = (math.radians(a) for a in spec.sensor.azimuth_span_deg)
    azimuth = np.arange(a0, a1, math.radians(0.02))
    ring = np.column_stack(
        [
            origin[0] + radius * np.cos(azimuth),
            origin[1] + radius * np.sin(azimuth),
            np.full(azimuth.shape, spec.ground_z),
        ]
    )
    cam = ring @ calib.extrinsics.rotation.T + calib.extrinsics.translation
    uv, in_front = project_points(calib.intrinsics, cam)
    intr = calib.intrinsics
    with np.errstate(invalid="ignore"):
        ok = in_front & (uv[:, 0] >= 0) & (uv[:, 0] < intr.width) & (uv[:, 1] >= 0) & (uv[:, 1] < intr.height)
    cols = (uv[ok, 0] // grid.stride).astype(np.int64)
    rows = uv[ok, 1]
    for col, row in zip(cols, rows):
        prev = result[col]
        if prev is None or row > prev:
            result[col] = float(row)
    return result


def _ground_distance(plane: Plane, intr, u: float, v_top: float, horizon: float) -> float:
    """Range to the ground at the far end of a ground stixel, capped."""
    v_eval = max(v_top, horizon + 1.0)
    direction = np.array([(u - intr.cx) / intr.fx, (v_eval - intr.cy) / intr.fy, 1.0])
    slope = float(plane.normal @ direction)
    if abs(slope) < 1e-12:
        return 1000.0
    t = -plane.offset / slope
    if t <= 0:
        return 1000.0
    return float(min(np.linalg.norm(t * direction), 1000.0))


def default_calibration(
    width: int = 1920,
    height: int = 1200,
    fx: float = 600.0,
    fy: float = 600.0,
) -> Calibration:
    """Camera co-located with the sensor, axes permuted sensor->camera:
    camera x = -sensor y, camera y = -sensor z, camera z = sensor x."""
    from .core import CameraIntrinsics, Extrinsics

    rotation = np.array(
        [
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0],
        ]
    )
    return Calibration(
        intrinsics=CameraIntrinsics(
            fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0, width=width, height=height
        ),
        extrinsics=Extrinsics(rotation, np.zeros(3)),
    )


def random_scene(seed: int, n_boxes: int | None = None) -> SceneSpec:
    """Seeded random scene: ground plane, 2-5 resting boxes at well-separated
    depths, one wall, and one elevated slab, all inside the default sensor's
    field of view. Built for oracle/pipeline agreement tests."""
    rng = np.random.default_rng(seed)
    if n_boxes is None:
        n_boxes = int(rng.integers(2, 6))
    ground_z = -1.8
    depth_slots = np.array([6.0, 8.5, 11.0, 13.5, 16.0])
    rng.shuffle(depth_slots)
    boxes = []
    for depth in depth_slots[:n_boxes]:
        depth = float(depth + rng.uniform(-0.4, 0.4))
        lateral = float(rng.uniform(-0.55, 0.55) * depth)
        ex = float(rng.uniform(1.2, 2.0))
        ey = float(rng.uniform(1.2, 2.0))
        ez = float(rng.uniform(1.2, 2.2))
        boxes.append(Box(center=(depth, lateral, ground_z + ez / 2.0), extents=(ex, ey, ez)))
    wall_y = float(rng.uniform(-3.0, 3.0))
    wall_half = float(rng.uniform(4.0, 7.0))
    wall = Wall(
        p0=(20.0, wall_y - wall_half),
        p1=(20.0, wall_y + wall_half),
        height=float(rng.uniform(2.5, 3.5)),
        z_base=ground_z,
    )
    slab_y = float(rng.uniform(-4.0, 4.0))
    slab = Box(
        center=(25.0, slab_y, float(rng.uniform(2.4, 3.0))),
        extents=(2.0, float(rng.uniform(5.0, 8.0)), 0.4),
    )
    sensor = SensorRig(channels=128, azimuth_step_deg=0.1, azimuth_span_deg=(-60.0, 60.0))
    return SceneSpec(
        ground_z=ground_z,
        boxes=tuple(boxes) + (slab,),
        walls=(wall,),
        sensor=sensor,
        seed=seed,
        noise_sigma=0.0,
    )
