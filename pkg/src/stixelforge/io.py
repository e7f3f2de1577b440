"""Readers and writers: KITTI velodyne binaries and calibration text, stixel
CSV files, heat-map blobs, and PPM overlays.

All write/read pairs round-trip exactly on valid inputs, and every reader maps
malformed bytes to a typed StixelForgeError instead of crashing.

File formats:

* ``.bin``      consecutive little-endian float32 (x, y, z, intensity) quadruples
* ``.txt``      KITTI calibration: ``P2`` (3x4), ``R0_rect`` (3x3), ``Tr_velo_to_cam`` (3x4)
* ``.stx.csv``  one ``# width=.. height=.. stride=.. frame=..`` metadata line,
                a ``frame,column,vT,vB,type,distance`` header, one row per
                stixel; type codes G/GO/SO; distance -1 encodes "absent"
* ``.sxhm``     magic ``SXHM``, u32 version=1, u32 rows, u32 cols, u32 stride,
                then rows*cols little-endian float32 row-major for the
                occupancy map followed by the cut map
* ``.ppm``      binary P6, maxval 255
"""
from __future__ import annotations

import struct

import numpy as np

from .core import (
    Calibration,
    CameraIntrinsics,
    Extrinsics,
    Frame,
    GridSpec,
    HeatmapPair,
    PointCloud,
    Stixel,
    StixelType,
    StixelWorld,
)
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    InvariantViolation,
    MalformedMatrixError,
    MissingKeyError,
    ParseError,
    TruncatedFileError,
    VersionUnsupportedError,
)

_BLOB_MAGIC = b"SXHM"
_BLOB_VERSION = 1
_CSV_HEADER = "frame,column,vT,vB,type,distance"
_TYPE_CODES = {"G": StixelType.GROUND, "GO": StixelType.GROUND_OBJECT, "SO": StixelType.SWIB_OBJECT}
_CODE_OF_TYPE = {v: k for k, v in _TYPE_CODES.items()}

# Distance color ramp endpoints for overlays, meters.
_RAMP_MAX_DISTANCE = 50.0
_SENTINEL_GRAY = (128, 128, 128)


# ---------------------------------------------------------------- velodyne

def read_kitti_velodyne(data: bytes) -> PointCloud:
    """Parse (x, y, z, intensity) float32 quadruples; intensity is discarded."""
    if len(data) % 16 != 0:
        raise TruncatedFileError(f"byte length {len(data)} is not a multiple of 16")
    quads = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    with np.errstate(invalid="ignore"):  # arbitrary bytes may be signaling NaNs
        points = quads[:, :3].astype(np.float64)
    return PointCloud(points, Frame.SENSOR)


def write_kitti_velodyne(pc: PointCloud, intensity: float = 0.0) -> bytes:
    quads = np.empty((len(pc), 4), dtype="<f4")
    quads[:, :3] = pc.points
    quads[:, 3] = intensity
    return quads.tobytes()


# ------------------------------------------------------------- calibration

def _calib_values(lines: dict[str, str], key: str, count: int) -> np.ndarray:
    if key not in lines:
        raise MissingKeyError(f"calibration key {key!r} not found")
    tokens = lines[key].split()
    if len(tokens) != count:
        raise MalformedMatrixError(f"{key} expects {count} numbers, got {len(tokens)}")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise MalformedMatrixError(f"{key}: {exc}") from exc


def _nearest_rotation(mat: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(mat)
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        u[:, -1] = -u[:, -1]
        rot = u @ vt
    return rot


def read_kitti_calib(text: str, image_size: tuple[int, int] = (1248, 376)) -> Calibration:
    """Parse KITTI-style calibration text into intrinsics plus a single rigid
    sensor-to-camera transform (rectification folded in).

    The format does not carry the image size, so it is a parameter. Rotations
    that are slightly off orthonormal (real calibrations) are projected onto
    the nearest rotation.
    """
    lines: dict[str, str] = {}
    for raw in text.splitlines():
        if ":" not in raw:
            continue
        key, value = raw.split(":", 1)
        lines[key.strip()] = value.strip()
    p2 = _calib_values(lines, "P2", 12).reshape(3, 4)
    r0 = _calib_values(lines, "R0_rect", 9).reshape(3, 3)
    tr = _calib_values(lines, "Tr_velo_to_cam", 12).reshape(3, 4)

    fx, fy = p2[0, 0], p2[1, 1]
    cx, cy = p2[0, 2], p2[1, 2]
    if fx <= 0 or fy <= 0:
        raise MalformedMatrixError("P2 focal lengths must be positive")
    intr = CameraIntrinsics(
        fx=float(fx), fy=float(fy), cx=float(cx), cy=float(cy),
        width=image_size[0], height=image_size[1],
    )
    rotation = r0 @ tr[:, :3]
    if not np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-3):
        raise MalformedMatrixError("R0_rect @ Tr_velo_to_cam is not close to a rotation")
    rotation = _nearest_rotation(rotation)
    # P2's fourth column is a K-premultiplied translation; fold it into the
    # extrinsic translation so u = fx*x/z + cx holds exactly.
    baseline = np.array(
        [
            (p2[0, 3] - cx * p2[2, 3]) / fx,
            (p2[1, 3] - cy * p2[2, 3]) / fy,
            p2[2, 3],
        ]
    )
    translation = r0 @ tr[:, 3] + baseline
    return Calibration(intrinsics=intr, extrinsics=Extrinsics(rotation, translation))


def write_kitti_calib(calib: Calibration) -> str:
    intr = calib.intrinsics
    p2 = [intr.fx, 0.0, intr.cx, 0.0, 0.0, intr.fy, intr.cy, 0.0, 0.0, 0.0, 1.0, 0.0]
    r0 = np.eye(3).ravel()
    tr = np.column_stack([calib.extrinsics.rotation, calib.extrinsics.translation]).ravel()
    fmt = lambda vals: " ".join(repr(float(v)) for v in vals)
    return (
        f"P2: {fmt(p2)}\n"
        f"R0_rect: {fmt(r0)}\n"
        f"Tr_velo_to_cam: {fmt(tr)}\n"
    )


# -------------------------------------------------------------- stixel CSV

def write_stixel_csv(world: StixelWorld, frame_id: str = "0") -> str:
    """Serialize a world; floats use repr so the round trip is exact."""
    if any(c in frame_id for c in ",\n\r"):
        raise InvariantViolation("frame id must not contain commas or newlines")
    for st in world.stixels:
        if st.stixel_type not in _CODE_OF_TYPE:
            raise InvariantViolation(f"{st.stixel_type} stixels are not serializable")
    out = [
        f"# width={world.image_width} height={world.image_height} "
        f"stride={world.stixel_width} frame={frame_id}",
        _CSV_HEADER,
    ]
    for st in world.stixels:
        distance = "-1" if st.distance is None else repr(float(st.distance))
        out.append(
            f"{frame_id},{st.column},{repr(float(st.v_top))},{repr(float(st.v_bottom))},"
            f"{_CODE_OF_TYPE[st.stixel_type]},{distance}"
        )
    return "\n".join(out) + "\n"


def read_stixel_csv(text: str) -> StixelWorld:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParseError("missing '# width=.. height=.. stride=..' metadata line", line=1)
    meta: dict[str, str] = {}
    for token in lines[0][1:].split():
        if "=" not in token:
            raise ParseError(f"bad metadata token {token!r}", line=1)
        key, value = token.split("=", 1)
        meta[key] = value
    try:
        width = int(meta["width"])
        height = int(meta["height"])
        stride = int(meta["stride"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad metadata: {exc}", line=1) from exc
    if len(lines) < 2 or lines[1] != _CSV_HEADER:
        raise ParseError(f"expected header {_CSV_HEADER!r}", line=2)
    stixels = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", line=lineno)
        _, column, v_top, v_bottom, code, distance = fields
        if code not in _TYPE_CODES:
            raise ParseError(f"unknown stixel type code {code!r}", line=lineno)
        try:
            dist_val = float(distance)
            stixel = Stixel(
                column=int(column),
                v_top=float(v_top),
                v_bottom=float(v_bottom),
                stixel_type=_TYPE_CODES[code],
                distance=None if dist_val == -1 else dist_val,
            )
        except (ValueError, InvariantViolation) as exc:
            raise ParseError(str(exc), line=lineno) from exc
        stixels.append(stixel)
    try:
        return StixelWorld(
            stixels=tuple(stixels),
            image_width=width,
            image_height=height,
            stixel_width=stride,
        )
    except InvariantViolation as exc:
        raise ParseError(f"file describes an invalid world: {exc}") from exc


# ------------------------------------------------------------ heatmap blob

def write_heatmap_blob(hm: HeatmapPair) -> bytes:
    header = struct.pack(
        "<4sIIII", _BLOB_MAGIC, _BLOB_VERSION, hm.grid.rows, hm.grid.cols, hm.grid.stride
    )
    return header + hm.occ.astype("<f4").tobytes() + hm.cut.astype("<f4").tobytes()


def read_heatmap_blob(data: bytes) -> HeatmapPair:
    if len(data) < 4:
        raise TruncatedFileError("blob shorter than the magic")
    if data[:4] != _BLOB_MAGIC:
        raise BadMagicError(f"expected {_BLOB_MAGIC!r}, got {data[:4]!r}")
    if len(data) < 20:
        raise TruncatedFileError("blob header incomplete")
    _, version, rows, cols, stride = struct.unpack("<4sIIII", data[:20])
    if version != _BLOB_VERSION:
        raise VersionUnsupportedError(f"blob version {version} unsupported")
    expected = 20 + 2 * rows * cols * 4
    if len(data) != expected:
        raise TruncatedFileError(f"blob length {len(data)} != expected {expected}")
    grid = GridSpec(stride=stride, rows=rows, cols=cols)
    body = np.frombuffer(data[20:], dtype="<f4")
    occ = body[: rows * cols].reshape(rows, cols)
    cut = body[rows * cols :].reshape(rows, cols)
    return HeatmapPair(occ=occ, cut=cut, grid=grid)


# ------------------------------------------------------------- PPM overlay

def _parse_ppm(data: bytes) -> np.ndarray:
    if not data.startswith(b"P6"):
        raise ParseError("background is not a binary PPM (P6)")
    idx = 2
    fields: list[int] = []
    while len(fields) < 3:
        if idx >= len(data):
            raise TruncatedFileError("PPM header incomplete")
        char = data[idx : idx + 1]
        if char.isspace():
            idx += 1
        elif char == b"#":
            end = data.find(b"\n", idx)
            if end < 0:
                raise TruncatedFileError("unterminated PPM comment")
            idx = end + 1
        else:
            end = idx
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            try:
                fields.append(int(data[idx:end]))
            except ValueError as exc:
                raise ParseError(f"bad PPM header field {data[idx:end]!r}") from exc
            idx = end
    width, height, maxval = fields
    if maxval != 255:
        raise ParseError(f"only maxval 255 PPMs are supported, got {maxval}")
    if width < 1 or height < 1:
        raise ParseError("PPM dimensions must be positive")
    idx += 1  # single whitespace byte after maxval
    raster = data[idx : idx + 3 * width * height]
    if len(raster) < 3 * width * height:
        raise TruncatedFileError("PPM raster incomplete")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()


def _distance_color(distance: float | None) -> tuple[int, int, int]:
    if distance is None:
        return _SENTINEL_GRAY
    frac = min(max(distance / _RAMP_MAX_DISTANCE, 0.0), 1.0)
    return (round(255 * (1.0 - frac)), round(255 * frac), 0)


def render_overlay_ppm(
    world: StixelWorld,
    image_dims: tuple[int, int],
    background: bytes | None = None,
) -> bytes:
    """Draw object stixels as column rectangles colored red (near) to green
    (far, 50 m). With a background they blend 50/50; without one they are
    drawn opaque on black. Byte-identical output for identical inputs.
    """
    width, height = image_dims
    if world.image_width != width or world.image_height != height:
        raise DimensionMismatchError(
            f"world {world.image_width}x{world.image_height} vs image {width}x{height}"
        )
    if background is not None:
        canvas = _parse_ppm(background)
        if canvas.shape[:2] != (height, width):
            raise DimensionMismatchError(
                f"background {canvas.shape[1]}x{canvas.shape[0]} vs image {width}x{height}"
            )
        blend = True
    else:
        canvas = np.zeros((height, width, 3), dtype=np.uint8)
        blend = False
    s = world.stixel_width
    for st in sorted(world.object_stixels(), key=lambda t: (t.column, t.v_top, t.v_bottom)):
        color = np.array(_distance_color(st.distance), dtype=np.uint16)
        u0, u1 = st.column * s, min((st.column + 1) * s, width)
        v0, v1 = int(round(st.v_top)), min(int(round(st.v_bottom)), height)
        if blend:
            patch = canvas[v0:v1, u0:u1].astype(np.uint16)
            canvas[v0:v1, u0:u1] = ((patch + color) // 2).astype(np.uint8)
        else:
            canvas[v0:v1, u0:u1] = color.astype(np.uint8)
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + canvas.tobytes()
