"""DBSCAN and the column decomposition that turns non-ground points into
per-column object clusters ordered near to far."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, Frame, GridSpec, Plane, PointCloud
from .errors import InvariantViolation
from .geometry import project_points

NOISE = -1


@dataclass(frozen=True)
class DbscanConfig:
    eps: float = 0.4
    min_pts: int = 3

    def __post_init__(self):
        if not self.eps > 0:
            raise InvariantViolation("eps must be positive")
        if self.min_pts < 1:
            raise InvariantViolation("min_pts must be >= 1")


@dataclass(frozen=True)
class ColumnBin:
    """Point indices (into the parent cloud) whose projection falls in one grid column."""

    column: int
    point_indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.point_indices, dtype=np.intp)
        idx.setflags(write=False)
        object.__setattr__(self, "point_indices", idx)
        if self.column < 0:
            raise InvariantViolation("column must be non-negative")

    def __len__(self) -> int:
        return self.point_indices.size


def dbscan(points, cfg: DbscanConfig) -> np.ndarray:
    """Density clustering with Euclidean distance.

    A point is core when at least min_pts points (itself included) lie within
    eps. Clusters are numbered in order of first discovery over the input scan,
    and a border point is claimed by the first cluster whose expansion reaches
    it, which makes the labeling deterministic for a fixed input order.
    Returns one label per point, NOISE (-1) for unclustered points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = pts.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    eps_sq = cfg.eps * cfg.eps

    if n <= 4096:
        # small inputs: precompute all neighbor lists in row blocks, then BFS
        # on plain lists; distances use direct differences so boundary cases
        # agree bit-for-bit with a naive pairwise implementation
        neighbor_list: list[list[int]] = []
        block = 256
        for start in range(0, n, block):
            chunk = pts[start : start + block]
            d2 = ((chunk[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
            for row in d2 <= eps_sq:
                neighbor_list.append(np.flatnonzero(row).tolist())

        def region_query(i):
            return neighbor_list[i]

    else:

        def region_query(i):
            diff = pts - pts[i]
            return np.flatnonzero(
                np.einsum("ij,ij->i", diff, diff) <= eps_sq
            ).tolist()

    labels = [NOISE] * n
    visited = bytearray(n)
    enqueued = bytearray(n)
    next_label = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = 1
        neighbors = region_query(i)
        if len(neighbors) < cfg.min_pts:
            continue
        labels[i] = next_label
        enqueued[i] = 1
        queue: list[int] = []
        for k in neighbors:
            if not enqueued[k]:
                enqueued[k] = 1
                queue.append(k)
        head = 0
        while head < len(queue):
            j = queue[head]
            head += 1
            if labels[j] == NOISE:
                labels[j] = next_label
            if visited[j]:
                continue
            visited[j] = 1
            j_neighbors = region_query(j)
            if len(j_neighbors) >= cfg.min_pts:
                for k in j_neighbors:
                    if not enqueued[k]:
                        enqueued[k] = 1
                        queue.append(k)
        next_label += 1
    return np.array(labels, dtype=np.int64)


def bin_by_column(
    pc: PointCloud,
    intr: CameraIntrinsics,
    grid: GridSpec,
    candidate_indices,
) -> list[ColumnBin]:
    """Assign candidate points to grid columns by projected pixel column.

    Points behind the camera or projecting outside the image are dropped.
    Returns one bin per grid column, possibly empty, in column order.
    """
    if pc.frame is not Frame.CAMERA:
        raise InvariantViolation("bin_by_column expects a camera-frame cloud")
    if grid.image_width != intr.width or grid.image_height != intr.height:
        raise InvariantViolation("grid does not match the camera image size")
    idx = np.asarray(candidate_indices, dtype=np.intp)
    uv, in_front = project_points(intr, pc.points[idx])
    with np.errstate(invalid="ignore"):
        inside = (
            in_front
            & (uv[:, 0] >= 0.0)
            & (uv[:, 0] < intr.width)
            & (uv[:, 1] >= 0.0)
            & (uv[:, 1] < intr.height)
        )
    columns = np.full(idx.size, -1, dtype=np.int64)
    columns[inside] = (uv[inside, 0] // grid.stride).astype(np.int64)
    bins = []
    for col in range(grid.cols):
        bins.append(ColumnBin(column=col, point_indices=idx[columns == col]))
    return bins


def cluster_column_objects(
    bin_: ColumnBin,
    pc: PointCloud,
    cfg: DbscanConfig,
    plane: Plane,
) -> list[np.ndarray]:
    """Cluster one column's points in (range, height-above-plane) coordinates.

    Noise points are discarded; clusters come back as index arrays into the
    parent cloud, sorted by increasing mean distance from the camera origin.
    """
    if len(bin_) == 0:
        return []
    pts = pc.points[bin_.point_indices]
    ranges = np.linalg.norm(pts, axis=1)
    heights = plane.height_above(pts)
    labels = dbscan(np.column_stack([ranges, heights]), cfg)
    clusters = []
    for label in range(labels.max() + 1 if labels.size else 0):
        member_mask = labels == label
        if not member_mask.any():
            continue
        indices = bin_.point_indices[member_mask]
        clusters.append((float(ranges[member_mask].mean()), indices))
    clusters.sort(key=lambda item: item[0])
    return [indices for _, indices in clusters]
