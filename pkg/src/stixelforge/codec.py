"""Encoding stixel worlds into occupancy/cut grids, heat-map normalization,
and decoding heat maps back into a (type-collapsed) stixel world.

Decoding scans each grid column for maximal runs of occupancy above the
threshold, then splits a run wherever the cut profile has a thresholded local
maximum at an interior cell. A boundary between stacked stixels is encoded as
the upper stixel's bottom mark immediately followed by the lower stixel's top
mark, so within a plateau of adjacent qualifying cells the marks alternate
closing and opening edges: every second plateau cell starts a new segment. An
isolated interior mark also starts one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GridSpec, HeatmapPair, Stixel, StixelType, StixelWorld, TargetGrid
from .errors import GridMismatchError, InvariantViolation, NonFiniteInputError


@dataclass(frozen=True)
class DecodeConfig:
    """Thresholds for turning heat maps into stixels."""

    t_occ: float = 0.5
    t_cut: float = 0.5
    min_run_cells: int = 1

    def __post_init__(self):
        for name in ("t_occ", "t_cut"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise InvariantViolation(f"{name} must lie in [0, 1]")
        if self.min_run_cells < 1:
            raise InvariantViolation("min_run_cells must be >= 1")


def _check_world_grid(world: StixelWorld, grid: GridSpec) -> None:
    if (
        world.image_width != grid.image_width
        or world.image_height != grid.image_height
        or world.stixel_width != grid.stride
    ):
        raise GridMismatchError(
            f"world {world.image_width}x{world.image_height}@{world.stixel_width} "
            f"does not match grid {grid.image_width}x{grid.image_height}@{grid.stride}"
        )


def encode_targets(world: StixelWorld, grid: GridSpec) -> TargetGrid:
    """Rasterize object stixels into binary occupancy and cut matrices.

    A stixel covers occupancy cells [floor(v_top/s), ceil(v_bottom/s)) of its
    column and marks the first and last of those cells in the cut matrix.
    Ground and sky contribute nothing. Overlapping marks saturate (binary OR).
    """
    _check_world_grid(world, grid)
    occ = np.zeros((grid.rows, grid.cols), dtype=np.uint8)
    cut = np.zeros((grid.rows, grid.cols), dtype=np.uint8)
    s = grid.stride
    for st in world.object_stixels():
        top = int(st.v_top // s)
        bottom = int(-(-st.v_bottom // s))  # ceil for floats without math.ceil
        bottom = min(bottom, grid.rows)
        occ[top:bottom, st.column] = 1
        cut[top, st.column] = 1
        cut[bottom - 1, st.column] = 1
    return TargetGrid(occ=occ, cut=cut, grid=grid)


def heatmaps_from_targets(targets: TargetGrid) -> HeatmapPair:
    """View binary targets as (already normalized) heat maps."""
    return HeatmapPair(
        occ=targets.occ.astype(np.float64),
        cut=targets.cut.astype(np.float64),
        grid=targets.grid,
    )


def normalize_heatmaps(raw_occ, raw_cut, grid: GridSpec) -> HeatmapPair:
    """Independent min-max normalization of both maps into [0, 1].

    A constant matrix has no usable range and maps to all zeros.
    """
    maps = []
    for name, raw in (("occ", raw_occ), ("cut", raw_cut)):
        arr = np.asarray(raw, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NonFiniteInputError(f"{name} heat map contains non-finite values")
        lo = arr.min()
        span = arr.max() - lo
        if span == 0.0:
            maps.append(np.zeros_like(arr))
        else:
            maps.append((arr - lo) / span)
    return HeatmapPair(occ=maps[0], cut=maps[1], grid=grid)


def _split_cells(cut_col: np.ndarray, start: int, stop: int, t_cut: float) -> list[int]:
    """Interior cells of run [start, stop) where a new segment begins.

    The run's last cell is never a split (a qualifying mark there is only the
    closing edge of the bottom stixel). Within a plateau of adjacent qualifying
    cells the first is a closing edge, the second an opening edge, and so on
    alternately, so splits land on the plateau's 2nd, 4th, ... cells. A lone
    qualifying cell is an opening edge and splits by itself.
    """
    qualified = []
    m = cut_col.size
    for r in range(start + 1, stop - 1):
        v = cut_col[r]
        if v < t_cut:
            continue
        if r > 0 and cut_col[r - 1] > v:
            continue
        if r + 1 < m and cut_col[r + 1] > v:
            continue
        qualified.append(r)
    splits = []
    i = 0
    while i < len(qualified):
        j = i
        while (
            j + 1 < len(qualified)
            and qualified[j + 1] == qualified[j] + 1
            and cut_col[qualified[j + 1]] == cut_col[qualified[j]]
        ):
            j += 1
        plateau = qualified[i : j + 1]
        if len(plateau) == 1:
            splits.append(plateau[0])
        else:
            splits.extend(plateau[1::2])
        i = j + 1
    return splits


def decode_heatmaps(
    hm: HeatmapPair, cfg: DecodeConfig, image_width: int, image_height: int
) -> StixelWorld:
    """Threshold heat maps back into a stixel world.

    Decoded stixels are grid-aligned, uniformly typed as ground objects, and
    carry no distance.
    """
    grid = hm.grid
    if grid.image_width != image_width or grid.image_height != image_height:
        raise GridMismatchError(
            f"grid {grid.image_width}x{grid.image_height} does not match image "
            f"{image_width}x{image_height}"
        )
    s = grid.stride
    stixels: list[Stixel] = []
    for col in range(grid.cols):
        occupied = hm.occ[:, col] >= cfg.t_occ
        cut_col = hm.cut[:, col]
        r = 0
        while r < grid.rows:
            if not occupied[r]:
                r += 1
                continue
            start = r
            while r < grid.rows and occupied[r]:
                r += 1
            stop = r
            if stop - start < cfg.min_run_cells:
                continue
            bounds = [start] + _split_cells(cut_col, start, stop, cfg.t_cut) + [stop]
            for a, b in zip(bounds, bounds[1:]):
                stixels.append(
                    Stixel(
                        column=col,
                        v_top=float(a * s),
                        v_bottom=float(b * s),
                        stixel_type=StixelType.GROUND_OBJECT,
                        distance=None,
                    )
                )
    return StixelWorld(
        stixels=tuple(stixels),
        image_width=image_width,
        image_height=image_height,
        stixel_width=s,
    )
