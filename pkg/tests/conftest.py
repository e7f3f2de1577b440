import numpy as np
import pytest

from stixelforge.core import GridSpec, Stixel, StixelType, StixelWorld


@pytest.fixture
def small_grid() -> GridSpec:
    return GridSpec.for_image(width=64, height=80, stride=8)


def make_world(stixels, width=64, height=80, stride=8) -> StixelWorld:
    return StixelWorld(
        stixels=tuple(stixels), image_width=width, image_height=height, stixel_width=stride
    )


def obj(column, v_top, v_bottom, stype=StixelType.GROUND_OBJECT, distance=None) -> Stixel:
    return Stixel(column=column, v_top=float(v_top), v_bottom=float(v_bottom),
                  stixel_type=stype, distance=distance)


def random_aligned_world(rng: np.random.Generator, grid: GridSpec) -> StixelWorld:
    """World whose object stixels are grid-cell aligned and unambiguous for the
    codec round trip: touching segments both span >= 2 cells; 1-cell segments
    are isolated by at least one empty cell on each side."""
    stixels = []
    s = grid.stride
    for col in range(grid.cols):
        if rng.random() < 0.3:
            continue
        row = int(rng.integers(0, max(1, grid.rows // 3)))
        prev_span = None
        for _ in range(int(rng.integers(1, 4))):
            span = 1 if rng.random() < 0.15 else int(rng.integers(2, 6))
            gap = int(rng.integers(0, 4))
            if gap == 0 and (prev_span is None or prev_span < 2 or span < 2):
                gap = 1
            start = row + gap
            stop = start + span
            if stop > grid.rows:
                break
            stype = StixelType.GROUND_OBJECT if rng.random() < 0.7 else StixelType.SWIB_OBJECT
            distance = float(rng.uniform(1, 60)) if rng.random() < 0.8 else None
            stixels.append(obj(col, start * s, stop * s, stype, distance))
            row = stop
            prev_span = span
    return make_world(stixels, grid.image_width, grid.image_height, s)


def object_intervals(world: StixelWorld) -> set[tuple[int, float, float]]:
    return {(s.column, s.v_top, s.v_bottom) for s in world.object_stixels()}
