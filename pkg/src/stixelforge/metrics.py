"""Evaluation: 1D IoU matching of stixels with precision/recall/F1, threshold
sweeps over decoded heat maps, and the per-column free-space score."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codec import DecodeConfig, decode_heatmaps
from .core import HeatmapPair, Stixel, StixelWorld
from .errors import (
    ColumnMismatchError,
    GridMismatchError,
    InvariantViolation,
    LengthMismatchError,
)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def _f1(precision: float, recall: float) -> float:
    return _safe_div(2.0 * precision * recall, precision + recall)


@dataclass(frozen=True)
class MatchReport:
    """Counts and derived rates of one ground-truth/prediction matching.

    `threshold` is the decode threshold that produced the predictions; it is
    None for reports on externally supplied worlds.
    """

    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float
    threshold: float | None = None

    @staticmethod
    def from_counts(tp: int, fp: int, fn: int, threshold: float | None = None) -> "MatchReport":
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        return MatchReport(tp, fp, fn, precision, recall, _f1(precision, recall), threshold)


@dataclass(frozen=True)
class FreespaceReport:
    """Per-column free-space accuracy of one frame.

    score is the arithmetic mean of per_column, sigma their population
    standard deviation; both in percent.
    """

    score: float
    sigma: float
    per_column: tuple[float, ...]


def stixel_iou(a: Stixel, b: Stixel) -> float:
    """1D intersection over union of two same-column stixels' row intervals."""
    if a.column != b.column:
        raise ColumnMismatchError(f"columns differ: {a.column} vs {b.column}")
    inter = max(0.0, min(a.v_bottom, b.v_bottom) - max(a.v_top, b.v_top))
    union = (a.v_bottom - a.v_top) + (b.v_bottom - b.v_top) - inter
    return inter / union


def match_worlds(gt: StixelWorld, pred: StixelWorld, iou_min: float = 0.5) -> MatchReport:
    """Greedy ground-truth-driven matching of object stixels per column.

    Each ground-truth stixel (scanned top-down) claims the unclaimed
    prediction in its column with the highest IoU, ties broken by the smaller
    prediction top row; a claim requires IoU >= iou_min. Unmatched ground
    truth counts as a false negative, every unclaimed prediction as a false
    positive, so TP+FN equals the ground-truth count and TP+FP the prediction
    count.
    """
    if (
        gt.image_width != pred.image_width
        or gt.image_height != pred.image_height
        or gt.stixel_width != pred.stixel_width
    ):
        raise GridMismatchError("worlds disagree on image dimensions or stride")
    tp = fp = fn = 0
    pred_by_col: dict[int, list[Stixel]] = {}
    for st in pred.object_stixels():
        pred_by_col.setdefault(st.column, []).append(st)
    gt_by_col: dict[int, list[Stixel]] = {}
    for st in gt.object_stixels():
        gt_by_col.setdefault(st.column, []).append(st)
    for col, gt_sts in gt_by_col.items():
        candidates = pred_by_col.get(col, [])
        claimed = [False] * len(candidates)
        for gt_st in sorted(gt_sts, key=lambda s: s.v_top):
            best_idx = -1
            best = (-1.0, math.inf)  # (iou, v_top) with iou maximized, v_top minimized
            for i, cand in enumerate(candidates):
                if claimed[i]:
                    continue
                iou = stixel_iou(gt_st, cand)
                if iou > best[0] or (iou == best[0] and cand.v_top < best[1]):
                    best = (iou, cand.v_top)
                    best_idx = i
            if best_idx >= 0 and best[0] >= iou_min:
                claimed[best_idx] = True
                tp += 1
            else:
                fn += 1
    fp = sum(len(sts) for sts in pred_by_col.values()) - tp
    return MatchReport.from_counts(tp, fp, fn)


@dataclass(frozen=True)
class SweepPoint:
    """Aggregate matching quality of one decode threshold over a frame set."""

    threshold: float
    precision: float
    recall: float
    f1: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    true_positives: int
    false_positives: int
    false_negatives: int


def pr_sweep(
    gt_worlds: Sequence[StixelWorld],
    heatmaps: Sequence[HeatmapPair],
    thresholds: Sequence[float],
    decode_cfg: DecodeConfig,
    iou_min: float = 0.5,
) -> list[SweepPoint]:
    """Decode every frame at each occupancy threshold and aggregate matches.

    Micro rates pool the counts over frames; macro rates average the per-frame
    precision/recall/F1. The cut threshold stays fixed at decode_cfg.t_cut.
    """
    if len(gt_worlds) != len(heatmaps):
        raise LengthMismatchError(
            f"{len(gt_worlds)} ground-truth worlds vs {len(heatmaps)} heat maps"
        )
    points = []
    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise InvariantViolation(f"threshold {t} outside [0, 1]")
        cfg = DecodeConfig(t_occ=float(t), t_cut=decode_cfg.t_cut, min_run_cells=decode_cfg.min_run_cells)
        reports = []
        for gt, hm in zip(gt_worlds, heatmaps):
            pred = decode_heatmaps(hm, cfg, gt.image_width, gt.image_height)
            reports.append(match_worlds(gt, pred, iou_min))
        tp = sum(r.true_positives for r in reports)
        fp = sum(r.false_positives for r in reports)
        fn = sum(r.false_negatives for r in reports)
        micro = MatchReport.from_counts(tp, fp, fn, threshold=float(t))
        n = len(reports)
        points.append(
            SweepPoint(
                threshold=float(t),
                precision=micro.precision,
                recall=micro.recall,
                f1=micro.f1,
                precision_macro=_safe_div(sum(r.precision for r in reports), n),
                recall_macro=_safe_div(sum(r.recall for r in reports), n),
                f1_macro=_safe_div(sum(r.f1 for r in reports), n),
                true_positives=tp,
                false_positives=fp,
                false_negatives=fn,
            )
        )
    return points


def best_operating_point(points: Sequence[SweepPoint]) -> SweepPoint:
    """Sweep record with the highest micro F1; first such record on ties."""
    if not points:
        raise InvariantViolation("cannot pick an operating point from an empty sweep")
    best = points[0]
    for p in points[1:]:
        if p.f1 > best.f1:
            best = p
    return best


def bottom_contact_per_column(world: StixelWorld) -> list[float | None]:
    """Lowest object row per image-pixel column; None where a column has no object."""
    grid_contact: dict[int, float] = {}
    for st in world.object_stixels():
        prev = grid_contact.get(st.column)
        if prev is None or st.v_bottom > prev:
            grid_contact[st.column] = st.v_bottom
    contacts: list[float | None] = [None] * world.image_width
    for col, row in grid_contact.items():
        for u in range(col * world.stixel_width, min((col + 1) * world.stixel_width, world.image_width)):
            contacts[u] = row
    return contacts


def freespace_score(
    gt_contacts: Sequence[float | None],
    pred_contacts: Sequence[float | None],
    image_height: int,
) -> FreespaceReport:
    """Per-column free-space accuracy in percent.

    A column earns one point per pixel from the image top down to the
    ground-truth contact row and is penalized by the pixel error of the
    prediction; a missing prediction costs the full image height, capped at
    the earnable points. Columns without ground truth or with a zero contact
    row are skipped.
    """
    if len(gt_contacts) != len(pred_contacts):
        raise LengthMismatchError(
            f"{len(gt_contacts)} ground-truth columns vs {len(pred_contacts)} predicted"
        )
    per_column: list[float] = []
    for gt_row, pred_row in zip(gt_contacts, pred_contacts):
        if gt_row is None or gt_row == 0:
            continue
        if not 0 <= gt_row <= image_height:
            raise InvariantViolation(f"ground-truth contact row {gt_row} outside the image")
        points = float(gt_row)
        if pred_row is None:
            penalty = min(float(image_height), points)
        else:
            if not 0 <= pred_row <= image_height:
                raise InvariantViolation(f"predicted contact row {pred_row} outside the image")
            penalty = abs(float(pred_row) - points)
        per_column.append(max(0.0, points - penalty) / points * 100.0)
    if not per_column:
        return FreespaceReport(score=0.0, sigma=0.0, per_column=())
    arr = np.asarray(per_column)
    return FreespaceReport(
        score=float(arr.mean()),
        sigma=float(arr.std()),
        per_column=tuple(per_column),
    )


def summarize_freespace(reports: Sequence[FreespaceReport]) -> tuple[float, float]:
    """Multi-frame aggregate: mean of the per-frame scores and mean of the
    per-frame standard deviations."""
    if not reports:
        return 0.0, 0.0
    score = sum(r.score for r in reports) / len(reports)
    sigma = sum(r.sigma for r in reports) / len(reports)
    return score, sigma
