"""Cost matrices and greedy identity assignment between detections and tracklets.

Costs are plain float matrices with rows = detections and columns =
tracklets; cells that must never match hold :data:`INADMISSIBLE` (infinity).
Matching is greedy per detection in confidence order, which is deliberately
order-dependent; optimal assignment lives on the evaluation side only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .formats import Detection, VARIANT_LTRB, VARIANT_WH
from .geometry import (
    BoxLTRB,
    TrackedSizeLTRB,
    TrackedSizeWH,
    iou,
    size_gate,
    tracked_box_ltrb,
    tracked_box_wh,
)

if TYPE_CHECKING:
    from .tracker import Tracklet

INADMISSIBLE = math.inf

FILTER_RATIONALE = "rationale"  # drop pairs with tracked IOU below predicted adjacent IOU
FILTER_COST = "cost"            # drop pairs whose IOU distance exceeds the predicted IOU
FILTER_FORMS = (FILTER_RATIONALE, FILTER_COST)


class Strategy(enum.Enum):
    """Which cost matrices drive association, and in what order."""

    DIS = "dis"
    IOU = "iou"
    COMBINED = "combined"
    IOU_THEN_DIS = "iou-dis"
    DIS_THEN_IOU = "dis-iou"


@dataclass
class AssociationResult:
    """Matched (detection, tracklet) index pairs plus both leftovers.

    Matches are in processing order; unmatched index lists are ascending.
    Together the three collections partition both index sets.
    """

    matches: list[tuple[int, int]]
    unmatched_detections: list[int]
    unmatched_tracklets: list[int]


def tracked_box(det: Detection, variant: str) -> BoxLTRB:
    """Previous-frame box regressed from a detection, per parameterization."""
    if variant == VARIANT_WH:
        if not isinstance(det.tracked_size, TrackedSizeWH):
            raise ValueError("detection does not carry wh tracked-size values")
        return tracked_box_wh(det.center, det.size, det.disp, det.tracked_size)
    if variant == VARIANT_LTRB:
        if not isinstance(det.tracked_size, TrackedSizeLTRB):
            raise ValueError("detection does not carry ltrb tracked-size values")
        return tracked_box_ltrb(det.tracked_size)
    raise ValueError(f"unknown variant: {variant!r}")


def displacement_cost(dets: Sequence[Detection], tracks: Sequence["Tracklet"]) -> np.ndarray:
    """Euclidean distance between back-projected centers and tracklet centers.

    A cell is inadmissible when the distance exceeds the detection's size
    gate (sqrt of its box area) or the classes differ.
    """
    cost = np.full((len(dets), len(tracks)), INADMISSIBLE)
    for i, d in enumerate(dets):
        bx = d.center.x - d.disp.dx
        by = d.center.y - d.disp.dy
        gate = size_gate(d.size)
        for j, t in enumerate(tracks):
            if d.class_id != t.class_id:
                continue
            dist = math.hypot(bx - t.last_center.x, by - t.last_center.y)
            if dist <= gate:
                cost[i, j] = dist
    return cost


def iou_cost(
    dets: Sequence[Detection],
    tracks: Sequence["Tracklet"],
    variant: str,
    filter_form: str = FILTER_RATIONALE,
) -> np.ndarray:
    """1 - IOU between each tracklet's last box and each detection's tracked box.

    The predicted adjacent-frame IOU gates admissibility: under the default
    rationale form a pair is dropped when the tracked IOU falls below the
    prediction; under the cost form when 1 - IOU exceeds it. Zero-overlap
    pairs and class mismatches are always inadmissible.
    """
    if filter_form not in FILTER_FORMS:
        raise ValueError(f"unknown filter form: {filter_form!r}")
    cost = np.full((len(dets), len(tracks)), INADMISSIBLE)
    for i, d in enumerate(dets):
        tb = tracked_box(d, variant)
        for j, t in enumerate(tracks):
            if d.class_id != t.class_id:
                continue
            overlap = iou(t.last_box, tb)
            if overlap <= 0.0:
                continue
            if filter_form == FILTER_RATIONALE:
                admissible = overlap >= d.iou_pred
            else:
                admissible = (1.0 - overlap) <= d.iou_pred
            if admissible:
                cost[i, j] = 1.0 - overlap
    return cost


def combine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cellwise sum; inadmissible cells absorb."""
    if a.shape != b.shape:
        raise ValueError(f"cost matrix shapes differ: {a.shape} vs {b.shape}")
    return a + b


def confidence_order(dets: Sequence[Detection]) -> list[int]:
    """Detection indices by descending confidence, ties by lower index."""
    return sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))


def greedy_match(cost: np.ndarray, det_order: Sequence[int]) -> AssociationResult:
    """Assign each detection, in the given order, its cheapest free tracklet.

    Ties go to the lowest tracklet index; detections with no admissible free
    tracklet stay unmatched.
    """
    n_det, n_trk = cost.shape
    if sorted(det_order) != list(range(n_det)):
        raise ValueError("det_order is not a permutation of detection indices")
    taken = [False] * n_trk
    matches: list[tuple[int, int]] = []
    unmatched_dets: list[int] = []
    for i in det_order:
        best_j = -1
        best = INADMISSIBLE
        for j in range(n_trk):
            if not taken[j] and cost[i, j] < best:
                best = cost[i, j]
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            matches.append((i, best_j))
        else:
            unmatched_dets.append(i)
    unmatched_dets.sort()
    unmatched_trks = [j for j in range(n_trk) if not taken[j]]
    return AssociationResult(matches, unmatched_dets, unmatched_trks)


def _build_matrix(
    which: str,
    dets: Sequence[Detection],
    tracks: Sequence["Tracklet"],
    variant: str,
    filter_form: str,
) -> np.ndarray:
    if which == "dis":
        return displacement_cost(dets, tracks)
    return iou_cost(dets, tracks, variant, filter_form)


def associate(
    strategy: Strategy,
    dets: Sequence[Detection],
    tracks: Sequence["Tracklet"],
    variant: str,
    filter_form: str = FILTER_RATIONALE,
) -> AssociationResult:
    """Run the chosen matching strategy and return the frame's assignment.

    Single-matrix strategies run one greedy round. Sequential strategies run
    a second round on a fresh matrix built only from the first round's
    leftovers, each matrix keeping its native admissibility gate.
    """
    order = confidence_order(dets)
    if strategy is Strategy.DIS:
        return greedy_match(displacement_cost(dets, tracks), order)
    if strategy is Strategy.IOU:
        return greedy_match(iou_cost(dets, tracks, variant, filter_form), order)
    if strategy is Strategy.COMBINED:
        combined = combine(
            displacement_cost(dets, tracks), iou_cost(dets, tracks, variant, filter_form)
        )
        return greedy_match(combined, order)

    first, second = ("iou", "dis") if strategy is Strategy.IOU_THEN_DIS else ("dis", "iou")
    round1 = greedy_match(_build_matrix(first, dets, tracks, variant, filter_form), order)

    sub_dets = [dets[i] for i in round1.unmatched_detections]
    sub_tracks = [tracks[j] for j in round1.unmatched_tracklets]
    round2 = greedy_match(
        _build_matrix(second, sub_dets, sub_tracks, variant, filter_form),
        confidence_order(sub_dets),
    )

    det_map = round1.unmatched_detections
    trk_map = round1.unmatched_tracklets
    matches = round1.matches + [(det_map[i], trk_map[j]) for i, j in round2.matches]
    return AssociationResult(
        matches=matches,
        unmatched_detections=sorted(det_map[i] for i in round2.unmatched_detections),
        unmatched_tracklets=sorted(trk_map[j] for j in round2.unmatched_tracklets),
    )
