"""Gaussian center heatmaps: rendering objects in, decoding detections out.

A heatmap is a dense per-class grid at 1/R image resolution where each object
center contributes a Gaussian peak; cells combine by max, never by sum.
Decoding finds 3x3 local maxima above a threshold and reads the per-cell
channel maps back into detections.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .formats import Detection
from .geometry import Displacement, Point2, Size2, TrackedSizeLTRB, TrackedSizeWH

log = logging.getLogger(__name__)

DEFAULT_RENDER_THRESHOLD = 0.5  # cutoff when rendering prior detections back in
DEFAULT_OUTPUT_THRESHOLD = 0.4  # cutoff when emitting decoded detections

MIN_PEAK_OVERLAP = 0.7
RADIUS_FLOOR = 2.0

HEATMAP_MAGIC = b"HMAP"


@dataclass(frozen=True)
class GridSpec:
    """Image geometry and its downsampled grid."""

    width_px: int
    height_px: int
    downsample: int = 4
    num_classes: int = 1

    def __post_init__(self) -> None:
        if self.downsample < 1:
            raise ValueError("downsample must be >= 1")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.width_px % self.downsample or self.height_px % self.downsample:
            raise ValueError(
                f"image size {self.width_px}x{self.height_px} not divisible by {self.downsample}"
            )

    @property
    def grid_w(self) -> int:
        return self.width_px // self.downsample

    @property
    def grid_h(self) -> int:
        return self.height_px // self.downsample


@dataclass
class Heatmap:
    """Per-class confidence grid, values in [0, 1], shape (classes, rows, cols)."""

    values: np.ndarray


@dataclass
class ChannelMaps:
    """Per-cell regression outputs aligned with a heatmap grid.

    ``size_map`` (rows, cols, 2) holds box sizes in pixels, ``displacement_map``
    (rows, cols, 2) the back-projection vectors, ``tracked_size_map`` either
    (rows, cols, 2) for the wh variant or (rows, cols, 4) for ltrb, and
    ``iou_map`` (rows, cols) the predicted adjacent-frame IOU in [0, 1].
    """

    size_map: np.ndarray
    displacement_map: np.ndarray
    tracked_size_map: np.ndarray
    iou_map: np.ndarray

    @property
    def variant(self) -> str:
        return "wh" if self.tracked_size_map.shape[-1] == 2 else "ltrb"


@dataclass(frozen=True)
class Peak:
    """A 3x3 local maximum; ``cell`` is (x, y) in grid coordinates."""

    cell: tuple[int, int]
    class_id: int
    confidence: float


def empty_channel_maps(grid: GridSpec, variant: str = "ltrb") -> ChannelMaps:
    """All-zero channel maps matching ``grid``."""
    shape = (grid.grid_h, grid.grid_w)
    n_ts = 2 if variant == "wh" else 4
    return ChannelMaps(
        size_map=np.zeros(shape + (2,)),
        displacement_map=np.zeros(shape + (2,)),
        tracked_size_map=np.zeros(shape + (n_ts,)),
        iou_map=np.zeros(shape),
    )


def _min_overlap_radius(w: float, h: float, min_overlap: float = MIN_PEAK_OVERLAP) -> float:
    # Smallest of the three quadratic-root radii that keep any box shifted or
    # shrunk within the radius above the overlap requirement.
    a1 = 1.0
    b1 = h + w
    c1 = w * h * (1 - min_overlap) / (1 + min_overlap)
    r1 = (b1 + math.sqrt(b1 * b1 - 4 * a1 * c1)) / 2

    a2 = 4.0
    b2 = 2 * (h + w)
    c2 = (1 - min_overlap) * w * h
    r2 = (b2 + math.sqrt(b2 * b2 - 4 * a2 * c2)) / 2

    a3 = 4 * min_overlap
    b3 = -2 * min_overlap * (h + w)
    c3 = (min_overlap - 1) * w * h
    r3 = (b3 + math.sqrt(b3 * b3 - 4 * a3 * c3)) / 2
    return min(r1, r2, r3)


def gaussian_sigma(s: Size2) -> float:
    """Kernel width for an object of grid-unit size ``s``.

    One third of the min-overlap radius, with the radius floored at 2 grid
    units so tiny objects still render a usable peak.
    """
    radius = max(RADIUS_FLOOR, _min_overlap_radius(s.w, s.h))
    return radius / 3.0


def render_heatmap(
    objects: Iterable[tuple[Point2, Size2, int]], grid: GridSpec
) -> Heatmap:
    """Render object centers as Gaussian peaks, one channel per class.

    Each cell q of a class channel holds ``max_i exp(-|p_i - q|^2 / (2 sigma_i^2))``
    over that class's objects, with centers converted to grid units. Objects
    with centers outside the image are skipped and counted in a warning.
    """
    values = np.zeros((grid.num_classes, grid.grid_h, grid.grid_w))
    xs = np.arange(grid.grid_w, dtype=float)[None, :]
    ys = np.arange(grid.grid_h, dtype=float)[:, None]
    r = float(grid.downsample)
    skipped = 0
    for center, size, class_id in objects:
        if not (0 <= center.x < grid.width_px and 0 <= center.y < grid.height_px):
            skipped += 1
            continue
        if not 0 <= class_id < grid.num_classes:
            raise ValueError(f"class_id {class_id} outside [0, {grid.num_classes})")
        gx, gy = center.x / r, center.y / r
        sigma = gaussian_sigma(Size2(size.w / r, size.h / r))
        d2 = (xs - gx) ** 2 + (ys - gy) ** 2
        np.maximum(values[class_id], np.exp(-d2 / (2.0 * sigma * sigma)), out=values[class_id])
    if skipped:
        log.warning("render_heatmap: skipped %d object(s) with out-of-bounds centers", skipped)
    return Heatmap(values)


def _window_max3(plane: np.ndarray) -> np.ndarray:
    # Max over each cell's 3x3 neighborhood, clipped at the borders.
    padded = np.pad(plane, 1, constant_values=-np.inf)
    out = plane.copy()
    h, w = plane.shape
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            np.maximum(out, padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w], out=out)
    return out


def _dedupe_plateaus(plane: np.ndarray, candidates: np.ndarray) -> list[tuple[int, int]]:
    # One peak per connected (8-neighbor) plateau of equal-valued candidates;
    # the first cell in row-major order is the component's representative.
    cand_cells = [tuple(c) for c in np.argwhere(candidates)]
    cand_set = set(cand_cells)
    visited: set[tuple[int, int]] = set()
    keep: list[tuple[int, int]] = []
    for cell in cand_cells:
        if cell in visited:
            continue
        keep.append(cell)
        stack = [cell]
        visited.add(cell)
        value = plane[cell]
        while stack:
            cy, cx = stack.pop()
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    nb = (cy + dy, cx + dx)
                    if nb in cand_set and nb not in visited and plane[nb] == value:
                        visited.add(nb)
                        stack.append(nb)
    return keep


def extract_peaks(heatmap: Heatmap, threshold: float) -> list[Peak]:
    """All cells maximal in their 3x3 neighborhood with value above ``threshold``.

    Flat maxima yield a single peak (the row-major-first cell of the plateau).
    Peaks are sorted by descending confidence, then class and cell for
    determinism.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold outside [0, 1]: {threshold}")
    peaks: list[Peak] = []
    for class_id in range(heatmap.values.shape[0]):
        plane = heatmap.values[class_id]
        candidates = (plane >= _window_max3(plane)) & (plane > threshold)
        for cy, cx in _dedupe_plateaus(plane, candidates):
            peaks.append(Peak(cell=(int(cx), int(cy)), class_id=class_id, confidence=float(plane[cy, cx])))
    peaks.sort(key=lambda p: (-p.confidence, p.class_id, p.cell[1], p.cell[0]))
    return peaks


def decode_detections(
    peaks: Sequence[Peak],
    maps: ChannelMaps,
    grid: GridSpec,
    out_threshold: float = DEFAULT_OUTPUT_THRESHOLD,
    frame: int = 1,
) -> list[Detection]:
    """Read channel maps at peak cells and build pixel-space detections."""
    expected = (grid.grid_h, grid.grid_w)
    for name in ("size_map", "displacement_map", "tracked_size_map", "iou_map"):
        arr = getattr(maps, name)
        if arr.shape[:2] != expected:
            raise ValueError(f"{name} shape {arr.shape} does not match grid {expected}")
    r = float(grid.downsample)
    dets: list[Detection] = []
    for p in peaks:
        if p.confidence <= out_threshold:
            continue
        x, y = p.cell
        w, h = (float(v) for v in maps.size_map[y, x])
        dx, dy = (float(v) for v in maps.displacement_map[y, x])
        ts_vals = [float(v) for v in maps.tracked_size_map[y, x]]
        ts = TrackedSizeWH(*ts_vals) if len(ts_vals) == 2 else TrackedSizeLTRB(*ts_vals)
        dets.append(
            Detection(
                frame=frame,
                center=Point2(x * r, y * r),
                size=Size2(max(0.0, w), max(0.0, h)),
                confidence=p.confidence,
                class_id=p.class_id,
                disp=Displacement(dx, dy),
                tracked_size=ts,
                iou_pred=float(np.clip(maps.iou_map[y, x], 0.0, 1.0)),
            )
        )
    return dets


def write_heatmap(heatmap: Heatmap, stream: BinaryIO) -> None:
    """Dump a heatmap: 16-byte header (magic, cols, rows, classes) then f32 cells.

    Cells are little-endian 32-bit floats in (class, row, col) order.
    """
    c, rows, cols = heatmap.values.shape
    stream.write(struct.pack("<4sIII", HEATMAP_MAGIC, cols, rows, c))
    stream.write(np.ascontiguousarray(heatmap.values, dtype="<f4").tobytes())


def read_heatmap(stream: BinaryIO) -> Heatmap:
    """Read a heatmap dump written by :func:`write_heatmap`."""
    header = stream.read(16)
    if len(header) != 16:
        raise ValueError("truncated heatmap header")
    magic, cols, rows, c = struct.unpack("<4sIII", header)
    if magic != HEATMAP_MAGIC:
        raise ValueError(f"bad magic: {magic!r}")
    payload = stream.read(4 * cols * rows * c)
    if len(payload) != 4 * cols * rows * c:
        raise ValueError("truncated heatmap payload")
    values = np.frombuffer(payload, dtype="<f4").astype(float).reshape(c, rows, cols)
    return Heatmap(values)
