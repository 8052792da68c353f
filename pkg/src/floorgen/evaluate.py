"""Geometric and topological floorplan metrics.

Pixel precision/recall at metric margins, area-weighted room IoU, Betti
error and topology-preserving warping error, all computed on a shared
raster frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import FrameMismatch
from .floorplan import Floorplan, RasterFrame, Room, draw_segment, fill_polygon

DEFAULT_MARGINS = (0.02, 0.05, 0.10)


@dataclass
class BitRaster:
    bits: np.ndarray
    origin: np.ndarray
    resolution: float

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def frame(self) -> RasterFrame:
        return RasterFrame(np.asarray(self.origin), self.resolution, self.bits.shape)

    @classmethod
    def empty(cls, frame: RasterFrame) -> "BitRaster":
        return cls(np.zeros(frame.shape, dtype=bool), np.asarray(frame.origin, dtype=np.float64), frame.resolution)


def _check_frame(a: BitRaster, b: BitRaster) -> None:
    if a.bits.shape != b.bits.shape or a.resolution != b.resolution or not np.array_equal(a.origin, b.origin):
        raise FrameMismatch("rasters do not share frame and resolution")


def shared_frame(plans: Sequence[Floorplan], resolution: float = 0.01, pad: float = 0.25) -> RasterFrame:
    pts = [fp.all_points() for fp in plans]
    pts = np.concatenate(pts) if pts else np.zeros((0, 2))
    if len(pts) == 0:
        pts = np.zeros((1, 2))
    return RasterFrame.covering(pts, resolution, pad_px=int(math.ceil(pad / resolution)))


def rasterize_lines(fp: Floorplan, frame: RasterFrame) -> BitRaster:
    """Draw every wall fold, door closure and stair line as a 1-pixel stroke."""
    r = BitRaster.empty(frame)
    for w in fp.walls:
        for ln in (w.inner, w.outer):
            draw_segment(r.bits, frame, ln.start, ln.end)
    for s in fp.door_segments():
        draw_segment(r.bits, frame, s[0], s[1])
    for run in fp.stairs:
        for a, b in np.asarray(run).reshape(-1, 2, 2):
            draw_segment(r.bits, frame, a, b)
    return r


def rasterize_room(room: Room, frame: RasterFrame) -> np.ndarray:
    mask = np.zeros(frame.shape, dtype=bool)
    fill_polygon(mask, frame, room.exterior)
    for h in room.holes:
        fill_polygon(mask, frame, h, value=False)
    return mask


def rooms_mask(rooms: Sequence[Room], frame: RasterFrame) -> BitRaster:
    r = BitRaster.empty(frame)
    for room in rooms:
        r.bits |= rasterize_room(room, frame)
    return r


def precision_recall(pred: BitRaster, gt: BitRaster,
                     margins: Sequence[float] = DEFAULT_MARGINS) -> Dict[float, Tuple[float, float]]:
    """``{margin: (precision, recall)}`` using exact Euclidean distance transforms."""
    _check_frame(pred, gt)

    def frac_within(src: np.ndarray, dst: np.ndarray) -> Dict[float, float]:
        if not src.any():
            return {m: (1.0 if not dst.any() else 0.0) for m in margins}
        if not dst.any():
            return {m: 0.0 for m in margins}
        dist = ndimage.distance_transform_edt(~dst)[src]
        return {m: float(np.count_nonzero(dist <= m / pred.resolution + 1e-9)) / dist.size for m in margins}

    p = frac_within(pred.bits, gt.bits)
    r = frac_within(gt.bits, pred.bits)
    return {m: (p[m], r[m]) for m in margins}


def room_iou(pred_rooms: Sequence[Room], gt_rooms: Sequence[Room], frame: RasterFrame) -> float:
    """Area-weighted mean IoU over ground-truth rooms after greedy one-to-one matching."""
    if not gt_rooms:
        return 1.0 if not pred_rooms else 0.0
    if not pred_rooms:
        return 0.0
    gm = [rasterize_room(r, frame) for r in gt_rooms]
    pm = [rasterize_room(r, frame) for r in pred_rooms]
    areas = np.array([m.sum() for m in gm], dtype=np.float64)
    iou = np.zeros((len(gm), len(pm)))
    for i, g in enumerate(gm):
        for j, p in enumerate(pm):
            inter = np.count_nonzero(g & p)
            if inter:
                iou[i, j] = inter / np.count_nonzero(g | p)
    return greedy_weighted_iou(iou, areas)


def greedy_weighted_iou(iou: np.ndarray, gt_areas: np.ndarray) -> float:
    pairs = sorted(((-iou[i, j], i, j) for i in range(iou.shape[0]) for j in range(iou.shape[1])
                    if iou[i, j] > 0))
    used_g, used_p = set(), set()
    best = np.zeros(iou.shape[0])
    for neg, i, j in pairs:
        if i in used_g or j in used_p:
            continue
        used_g.add(i)
        used_p.add(j)
        best[i] = -neg
    total = gt_areas.sum()
    return float((gt_areas * best).sum() / total) if total > 0 else 0.0


_FG8 = np.ones((3, 3), dtype=bool)


def betti_numbers(mask: np.ndarray) -> Tuple[int, int]:
    """``(b0, b1)``: 8-connected foreground components and 4-connected enclosed background components."""
    mask = np.asarray(mask, dtype=bool)
    _, b0 = ndimage.label(mask, structure=_FG8)
    bg, nb = ndimage.label(np.pad(~mask, 1, constant_values=True))
    # the padded border belongs to exactly one background component
    b1 = nb - 1 if nb else 0
    return int(b0), int(b1)


def betti_error(pred: BitRaster, gt: BitRaster) -> float:
    _check_frame(pred, gt)
    p0, p1 = betti_numbers(pred.bits)
    g0, g1 = betti_numbers(gt.bits)
    return float(abs(p0 - g0) + abs(p1 - g1))


# neighbour order: N, NE, E, SE, S, SW, W, NW as (drow, dcol)
_NBRS = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]


def _count_components(cells, adjacent) -> List[set]:
    cells = set(cells)
    comps = []
    while cells:
        stack = [cells.pop()]
        comp = set(stack)
        while stack:
            c = stack.pop()
            for o in list(cells):
                if adjacent(c, o):
                    cells.remove(o)
                    comp.add(o)
                    stack.append(o)
        comps.append(comp)
    return comps


def _simple_lut() -> np.ndarray:
    """Simple-point table for (8, 4) topology indexed by the 8-neighbour bit code."""
    adj8 = lambda a, b: max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1  # noqa: E731
    adj4 = lambda a, b: abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1  # noqa: E731
    lut = np.zeros(256, dtype=bool)
    for code in range(256):
        fg = [_NBRS[k] for k in range(8) if code >> k & 1]
        bg = [_NBRS[k] for k in range(8) if not code >> k & 1]
        t8 = len(_count_components(fg, adj8))
        t4 = sum(1 for comp in _count_components(bg, adj4)
                 if any(abs(c[0]) + abs(c[1]) == 1 for c in comp))
        lut[code] = t8 == 1 and t4 == 1
    return lut


SIMPLE_LUT = _simple_lut()


def neighbour_codes(mask: np.ndarray) -> np.ndarray:
    p = np.pad(mask, 1).astype(np.uint8)
    h, w = mask.shape
    code = np.zeros((h, w), dtype=np.uint8)
    for k, (dr, dc) in enumerate(_NBRS):
        code |= p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] << k
    return code


def simple_points(mask: np.ndarray) -> np.ndarray:
    return SIMPLE_LUT[neighbour_codes(mask)]


def warp_toward(gt: np.ndarray, pred: np.ndarray, max_warp: int = 10) -> np.ndarray:
    """Flip disagreeing simple pixels of ``gt`` toward ``pred`` for up to ``max_warp`` passes.

    Each pass sweeps the four 2x2 parity subfields; pixels in one subfield are
    never 8-adjacent, so flipping them together equals flipping them one by one.
    """
    cur = np.array(gt, dtype=bool, copy=True)
    pred = np.asarray(pred, dtype=bool)
    if not (cur != pred).any():
        return cur
    rows, cols = np.nonzero(cur != pred)
    r0, r1 = max(rows.min() - 2, 0), min(rows.max() + 3, cur.shape[0])
    c0, c1 = max(cols.min() - 2, 0), min(cols.max() + 3, cur.shape[1])
    # work on the disagreement bounding box plus a frame; outside pixels never change
    big = np.pad(cur, 1)
    win = big[r0:r1 + 2, c0:c1 + 2]
    pwin = np.pad(pred, 1)[r0:r1 + 2, c0:c1 + 2]
    rr, cc = np.indices(win.shape)
    interior = np.zeros(win.shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    parity = [(interior & (((rr + r0) % 2) == a) & (((cc + c0) % 2) == b)) for a in (0, 1) for b in (0, 1)]
    for _ in range(max_warp):
        changed = False
        for sub in parity:
            flip = (win != pwin) & sub
            if not flip.any():
                continue
            flip &= _simple_padded(win)
            if flip.any():
                win[flip] = ~win[flip]
                changed = True
        if not changed:
            break
    big[r0:r1 + 2, c0:c1 + 2] = win
    return big[1:-1, 1:-1]


def _simple_padded(win: np.ndarray) -> np.ndarray:
    """Simple-point mask of ``win`` (border row/col kept False)."""
    h, w = win.shape
    code = np.zeros((h - 2, w - 2), dtype=np.uint8)
    p = win.astype(np.uint8)
    for k, (dr, dc) in enumerate(_NBRS):
        code |= p[1 + dr:h - 1 + dr, 1 + dc:w - 1 + dc] << k
    out = np.zeros(win.shape, dtype=bool)
    out[1:-1, 1:-1] = SIMPLE_LUT[code]
    return out


def warping_error(pred: BitRaster, gt: BitRaster, max_warp: int = 10) -> float:
    _check_frame(pred, gt)
    warped = warp_toward(gt.bits, pred.bits, max_warp)
    return float(np.count_nonzero(warped != pred.bits)) / pred.bits.size


@dataclass
class EvalConfig:
    resolution: float = 0.01
    margins: tuple = DEFAULT_MARGINS
    max_warp: int = 10


@dataclass
class EvalReport:
    precision: Dict[float, float] = field(default_factory=dict)
    recall: Dict[float, float] = field(default_factory=dict)
    room_iou: float = 0.0
    warping_error: float = 0.0
    betti_error: float = 0.0

    def to_json(self) -> dict:
        key = lambda m: f"{m:.2f}"  # noqa: E731
        return {
            "precision": {key(m): v for m, v in self.precision.items()},
            "recall": {key(m): v for m, v in self.recall.items()},
            "iou": self.room_iou,
            "warping_error": self.warping_error,
            "betti_error": self.betti_error,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def table(self, name: str = "pred") -> str:
        """Header and one row laid out like a leaderboard table."""
        ms = sorted(self.precision)
        head = ["Method"] + [f"Prec. ({m * 100:g}cm)" for m in ms] + [f"Rec. ({m * 100:g}cm)" for m in ms] + \
               ["IoU", "Warping Error", "Betti Error"]
        row = [name] + [f"{100 * self.precision[m]:.2f}%" for m in ms] + \
              [f"{100 * self.recall[m]:.2f}%" for m in ms] + \
              [f"{100 * self.room_iou:.2f}%", f"{self.warping_error:.3f}", f"{self.betti_error:.3f}"]
        return "\t".join(head) + "\n" + "\t".join(row) + "\n"


def evaluate_pair(pred: Floorplan, gt: Floorplan, config: EvalConfig = EvalConfig()) -> EvalReport:
    frame = shared_frame([pred, gt], config.resolution)
    pr = precision_recall(rasterize_lines(pred, frame), rasterize_lines(gt, frame), config.margins)
    pm, gm = rooms_mask(pred.rooms, frame), rooms_mask(gt.rooms, frame)
    return EvalReport(
        precision={m: pr[m][0] for m in config.margins},
        recall={m: pr[m][1] for m in config.margins},
        room_iou=room_iou(pred.rooms, gt.rooms, frame),
        warping_error=warping_error(pm, gm, config.max_warp),
        betti_error=betti_error(pm, gm),
    )
