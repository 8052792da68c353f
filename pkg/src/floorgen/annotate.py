"""Per-point semantic labels from 2D drawing polylines or an external label file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .errors import FrameMismatch, LengthMismatch, OutOfRangeLabel, ParseError
from .pcio import N_CLASSES, LabeledPointCloud, SemanticClass
from .preprocess import FloorCeilingLevels

DRAWING_CLASSES = ("wall", "door", "stair")


@dataclass
class DrawingSet:
    """Polylines per class (``wall``, ``door``, ``stair``) in the normalized frame."""

    polylines: Dict[str, List[np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for cls, lines in self.polylines.items():
            if cls not in DRAWING_CLASSES:
                raise ValueError(f"unknown drawing class {cls!r}")
            out = []
            for pl in lines:
                pl = np.asarray(pl, dtype=np.float64).reshape(-1, 2)
                if len(pl) < 2:
                    raise ValueError("polyline needs at least 2 vertices")
                if np.any(np.all(np.diff(pl, axis=0) == 0, axis=1)):
                    raise ValueError("polyline has consecutive duplicate vertices")
                out.append(pl)
            clean[cls] = out
        self.polylines = clean

    def segments(self, cls: str) -> np.ndarray:
        """All segments of a class as an ``(M, 2, 2)`` array."""
        segs = [np.stack([pl[:-1], pl[1:]], axis=1) for pl in self.polylines.get(cls, [])]
        return np.concatenate(segs) if segs else np.zeros((0, 2, 2))

    def bounds(self):
        pts = [pl for lines in self.polylines.values() for pl in lines]
        if not pts:
            return None
        allp = np.concatenate(pts)
        return allp.min(axis=0), allp.max(axis=0)

    def transformed(self, fn) -> "DrawingSet":
        return DrawingSet({c: [fn(pl) for pl in lines] for c, lines in self.polylines.items()})

    @classmethod
    def from_json(cls, data) -> "DrawingSet":
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        if data.get("units", "m") != "m":
            raise ValueError(f"unsupported units {data.get('units')!r}")
        lines: Dict[str, list] = {}
        for entry in data.get("classes", []):
            lines.setdefault(entry["class"], []).extend(entry.get("polylines", []))
        return cls(lines)

    def to_json(self) -> dict:
        return {
            "units": "m",
            "classes": [
                {"class": c, "polylines": [pl.tolist() for pl in self.polylines[c]]}
                for c in DRAWING_CLASSES if c in self.polylines
            ],
        }


@dataclass
class AnnotationParams:
    offset: float = 0.10
    door_z_max: float = 2.2
    # per-class offset overrides, keyed by drawing class
    class_offsets: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.offset > 0:
            raise ValueError("offset must be > 0")
        for v in self.class_offsets.values():
            if not v > 0:
                raise ValueError("class offsets must be > 0")

    def offset_for(self, cls: str) -> float:
        return self.class_offsets.get(cls, self.offset)


def point_segment_distance(xy: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Minimum planar distance from each point to a set of segments."""
    best = np.full(len(xy), np.inf)
    for a, b in segs:
        ab = b - a
        denom = float(ab @ ab)
        t = np.clip(((xy - a) @ ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.hypot(xy[:, 0] - proj[:, 0], xy[:, 1] - proj[:, 1])
        np.minimum(best, d, out=best)
    return best


def _overlap_fraction(lo1, hi1, lo2, hi2, pad: float) -> float:
    lo1, hi1 = lo1 - pad, hi1 + pad
    lo2, hi2 = lo2 - pad, hi2 + pad
    inter = np.clip(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0, None)
    a1 = np.prod(hi1 - lo1)
    a2 = np.prod(hi2 - lo2)
    return float(np.prod(inter) / min(a1, a2))


def annotate_from_drawing(cloud: LabeledPointCloud, drawing: DrawingSet, levels: FloorCeilingLevels,
                          params: Optional[AnnotationParams] = None) -> LabeledPointCloud:
    """Label points by slab height first, then by distance to door, stair and wall polylines.

    Everything left over is Clutter.
    """
    params = params or AnnotationParams()
    pos = cloud.positions
    b = drawing.bounds()
    if b is not None and len(cloud):
        frac = _overlap_fraction(pos[:, :2].min(axis=0), pos[:, :2].max(axis=0), b[0], b[1], params.offset)
        if frac < 0.10:
            raise FrameMismatch(f"cloud/drawing bounding boxes overlap only {frac:.1%}")
    z = pos[:, 2]
    xy = pos[:, :2]
    labels = np.full(len(cloud), int(SemanticClass.CLUTTER), dtype=np.int8)
    unset = np.ones(len(cloud), dtype=bool)

    def assign(mask, cls):
        hit = unset & mask
        labels[hit] = int(cls)
        unset[hit] = False

    assign(np.abs(z - levels.z_floor) <= levels.slab_tolerance, SemanticClass.FLOOR)
    assign(np.abs(z - levels.z_ceiling) <= levels.slab_tolerance, SemanticClass.CEILING)
    for cls, sem, extra in (
        ("door", SemanticClass.DOOR, z <= levels.z_floor + params.door_z_max),
        ("stair", SemanticClass.STAIR, None),
        ("wall", SemanticClass.WALL, None),
    ):
        segs = drawing.segments(cls)
        if not len(segs) or not unset.any():
            continue
        idx = np.flatnonzero(unset if extra is None else unset & extra)
        d = point_segment_distance(xy[idx], segs)
        hit = np.zeros(len(cloud), dtype=bool)
        hit[idx[d <= params.offset_for(cls)]] = True
        assign(hit, sem)
    return cloud.with_labels(labels)


def read_label_file(path) -> np.ndarray:
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            v = int(s)
        except ValueError:
            raise ParseError(f"line {lineno}", f"not an integer: {s!r}") from None
        if not 0 <= v < N_CLASSES:
            raise OutOfRangeLabel(len(values), v)
        values.append(v)
    return np.asarray(values, dtype=np.int8)


def load_labels(cloud: LabeledPointCloud, path) -> LabeledPointCloud:
    labels = read_label_file(path)
    if len(labels) != len(cloud):
        raise LengthMismatch(f"{len(labels)} labels for {len(cloud)} points")
    return cloud.with_labels(labels)


def write_label_file(path, labels: np.ndarray) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))
