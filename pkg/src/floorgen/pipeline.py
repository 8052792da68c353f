"""End-to-end orchestration and grid search."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .annotate import DrawingSet, annotate_from_drawing, load_labels
from .config import PipelineConfig
from .doors import DoorOpening, detect_doors
from .errors import DegenerateWall, FloorgenError, StageError
from .evaluate import evaluate_pair
from .floorplan import Floorplan, Line2D, Room, WallSegment2D, assemble_floorplan, fit_two_fold_ransac
from .pcio import LabeledPointCloud, SemanticClass, build_spatial_index, estimate_normals, load_point_cloud
from .preprocess import RigidTransform2D5, detect_levels, normalize_coordinates, outlier_mask
from .stairs import detect_stairs
from .walls import filter_wall_candidates, parametric_filter_walls, region_grow


@dataclass
class StageRecord:
    stage: str
    count: int
    seconds: float
    note: str = ""


@dataclass
class StageReport:
    mode: str = ""
    records: List[StageRecord] = field(default_factory=list)
    used_level_fallback: bool = False
    skipped_walls: List[int] = field(default_factory=list)

    def add(self, stage, count, seconds, note=""):
        self.records.append(StageRecord(stage, int(count), float(seconds), note))

    def count(self, stage: str) -> int:
        for r in self.records:
            if r.stage == stage:
                return r.count
        raise KeyError(stage)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "used_level_fallback": self.used_level_fallback,
            "skipped_walls": list(self.skipped_walls),
            "stages": [r.__dict__ for r in self.records],
        }


class _Stage:
    def __init__(self, report: StageReport, name: str):
        self.report, self.name = report, name
        self.count, self.note = 0, ""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, et, ev, tb):
        if ev is not None:
            if isinstance(ev, StageError):
                return False
            raise StageError(self.name, ev) from ev
        self.report.add(self.name, self.count, time.perf_counter() - self.t0, self.note)
        return False


def _plan_to_original(fp: Floorplan, tf: RigidTransform2D5) -> Floorplan:
    f = lambda p: tf.to_original(np.asarray(p, dtype=np.float64).reshape(-1, 2))  # noqa: E731
    walls = [WallSegment2D(w.wall_id, Line2D(*f([w.inner.start, w.inner.end])),
                           Line2D(*f([w.outer.start, w.outer.end])), w.thickness) for w in fp.walls]
    doors = [DoorOpening(d.wall_id, d.u_interval, d.width, d.height, f(d.center)[0]) for d in fp.doors]
    stairs = [f(s).reshape(-1, 2, 2) for s in fp.stairs]
    rooms = [Room(f(r.exterior), [f(h) for h in r.holes]) for r in fp.rooms]
    return Floorplan(walls, doors, stairs, rooms, fp.units)


LabelSource = Union[str, Path, np.ndarray, None]


def run_pipeline(cloud: Union[str, Path, LabeledPointCloud], labels: LabelSource = None,
                 drawing: Union[str, Path, dict, DrawingSet, None] = None,
                 config: Optional[PipelineConfig] = None,
                 seed: Optional[int] = None) -> Tuple[Floorplan, StageReport]:
    """Run every stage from a cloud to a floorplan in the cloud's own frame.

    Exactly one label source may be given: ``labels`` (file or array) or
    ``drawing`` (polylines in the cloud's frame, used for pseudo-annotation).
    With neither, labels stored in the cloud are ignored and the geometric-only
    mode treats every point as a wall candidate.
    """
    cfg = config or PipelineConfig()
    if seed is not None:
        cfg = cfg.with_overrides({"ransac.seed": int(seed)})
    if labels is not None and drawing is not None:
        raise ValueError("give either labels or a drawing, not both")
    report = StageReport(mode="labels" if labels is not None else "drawing" if drawing is not None else "geometric")
    geometric = report.mode == "geometric"

    with _Stage(report, "load") as st:
        pc = cloud if isinstance(cloud, LabeledPointCloud) else load_point_cloud(cloud)
        if labels is not None:
            if isinstance(labels, (str, Path)):
                pc = load_labels(pc, labels)
            else:
                pc = pc.with_labels(labels)
        elif isinstance(drawing, (str, Path, dict)):
            drawing = DrawingSet.from_json(drawing)
        if labels is None:
            pc = pc.with_labels(None)
        st.count = len(pc)

    with _Stage(report, "normalize") as st:
        pc, tf = normalize_coordinates(pc, align=cfg.align, k=cfg.normals.k)
        st.count = len(pc)
        st.note = f"theta={tf.theta:.6f}"

    with _Stage(report, "outliers") as st:
        if cfg.outliers.enabled:
            keep = outlier_mask(pc, build_spatial_index(pc), cfg.outliers.k, cfg.outliers.std_ratio)
            pc = pc.subset(keep)
        st.count = len(pc)

    with _Stage(report, "levels") as st:
        lv = cfg.levels
        levels, report.used_level_fallback = detect_levels(pc, lv.bin_size, lv.peak_prominence,
                                                           lv.min_story_height, lv.median_contrast)
        st.count = len(pc)
        st.note = f"floor={levels.z_floor:.3f} ceiling={levels.z_ceiling:.3f}" + \
                  (" fallback" if report.used_level_fallback else "")

    with _Stage(report, "labels") as st:
        if drawing is not None:
            norm = drawing.transformed(lambda p: tf.to_normalized(p))
            pc = annotate_from_drawing(pc, norm, levels, cfg.annotation.params())
        st.count = 0 if pc.labels is None else int(np.count_nonzero(pc.labels == int(SemanticClass.WALL)))

    with _Stage(report, "normals") as st:
        index = build_spatial_index(pc)
        normals = estimate_normals(pc, index, k=cfg.normals.k)
        st.count = int(np.count_nonzero(~normals.degenerate))

    with _Stage(report, "wall_candidates") as st:
        wc = cfg.walls
        cand = filter_wall_candidates(pc, normals, math.radians(wc.vertical_tolerance_deg), not geometric)
        st.count = len(cand)

    with _Stage(report, "walls") as st:
        clusters = region_grow(cand, pc, index, normals, math.radians(wc.angle_thresh_deg), wc.radius,
                               wc.min_cluster)
        if wc.parametric_filter:
            walls = parametric_filter_walls(clusters, pc, levels, wc.min_points, wc.min_height_fraction)
        else:
            walls = parametric_filter_walls(clusters, pc, levels, 2, 0.0)
        st.count = len(walls)

    with _Stage(report, "doors") as st:
        dc = cfg.doors
        doors = detect_doors(walls, pc, levels, dc.cell, dc.min_clear_height, dc.bounds())
        st.count = len(doors)

    with _Stage(report, "stairs") as st:
        runs = detect_stairs(pc, normals, levels, cfg.stairs.params(), use_labels=not geometric)
        st.count = len(runs)

    with _Stage(report, "ransac") as st:
        rc = cfg.ransac
        if pc.labels is not None:
            interior = pc.positions[pc.labels != int(SemanticClass.WALL), :2]
        else:
            interior = pc.positions[:, :2]
        interior_xy = interior.mean(axis=0) if len(interior) else None
        walls2d = []
        for w in walls:
            try:
                walls2d.append(fit_two_fold_ransac(w, pc, rc.iterations, rc.inlier_dist, rc.seed, interior_xy,
                                                   rc.default_thickness, rc.max_thickness))
            except (DegenerateWall, ValueError):
                report.skipped_walls.append(w.wall_id)
        st.count = len(walls2d)

    with _Stage(report, "assemble") as st:
        fc = cfg.floorplan
        fp = assemble_floorplan(walls2d, doors, [np.array(r.lines()) for r in runs], fc.snap_dist,
                                fc.room_resolution, fc.min_room_area)
        fp = _plan_to_original(fp, tf)
        st.count = len(fp.rooms)
    return fp, report


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------


@dataclass
class Fixture:
    name: str
    cloud: Union[str, Path, LabeledPointCloud]
    gt: Floorplan
    labels: LabelSource = None
    drawing: object = None


@dataclass
class GridResult:
    best: PipelineConfig
    best_point: Dict[str, object]
    table: List[dict]


def expand_grid(grid: Dict[str, Sequence]) -> List[Dict[str, object]]:
    """Cartesian product over the keys in sorted order; the first key varies slowest."""
    keys = sorted(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(list(grid[k]) for k in keys))]


def grid_search(corpus: Sequence[Fixture], grid: Dict[str, Sequence],
                base: Optional[PipelineConfig] = None) -> GridResult:
    """Score every grid point on every fixture and return the best configuration.

    Score per fixture is recall@10cm + precision@10cm + room IoU; a fixture
    whose run fails scores 0. The grid point with the highest mean score wins,
    ties going to the earlier point.
    """
    base = base or PipelineConfig()
    points = expand_grid(grid)
    table = []
    best_i, best_score = 0, -math.inf
    for i, point in enumerate(points):
        cfg = base.with_overrides(point)
        margin = min(cfg.evaluation.margins, key=lambda m: abs(m - 0.10))
        scores = []
        for fx in corpus:
            row = {"grid_point": i, **{k: point[k] for k in sorted(point)}, "fixture": fx.name}
            try:
                fp, _ = run_pipeline(fx.cloud, fx.labels, fx.drawing, cfg)
                rep = evaluate_pair(fp, fx.gt, cfg.evaluation.to_eval())
                s = rep.recall[margin] + rep.precision[margin] + rep.room_iou
                row.update(precision=rep.precision[margin], recall=rep.recall[margin], iou=rep.room_iou,
                           score=s, error="")
            except FloorgenError as e:
                s = 0.0
                row.update(precision=0.0, recall=0.0, iou=0.0, score=0.0, error=str(e))
            scores.append(s)
            table.append(row)
        mean = float(np.mean(scores)) if scores else 0.0
        if mean > best_score:
            best_i, best_score = i, mean
    return GridResult(base.with_overrides(points[best_i]), points[best_i], table)
