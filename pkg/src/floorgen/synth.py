"""Synthetic labeled building clouds with exact ground-truth floorplans.

Surfaces are sampled on jittered grids: both faces of every wall, floor and
ceiling slabs inside the rooms, stair risers and treads, door leaves and
furniture boxes, plus uniform clutter in the room volume. Scan shadows are
modeled as plan-space occlusion masks.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import shapely
from shapely.geometry import Polygon

from .doors import DoorOpening
from .errors import InvalidSpec
from .floorplan import Floorplan, Line2D, WallSegment2D, segment_rooms
from .pcio import LabeledPointCloud, SemanticClass
from .stairs import StairRun, StairStep

_EPS = 1e-6

PALETTE = {
    SemanticClass.CEILING: (210, 210, 205),
    SemanticClass.FLOOR: (125, 105, 85),
    SemanticClass.WALL: (232, 226, 212),
    SemanticClass.DOOR: (140, 72, 30),
    SemanticClass.STAIR: (105, 105, 140),
}


@dataclass
class WallSpec:
    start: Tuple[float, float]
    end: Tuple[float, float]
    thickness: float = 0.12


@dataclass
class DoorSpec:
    wall: int
    u: float  # center position along the wall centerline, from its start
    width: float = 0.9
    height: float = 2.1
    leaf: str = "none"  # none | open | closed


@dataclass
class StairSpec:
    origin: Tuple[float, float]  # plan foot of the first riser, laterally centered
    direction: Tuple[float, float]
    steps: int = 10
    riser: float = 0.17
    tread: float = 0.28
    width: float = 1.2


@dataclass
class FurnitureBox:
    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]


@dataclass
class OcclusionMask:
    kind: str  # disk | halfplane
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    normal: Tuple[float, float] = (1.0, 0.0)  # halfplane removes normal . p > offset
    offset: float = 0.0
    z_range: Optional[Tuple[float, float]] = None

    def removes(self, pts: np.ndarray) -> np.ndarray:
        if self.kind == "disk":
            d = pts[:, :2] - np.asarray(self.center)
            m = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] < self.radius * self.radius
        else:
            m = pts[:, :2] @ np.asarray(self.normal) > self.offset
        if self.z_range is not None:
            m &= (pts[:, 2] >= self.z_range[0]) & (pts[:, 2] <= self.z_range[1])
        return m


def _tuples(d: dict) -> dict:
    # JSON arrays back to the tuple-valued fields
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


@dataclass
class BuildingSpec:
    walls: List[WallSpec]
    doors: List[DoorSpec] = field(default_factory=list)
    stair: Optional[StairSpec] = None
    story_height: float = 3.0
    density: float = 1000.0
    noise_sigma: float = 0.0
    clutter_density: float = 0.0
    furniture: List[FurnitureBox] = field(default_factory=list)
    occlusion: List[OcclusionMask] = field(default_factory=list)
    slabs: bool = True
    colors: bool = True
    yaw: float = 0.0
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0

    def validate(self) -> None:
        if not self.walls:
            raise InvalidSpec("no walls")
        if not self.density > 0:
            raise InvalidSpec("density must be positive")
        if not self.noise_sigma >= 0:
            raise InvalidSpec("noise_sigma must be non-negative")
        if self.clutter_density < 0:
            raise InvalidSpec("clutter_density must be non-negative")
        if not self.story_height > 0:
            raise InvalidSpec("story_height must be positive")
        for i, w in enumerate(self.walls):
            if w.thickness <= 0 or math.dist(w.start, w.end) <= 0:
                raise InvalidSpec(f"wall {i}: zero length or thickness")
        for i, d in enumerate(self.doors):
            if not 0 <= d.wall < len(self.walls):
                raise InvalidSpec(f"door {i}: unknown wall {d.wall}")
            length = math.dist(self.walls[d.wall].start, self.walls[d.wall].end)
            if d.width <= 0 or d.height <= 0 or d.u - d.width / 2 < 0 or d.u + d.width / 2 > length:
                raise InvalidSpec(f"door {i}: outside wall extent")
            if d.height > self.story_height:
                raise InvalidSpec(f"door {i}: taller than story")
            if d.leaf not in ("none", "open", "closed"):
                raise InvalidSpec(f"door {i}: leaf must be none, open or closed")
        if self.stair is not None:
            s = self.stair
            if s.steps < 1 or s.riser <= 0 or s.tread <= 0 or s.width <= 0:
                raise InvalidSpec("stair: non-positive dimension")
            if np.hypot(*s.direction) == 0:
                raise InvalidSpec("stair: zero direction")
        for m in self.occlusion:
            if m.kind not in ("disk", "halfplane"):
                raise InvalidSpec(f"occlusion kind {m.kind!r}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data) -> "BuildingSpec":
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        d = dict(data)
        try:
            d["walls"] = [WallSpec(**_tuples(w)) for w in d["walls"]]
            d["doors"] = [DoorSpec(**x) for x in d.get("doors", [])]
            d["stair"] = StairSpec(**_tuples(d["stair"])) if d.get("stair") else None
            d["furniture"] = [FurnitureBox(**_tuples(x)) for x in d.get("furniture", [])]
            d["occlusion"] = [OcclusionMask(**_tuples(x)) for x in d.get("occlusion", [])]
            if "offset" in d:
                d["offset"] = tuple(d["offset"])
            spec = cls(**d)
        except (KeyError, TypeError) as e:
            raise InvalidSpec(f"bad spec json: {e}") from e
        spec.validate()
        return spec


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------


def _frame(w: WallSpec):
    a = np.asarray(w.start, dtype=np.float64)
    b = np.asarray(w.end, dtype=np.float64)
    length = float(np.hypot(*(b - a)))
    d = (b - a) / length
    return a, d, np.array([-d[1], d[0]]), length


def _inside_solid(xy: np.ndarray, w: WallSpec) -> np.ndarray:
    """Strictly inside the wall solid extended by half a thickness at both ends."""
    a, d, n, length = _frame(w)
    rel = xy - a
    u, v = rel @ d, rel @ n
    h = w.thickness / 2
    return (np.abs(v) < h - _EPS) & (u > -h + _EPS) & (u < length + h - _EPS)


def _open_interval_inside(p0, dirv, t_lo, t_hi, w: WallSpec):
    """Parameter interval of the segment ``p0 + t * dirv`` strictly inside ``w``'s solid."""
    a, d, n, length = _frame(w)
    h = w.thickness / 2
    lo, hi = t_lo, t_hi
    for axis, bmin, bmax in ((d, -h, length + h), (n, -h, h)):
        s0 = float((p0 - a) @ axis)
        ds = float(dirv @ axis)
        if abs(ds) < 1e-12:
            if not bmin < s0 < bmax:
                return None
            continue
        t1, t2 = (bmin - s0) / ds, (bmax - s0) / ds
        lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
    return (lo, hi) if hi - lo > 1e-9 else None


def _face_extent(spec: BuildingSpec, i: int, side: float):
    """Surviving parameter range of one wall face after removing overlaps with other walls."""
    w = spec.walls[i]
    a, d, n, length = _frame(w)
    h = w.thickness / 2
    p0 = a + side * h * n
    keep = [(-h, length + h)]
    for j, other in enumerate(spec.walls):
        if j == i:
            continue
        cut = _open_interval_inside(p0, d, -h, length + h, other)
        if cut is None:
            continue
        nxt = []
        for lo, hi in keep:
            if cut[1] <= lo or cut[0] >= hi:
                nxt.append((lo, hi))
                continue
            if cut[0] > lo:
                nxt.append((lo, cut[0]))
            if cut[1] < hi:
                nxt.append((cut[1], hi))
        keep = nxt
    if not keep:
        return None
    return p0, d, min(k[0] for k in keep), max(k[1] for k in keep)


def _jitter_grid(rng: np.random.Generator, a: float, b: float, density: float) -> np.ndarray:
    """One uniformly jittered sample per cell of a grid spaced ``1/sqrt(density)`` over ``[0,a]x[0,b]``."""
    if a <= 0 or b <= 0:
        return np.zeros((0, 2))
    s = 1.0 / math.sqrt(density)
    na, nb = max(1, int(math.ceil(a / s))), max(1, int(math.ceil(b / s)))
    ii, jj = np.meshgrid(np.arange(na), np.arange(nb), indexing="ij")
    jit = rng.random((na * nb, 2))
    return np.stack([(ii.ravel() + jit[:, 0]) * (a / na), (jj.ravel() + jit[:, 1]) * (b / nb)], axis=1)


class _Sampler:
    def __init__(self, rng, density):
        self.rng = rng
        self.density = density
        self.pos, self.nrm, self.lab = [], [], []

    def rect(self, origin, e1, e2, la, lb, normal, label, density=None):
        uv = _jitter_grid(self.rng, la, lb, density or self.density)
        p = np.asarray(origin) + uv[:, :1] * np.asarray(e1) + uv[:, 1:] * np.asarray(e2)
        self.add(p, np.broadcast_to(np.asarray(normal, dtype=np.float64), p.shape), label)

    def add(self, p, normals, label):
        self.pos.append(np.asarray(p, dtype=np.float64).reshape(-1, 3))
        self.nrm.append(np.asarray(normals, dtype=np.float64).reshape(-1, 3))
        self.lab.append(np.full(len(self.pos[-1]), int(label), dtype=np.int8))

    def arrays(self):
        if not self.pos:
            return np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0, dtype=np.int8)
        return np.concatenate(self.pos), np.concatenate(self.nrm), np.concatenate(self.lab)


def _stair_run(s: StairSpec) -> StairRun:
    d = np.asarray(s.direction, dtype=np.float64)
    d = d / np.hypot(*d)
    steps = [StairStep((i + 1) * s.riser, i * s.tread, s.tread, s.riser) for i in range(s.steps)]
    return StairRun(d, np.asarray(s.origin, dtype=np.float64), steps, (-s.width / 2, s.width / 2))


def _rotate(xy: np.ndarray, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return xy @ np.array([[c, s], [-s, c]])


def _local_plan(spec: BuildingSpec) -> Floorplan:
    walls = []
    center = np.mean([np.r_[w.start, w.end].reshape(2, 2).mean(axis=0) for w in spec.walls], axis=0)
    for i, w in enumerate(spec.walls):
        faces = []
        for side in (1.0, -1.0):
            ext = _face_extent(spec, i, side)
            if ext is None:
                break
            p0, d, lo, hi = ext
            faces.append(Line2D(p0 + lo * d, p0 + hi * d))
        if len(faces) < 2:
            continue
        # inner fold faces the building center
        dist = [float(np.linalg.norm(0.5 * (f.start + f.end) - center)) for f in faces]
        inner, outer = (faces[0], faces[1]) if dist[0] <= dist[1] else (faces[1], faces[0])
        walls.append(WallSegment2D(i, inner, outer, float(w.thickness)))
    doors = []
    for d in spec.doors:
        a, axis, _, _ = _frame(spec.walls[d.wall])
        doors.append(DoorOpening(d.wall, (d.u - d.width / 2, d.u + d.width / 2), float(d.width),
                                 float(d.height), a + axis * d.u))
    stairs = [np.array(_stair_run(spec.stair).lines())] if spec.stair is not None else []
    return Floorplan(walls, doors, stairs)


def _transform_plan(fp: Floorplan, yaw: float, off) -> Floorplan:
    t = np.asarray(off[:2], dtype=np.float64)
    f = lambda p: _rotate(np.asarray(p, dtype=np.float64).reshape(-1, 2), yaw) + t  # noqa: E731
    walls = [WallSegment2D(w.wall_id, Line2D(*f([w.inner.start, w.inner.end])),
                           Line2D(*f([w.outer.start, w.outer.end])), w.thickness) for w in fp.walls]
    doors = [DoorOpening(d.wall_id, d.u_interval, d.width, d.height, f(d.center)[0]) for d in fp.doors]
    stairs = [f(s).reshape(-1, 2, 2) for s in fp.stairs]
    return Floorplan(walls, doors, stairs)


def ground_truth(spec: BuildingSpec, room_resolution: float = 0.02) -> Floorplan:
    """Exact plan of ``spec`` in world coordinates, rooms derived from the wall raster."""
    fp = _transform_plan(_local_plan(spec), spec.yaw, spec.offset)
    fp.rooms = segment_rooms(fp, room_resolution)
    return fp


def _local_rooms(spec: BuildingSpec):
    return segment_rooms(_local_plan(spec), 0.02)


def structural_area(spec: BuildingSpec) -> Tuple[float, float]:
    """Approximate sampled surface area (m^2) and room floor area (m^2)."""
    h = spec.story_height
    walls = sum(2 * (math.dist(w.start, w.end) + w.thickness) * h for w in spec.walls)
    rooms = sum(r.area() for r in _local_rooms(spec))
    area = walls + (2 * rooms if spec.slabs else 0.0)
    if spec.stair is not None:
        s = spec.stair
        area += s.steps * s.width * (s.riser + s.tread)
    return area, rooms


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def generate_building(spec: BuildingSpec) -> Tuple[LabeledPointCloud, Floorplan]:
    """Sample a labeled cloud for ``spec`` and return it with its ground-truth plan."""
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(spec.seed))))
    H = spec.story_height
    S = _Sampler(rng, spec.density)
    ez = np.array([0.0, 0.0, 1.0])

    door_by_wall = {}
    for d in spec.doors:
        door_by_wall.setdefault(d.wall, []).append(d)

    for i, w in enumerate(spec.walls):
        a, d, n, length = _frame(w)
        h = w.thickness / 2
        e1 = np.r_[d, 0.0]
        for side in (1.0, -1.0):
            org = np.r_[a + side * h * n - h * d, 0.0]
            uv = _jitter_grid(rng, length + w.thickness, H, spec.density)
            p = org + uv[:, :1] * e1 + uv[:, 1:] * ez
            keep = np.ones(len(p), dtype=bool)
            for j, other in enumerate(spec.walls):
                if j != i:
                    keep &= ~_inside_solid(p[:, :2], other)
            u = uv[:, 0] - h
            for dr in door_by_wall.get(i, []):
                keep &= ~((np.abs(u - dr.u) < dr.width / 2) & (p[:, 2] < dr.height))
            p = p[keep]
            S.add(p, np.broadcast_to(np.r_[side * n, 0.0], p.shape), SemanticClass.WALL)

    for dr in spec.doors:
        a, d, n, _ = _frame(spec.walls[dr.wall])
        lo = a + d * (dr.u - dr.width / 2)
        if dr.leaf == "closed":
            S.rect(np.r_[lo, 0.0], np.r_[d, 0.0], ez, dr.width, dr.height, np.r_[n, 0.0], SemanticClass.DOOR)
        elif dr.leaf == "open":
            hinge = lo + n * (spec.walls[dr.wall].thickness / 2) + d * 0.03
            S.rect(np.r_[hinge, 0.0], np.r_[n, 0.0], ez, dr.width, dr.height, np.r_[d, 0.0], SemanticClass.DOOR)

    local_rooms = _local_rooms(spec)
    room_polys = [Polygon(r.exterior, [h for h in r.holes]) for r in local_rooms]
    union = shapely.union_all(room_polys) if room_polys else None
    room_area = float(union.area) if union is not None else 0.0

    stair_poly = None
    if spec.stair is not None:
        run = _stair_run(spec.stair)
        stair_poly = Polygon(run.footprint)
        s = spec.stair
        dd = np.r_[run.direction, 0.0]
        perp = np.r_[-run.direction[1], run.direction[0], 0.0]
        base = np.r_[run.origin, 0.0] - perp * (s.width / 2)
        for k in range(s.steps):
            S.rect(base + dd * (k * s.tread) + ez * (k * s.riser), perp, ez, s.width, s.riser, -dd,
                   SemanticClass.STAIR)
            S.rect(base + dd * (k * s.tread) + ez * ((k + 1) * s.riser), perp, dd, s.width, s.tread, ez,
                   SemanticClass.STAIR)

    if spec.slabs and union is not None:
        x0, y0, x1, y1 = union.bounds
        for z, label, exclude in ((0.0, SemanticClass.FLOOR, stair_poly), (H, SemanticClass.CEILING, None)):
            uv = _jitter_grid(rng, x1 - x0, y1 - y0, spec.density) + np.array([x0, y0])
            inside = shapely.contains_xy(union, uv[:, 0], uv[:, 1])
            if exclude is not None:
                inside &= ~shapely.contains_xy(exclude, uv[:, 0], uv[:, 1])
            uv = uv[inside]
            S.add(np.c_[uv, np.full(len(uv), z)], np.broadcast_to(ez, (len(uv), 3)), label)

    for b in spec.furniture:
        lo, hi = np.asarray(b.lo, dtype=np.float64), np.asarray(b.hi, dtype=np.float64)
        ext = hi - lo
        ex, ey = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
        S.rect(np.r_[lo[:2], hi[2]], ex, ey, ext[0], ext[1], ez, SemanticClass.CLUTTER)
        S.rect(lo, ex, ez, ext[0], ext[2], -ey, SemanticClass.CLUTTER)
        S.rect(np.r_[lo[0], hi[1], lo[2]], ex, ez, ext[0], ext[2], ey, SemanticClass.CLUTTER)
        S.rect(lo, ey, ez, ext[1], ext[2], -ex, SemanticClass.CLUTTER)
        S.rect(np.r_[hi[0], lo[1], lo[2]], ey, ez, ext[1], ext[2], ex, SemanticClass.CLUTTER)

    n_uniform = int(round(spec.clutter_density * room_area * H))
    pos, nrm, lab = S.arrays()
    if spec.noise_sigma > 0:
        pos = pos + nrm * rng.normal(0.0, spec.noise_sigma, size=(len(pos), 1))
    if n_uniform and union is not None:
        x0, y0, x1, y1 = union.bounds
        got = []
        need = n_uniform
        while need > 0:
            c = rng.random((2 * need + 16, 3)) * np.array([x1 - x0, y1 - y0, H]) + np.array([x0, y0, 0.0])
            c = c[shapely.contains_xy(union, c[:, 0], c[:, 1])][:need]
            got.append(c)
            need -= len(c)
        cl = np.concatenate(got)
        pos = np.concatenate([pos, cl])
        lab = np.concatenate([lab, np.full(len(cl), int(SemanticClass.CLUTTER), dtype=np.int8)])

    keep = np.ones(len(pos), dtype=bool)
    for m in spec.occlusion:
        keep &= ~m.removes(pos)
    pos, lab = pos[keep], lab[keep]

    order = rng.permutation(len(pos))
    pos, lab = pos[order], lab[order]
    pos[:, :2] = _rotate(pos[:, :2], spec.yaw)
    pos += np.asarray(spec.offset, dtype=np.float64)

    colors = None
    if spec.colors:
        colors = np.zeros((len(pos), 3), dtype=np.uint8)
        for cls, rgb in PALETTE.items():
            colors[lab == int(cls)] = rgb
        cm = lab == int(SemanticClass.CLUTTER)
        colors[cm] = rng.integers(0, 256, size=(int(cm.sum()), 3), dtype=np.uint8)
    return LabeledPointCloud(pos, colors, lab), ground_truth(spec)


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


def rect_walls(x0, y0, x1, y1, t=0.12) -> List[WallSpec]:
    """Four walls whose inner faces bound ``[x0,x1] x [y0,y1]``; order south, east, north, west."""
    h = t / 2
    a, b, c, d = (x0 - h, y0 - h), (x1 + h, y0 - h), (x1 + h, y1 + h), (x0 - h, y1 + h)
    return [WallSpec(a, b, t), WallSpec(b, c, t), WallSpec(c, d, t), WallSpec(d, a, t)]


def _with_clutter(spec: BuildingSpec, fraction: float) -> BuildingSpec:
    """Set ``clutter_density`` so clutter (furniture plus uniform) is ``fraction`` of all points."""
    area, rooms = structural_area(spec)
    structural = area * spec.density
    furn = 0.0
    for b in spec.furniture:
        e = np.subtract(b.hi, b.lo)
        furn += (e[0] * e[1] + 2 * e[2] * (e[0] + e[1])) * spec.density
    need = fraction / (1.0 - fraction) * (structural + furn) - furn
    spec.clutter_density = max(need, 0.0) / (rooms * spec.story_height)
    return spec


def _rect1(seed, density, sigma):
    return BuildingSpec(rect_walls(0, 0, 4, 3), [DoorSpec(0, 2.06, 0.9, 2.1)],
                        density=density, noise_sigma=sigma, offset=(12.0, -5.0, 1.5), seed=seed)


def _tworoom(seed, density, sigma):
    walls = rect_walls(0, 0, 8, 5) + [WallSpec((4.0, 0.0), (4.0, 5.0), 0.10)]
    doors = [DoorSpec(4, 2.5, 0.9, 2.1), DoorSpec(0, 2.0, 1.0, 2.1)]
    return BuildingSpec(walls, doors, density=density, noise_sigma=sigma, seed=seed)


def _corridor(seed, density, sigma):
    walls = rect_walls(0, 0, 15, 8)
    walls += [WallSpec((0.0, 3.45), (15.0, 3.45), 0.10), WallSpec((0.0, 5.05), (15.0, 5.05), 0.10)]
    walls += [WallSpec((5.0, 5.1), (5.0, 8.0), 0.10), WallSpec((10.0, 5.1), (10.0, 8.0), 0.10),
              WallSpec((7.5, 0.0), (7.5, 3.4), 0.10)]
    doors = [DoorSpec(5, 2.5, 0.9, 2.1), DoorSpec(5, 7.5, 0.9, 2.1), DoorSpec(5, 12.5, 0.9, 2.1),
             DoorSpec(4, 3.7, 0.9, 2.1), DoorSpec(4, 11.2, 0.9, 2.1), DoorSpec(3, 1.5, 1.0, 2.1)]
    return BuildingSpec(walls, doors, density=density, noise_sigma=sigma, seed=seed)


def _lshape(seed, density, sigma):
    t = 0.12
    h = t / 2
    pts = [(0 - h, 0 - h), (7 + h, 0 - h), (7 + h, 3 + h), (3 + h, 3 + h), (3 + h, 6 + h), (0 - h, 6 + h)]
    walls = [WallSpec(pts[k], pts[(k + 1) % 6], t) for k in range(6)]
    doors = [DoorSpec(0, 5.0, 0.9, 2.1)]
    return BuildingSpec(walls, doors, density=density, noise_sigma=sigma, yaw=0.35,
                        offset=(3.0, 4.0, 0.0), seed=seed)


def _stairhall(seed, density, sigma):
    walls = rect_walls(0, 0, 8, 5)
    stair = StairSpec((2.0, 2.5), (1.0, 0.0), steps=10, riser=0.17, tread=0.28, width=1.2)
    return BuildingSpec(walls, [DoorSpec(0, 1.0, 0.9, 2.1)], stair=stair, density=density,
                        noise_sigma=sigma, seed=seed)


def _cluttered(seed, density, sigma):
    spec = _tworoom(seed, density, sigma)
    spec.furniture = [
        FurnitureBox((0.6, 0.6, 0.0), (2.1, 1.4, 0.75)),
        FurnitureBox((0.05, 3.2, 0.0), (0.65, 4.7, 1.2)),   # shelf against a wall
        FurnitureBox((5.0, 3.5, 0.0), (6.2, 4.4, 0.5)),
        FurnitureBox((6.8, 0.4, 0.0), (7.6, 1.4, 1.1)),
    ]
    spec.occlusion = [
        OcclusionMask("disk", center=(1.5, 4.6), radius=0.5),
        OcclusionMask("disk", center=(7.6, 2.8), radius=0.45),
        OcclusionMask("disk", center=(3.6, 1.2), radius=0.4, z_range=(0.0, 1.6)),
    ]
    spec.doors[0].leaf = "open"
    return _with_clutter(spec, 0.20)


def _nocolor_noslab(seed, density, sigma):
    spec = _rect1(seed, density, sigma)
    spec.slabs = False
    spec.colors = False
    return spec


FIXTURES = {
    "rect1": _rect1,
    "tworoom": _tworoom,
    "corridor": _corridor,
    "lshape": _lshape,
    "stairhall": _stairhall,
    "cluttered": _cluttered,
    "nocolor-noslab": _nocolor_noslab,
}


def fixture(name: str, seed: int = 0, density: float = 770.0, sigma: float = 0.002) -> BuildingSpec:
    try:
        make = FIXTURES[name]
    except KeyError:
        raise InvalidSpec(f"unknown fixture {name!r}") from None
    return make(int(seed) * 1000 + list(FIXTURES).index(name), density, sigma)


def standard_corpus(seed: int = 0, density: float = 770.0, sigma: float = 0.002) -> List[Tuple[str, BuildingSpec]]:
    """The seven named fixtures in fixed order."""
    return [(name, fixture(name, seed, density, sigma)) for name in FIXTURES]


def large_building(seed: int = 0, n_points: int = 1_000_000, sigma: float = 0.002) -> BuildingSpec:
    """Corridor layout with density chosen to produce about ``n_points`` points."""
    spec = _corridor(seed, 1.0, sigma)
    area, _ = structural_area(spec)
    spec.density = n_points / area
    # the area estimate ignores wall overlaps and door cutouts; calibrate once
    n = len(generate_building(spec)[0])
    spec.density *= n_points / n
    return spec
