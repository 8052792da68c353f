"""2-fold RANSAC wall lines, floorplan assembly, room derivation and export."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage
from skimage import draw, measure

from .doors import DoorOpening
from .errors import DegenerateWall
from .pcio import LabeledPointCloud
from .walls import WallInstance


@dataclass
class Line2D:
    """Directed segment; ``direction``/``point``/``t_lo``/``t_hi`` are derived from the endpoints."""

    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64).reshape(2)
        self.end = np.asarray(self.end, dtype=np.float64).reshape(2)

    @classmethod
    def from_param(cls, direction, point, t_lo: float, t_hi: float) -> "Line2D":
        d = np.asarray(direction, dtype=np.float64)
        p = np.asarray(point, dtype=np.float64)
        return cls(p + t_lo * d, p + t_hi * d)

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.end - self.start)))

    @property
    def direction(self) -> np.ndarray:
        return (self.end - self.start) / self.length

    @property
    def point(self) -> np.ndarray:
        return self.start

    @property
    def t_lo(self) -> float:
        return 0.0

    @property
    def t_hi(self) -> float:
        return self.length

    @property
    def normal(self) -> np.ndarray:
        d = self.direction
        return np.array([-d[1], d[0]])

    def to_json(self):
        return [[float(self.start[0]), float(self.start[1])], [float(self.end[0]), float(self.end[1])]]


@dataclass
class WallSegment2D:
    wall_id: int
    inner: Line2D
    outer: Line2D
    thickness: float

    def centerline(self) -> Line2D:
        return Line2D(0.5 * (self.inner.start + self.outer.start), 0.5 * (self.inner.end + self.outer.end))

    def outline(self) -> np.ndarray:
        """Quadrilateral between the two folds."""
        return np.array([self.inner.start, self.inner.end, self.outer.end, self.outer.start])


@dataclass
class Room:
    exterior: np.ndarray
    holes: List[np.ndarray] = field(default_factory=list)

    def area(self) -> float:
        def ring(p):
            x, y = p[:, 0], p[:, 1]
            return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
        return ring(self.exterior) - sum(ring(h) for h in self.holes)


@dataclass
class Floorplan:
    walls: List[WallSegment2D] = field(default_factory=list)
    doors: List[DoorOpening] = field(default_factory=list)
    stairs: List[np.ndarray] = field(default_factory=list)  # per run: (k, 2, 2) segments
    rooms: List[Room] = field(default_factory=list)
    units: str = "m"

    def wall_by_id(self, wall_id: int) -> Optional[WallSegment2D]:
        for w in self.walls:
            if w.wall_id == wall_id:
                return w
        return None

    def door_segments(self) -> List[np.ndarray]:
        """Closure segment of each door, along its wall's centerline."""
        segs = []
        for d in self.doors:
            w = self.wall_by_id(d.wall_id)
            if w is None:
                continue
            axis = w.inner.direction
            segs.append(np.array([d.center - axis * d.width / 2, d.center + axis * d.width / 2]))
        return segs

    def all_points(self) -> np.ndarray:
        pts = [np.zeros((0, 2))]
        for w in self.walls:
            pts.append(w.outline())
        for run in self.stairs:
            pts.append(np.asarray(run).reshape(-1, 2))
        for r in self.rooms:
            pts.append(r.exterior)
        for s in self.door_segments():
            pts.append(s)
        return np.concatenate(pts)

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict:
        out = {
            "units": self.units,
            "walls": [{"id": int(w.wall_id), "inner": w.inner.to_json(), "outer": w.outer.to_json(),
                       "thickness": float(w.thickness)} for w in self.walls],
            "doors": [d.to_json() for d in self.doors],
            "stairs": [{"lines": np.asarray(run, dtype=np.float64).tolist()} for run in self.stairs],
            "rooms": [r.exterior.tolist() for r in self.rooms],
        }
        if any(r.holes for r in self.rooms):
            out["room_holes"] = [[h.tolist() for h in r.holes] for r in self.rooms]
        return out

    @classmethod
    def from_json(cls, data) -> "Floorplan":
        if isinstance(data, (bytes, str)):
            data = json.loads(data)
        walls = [WallSegment2D(int(w["id"]), Line2D(*w["inner"]), Line2D(*w["outer"]), float(w["thickness"]))
                 for w in data.get("walls", [])]
        doors = [DoorOpening.from_json(d) for d in data.get("doors", [])]
        stairs = [np.asarray(s["lines"], dtype=np.float64).reshape(-1, 2, 2) for s in data.get("stairs", [])]
        holes = data.get("room_holes") or [[] for _ in data.get("rooms", [])]
        rooms = [Room(np.asarray(r, dtype=np.float64).reshape(-1, 2),
                      [np.asarray(h, dtype=np.float64).reshape(-1, 2) for h in hs])
                 for r, hs in zip(data.get("rooms", []), holes)]
        return cls(walls, doors, stairs, rooms, data.get("units", "m"))


# ---------------------------------------------------------------------------
# 2-fold RANSAC
# ---------------------------------------------------------------------------


def wall_rng(seed: int, wall_id: int) -> np.random.Generator:
    """PCG64 stream for one wall, derived from ``(seed, wall_id)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(wall_id)])))


def _canonical_direction(d: np.ndarray) -> np.ndarray:
    if d[0] < -1e-12 or (abs(d[0]) <= 1e-12 and d[1] < 0):
        return -d
    return d


def _pca_line(xy: np.ndarray):
    c = xy.mean(axis=0)
    q = xy - c
    w, v = np.linalg.eigh(q.T @ q)
    d = _canonical_direction(v[:, 1])
    n = np.array([-d[1], d[0]])
    return d, n, float(n @ c)


def _extent(t: np.ndarray):
    """1st/99th percentile extent, widened by the 2% a uniform sampling loses to trimming."""
    lo, hi = np.percentile(t, [1.0, 99.0])
    pad = (hi - lo) * 0.01 / 0.98
    return float(lo - pad), float(hi + pad)


def fit_two_fold_ransac(wall: WallInstance, cloud: LabeledPointCloud, iterations: int = 500,
                        inlier_dist: float = 0.02, seed: int = 0, interior_xy=None,
                        default_thickness: float = 0.12, max_thickness: float = 0.6,
                        min_second_fraction: float = 0.10, chunk: int = 64) -> WallSegment2D:
    """Fit the two faces of a wall in top view as a pair of exactly parallel lines.

    The first line comes from 2-point RANSAC, the second from 1-point RANSAC
    on the remaining points with the first line's direction.
    """
    xy = cloud.positions[wall.point_indices, :2]
    m = len(xy)
    if m < 20:
        raise ValueError(f"wall {wall.wall_id}: need >= 20 points, got {m}")
    rng = wall_rng(seed, wall.wall_id)
    pairs = rng.integers(0, m, size=(iterations, 2))
    best_count, best_line = -1, None
    for lo in range(0, iterations, chunk):
        pr = pairs[lo:lo + chunk]
        a, b = xy[pr[:, 0]], xy[pr[:, 1]]
        d = b - a
        ln = np.hypot(d[:, 0], d[:, 1])
        valid = ln > 1e-12
        n = np.stack([-d[:, 1], d[:, 0]], axis=1) / np.where(valid, ln, 1.0)[:, None]
        off = np.sum(n * a, axis=1)
        counts = (np.abs(xy @ n.T - off) <= inlier_dist).sum(axis=0)
        counts[~valid] = -1
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count, best_line = int(counts[k]), (n[k], off[k])
    n1, off1 = best_line
    inl = np.abs(xy @ n1 - off1) <= inlier_dist
    d1, n1, off1 = _pca_line(xy[inl])
    inl = np.abs(xy @ n1 - off1) <= inlier_dist
    if inl.mean() < 0.30:
        raise DegenerateWall(f"wall {wall.wall_id}: first fold explains {inl.mean():.0%} of points")

    rest = xy[~inl]
    off2 = None
    inl2_pts = np.zeros((0, 2))
    if len(rest) >= max(2, int(math.ceil(min_second_fraction * m))):
        proj = rest @ n1
        picks = rng.integers(0, len(rest), size=iterations)
        cand = proj[picks]
        sp = np.sort(proj)
        counts = np.searchsorted(sp, cand + inlier_dist, "right") - np.searchsorted(sp, cand - inlier_dist, "left")
        c2 = cand[int(np.argmax(counts))]
        sel = np.abs(proj - c2) <= inlier_dist
        c2 = float(proj[sel].mean())
        sel = np.abs(proj - c2) <= inlier_dist
        if sel.sum() >= min_second_fraction * m and 0 < abs(c2 - off1) <= max_thickness:
            off2 = float(proj[sel].mean())
            inl2_pts = rest[sel]

    ext1 = _extent(xy[inl] @ d1)
    if off2 is None:
        sign = 1.0
        if interior_xy is not None:
            sign = -1.0 if float(np.asarray(interior_xy) @ n1) > off1 else 1.0
        off2 = off1 + sign * default_thickness
        ext2 = ext1
    else:
        ext2 = _extent(inl2_pts @ d1)

    line1 = Line2D.from_param(d1, n1 * off1, *ext1)
    line2 = Line2D.from_param(d1, n1 * off2, *ext2)
    if interior_xy is not None:
        q = np.asarray(interior_xy, dtype=np.float64)
        first_inner = abs(float(q @ n1) - off1) <= abs(float(q @ n1) - off2)
    else:
        first_inner = off1 <= off2
    inner, outer = (line1, line2) if first_inner else (line2, line1)
    return WallSegment2D(wall.wall_id, inner, outer, abs(off2 - off1))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def _point_segment_dist(p, a, b) -> float:
    ab = b - a
    t = min(1.0, max(0.0, float((p - a) @ ab) / float(ab @ ab)))
    return float(np.hypot(*(p - (a + t * ab))))


def snap_walls(walls: Sequence[WallSegment2D], snap_dist: float = 0.15,
               min_angle: float = math.radians(30.0)) -> List[WallSegment2D]:
    """Move fold endpoints onto the nearest non-parallel fold of another wall within ``snap_dist``.

    Decisions use the input geometry only, so the result does not depend on
    processing order.
    """
    folds = [(wi, f, getattr(w, f)) for wi, w in enumerate(walls) for f in ("inner", "outer")]
    moved = {}
    for wi, f, line in folds:
        d = line.direction
        new_ends = [line.start.copy(), line.end.copy()]
        for e_i, e in enumerate((line.start, line.end)):
            best = None
            for wj, g, other in folds:
                if wj == wi:
                    continue
                od = other.direction
                sin_a = abs(d[0] * od[1] - d[1] * od[0])
                if sin_a < math.sin(min_angle):
                    continue
                on = other.normal
                perp = abs(float((e - other.start) @ on))
                if perp > snap_dist:
                    continue
                a = other.start - od * snap_dist
                b = other.end + od * snap_dist
                if _point_segment_dist(e, a, b) > snap_dist:
                    continue
                # intersection of own line with the other fold's line
                t = float((other.start - e) @ on) / float(d @ on)
                x = e + t * d
                if np.hypot(*(x - e)) > snap_dist / sin_a + 1e-9:
                    continue
                if best is None or perp < best[0]:
                    best = (perp, x)
            if best is not None:
                new_ends[e_i] = best[1]
        moved[(wi, f)] = new_ends
    def rebuild(old: Line2D, s, e) -> Line2D:
        if float((e - s) @ (old.end - old.start)) <= 1e-12:
            return old
        return Line2D(s, e)

    return [WallSegment2D(w.wall_id, rebuild(w.inner, *moved[(wi, "inner")]),
                          rebuild(w.outer, *moved[(wi, "outer")]), w.thickness)
            for wi, w in enumerate(walls)]


def clip_doors(doors: Sequence[DoorOpening], walls: Sequence[WallSegment2D]) -> List[DoorOpening]:
    by_id = {w.wall_id: w for w in walls}
    out = []
    for d in doors:
        w = by_id.get(d.wall_id)
        if w is None:
            out.append(d)
            continue
        cl = w.centerline()
        axis = cl.direction
        u = float((np.asarray(d.center) - cl.start) @ axis)
        lo, hi = max(u - d.width / 2, 0.0), min(u + d.width / 2, cl.length)
        if hi <= lo:
            continue
        center = cl.start + axis * (0.5 * (lo + hi))
        u_iv = (d.u_interval[0] + (lo - (u - d.width / 2)), d.u_interval[1] - ((u + d.width / 2) - hi))
        out.append(DoorOpening(d.wall_id, u_iv, hi - lo, d.height, center))
    return out


def assemble_floorplan(walls2d: Sequence[WallSegment2D], doors: Sequence[DoorOpening], stairs,
                       snap_dist: float = 0.15, resolution: float = 0.02,
                       min_room_area: float = 1.0) -> Floorplan:
    """Close wall corners, clip doors into their walls, attach stair lines and derive rooms."""
    walls = snap_walls(walls2d, snap_dist)
    fp = Floorplan(walls=walls, doors=clip_doors(doors, walls),
                   stairs=[np.asarray(s, dtype=np.float64).reshape(-1, 2, 2) for s in stairs])
    fp.rooms = segment_rooms(fp, resolution, min_room_area)
    return fp


# ---------------------------------------------------------------------------
# Rooms
# ---------------------------------------------------------------------------


@dataclass
class RasterFrame:
    origin: np.ndarray  # world (x, y) of pixel (row 0, col 0) center
    resolution: float
    shape: tuple  # (rows, cols)

    @classmethod
    def covering(cls, pts: np.ndarray, resolution: float, pad_px: int = 3) -> "RasterFrame":
        lo = np.floor(pts.min(axis=0) / resolution) * resolution - pad_px * resolution
        hi = pts.max(axis=0) + pad_px * resolution
        cols = int(math.ceil((hi[0] - lo[0]) / resolution)) + 1
        rows = int(math.ceil((hi[1] - lo[1]) / resolution)) + 1
        return cls(lo, resolution, (rows, cols))

    def to_pixel(self, xy: np.ndarray) -> np.ndarray:
        """Continuous (row, col) coordinates."""
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        return np.stack([(xy[:, 1] - self.origin[1]) / self.resolution,
                         (xy[:, 0] - self.origin[0]) / self.resolution], axis=1)

    def to_world(self, rc: np.ndarray) -> np.ndarray:
        rc = np.asarray(rc, dtype=np.float64).reshape(-1, 2)
        return np.stack([self.origin[0] + rc[:, 1] * self.resolution,
                         self.origin[1] + rc[:, 0] * self.resolution], axis=1)


def draw_segment(mask: np.ndarray, frame: RasterFrame, a, b) -> None:
    """Bresenham stroke between the pixels nearest to ``a`` and ``b``."""
    (r0, c0), (r1, c1) = np.rint(frame.to_pixel(np.array([a, b]))).astype(np.int64)
    rr, cc = draw.line(int(r0), int(c0), int(r1), int(c1))
    ok = (rr >= 0) & (rr < mask.shape[0]) & (cc >= 0) & (cc < mask.shape[1])
    mask[rr[ok], cc[ok]] = True


def polygon_mask(shape, rc: np.ndarray) -> np.ndarray:
    """Even-odd scanline fill of pixel centers inside the ``(row, col)`` polygon ``rc``.

    Edges are half-open in the row direction so shared vertices count once.
    Cost is linear in the number of edge/row crossings.
    """
    rows, cols = shape
    out = np.zeros(shape, dtype=bool)
    a = np.asarray(rc, dtype=np.float64)
    b = np.roll(a, -1, axis=0)
    lo = np.minimum(a[:, 0], b[:, 0])
    hi = np.maximum(a[:, 0], b[:, 0])
    r0 = np.maximum(np.ceil(lo), 0).astype(np.int64)
    r1 = np.minimum(np.ceil(hi) - 1, rows - 1).astype(np.int64)  # rows r with lo <= r < hi
    span = np.maximum(r1 - r0 + 1, 0)
    if span.sum() == 0:
        return out
    e = np.repeat(np.arange(len(a)), span)
    r = np.repeat(r0, span) + (np.arange(span.sum()) - np.repeat(np.cumsum(span) - span, span))
    t = (r - a[e, 0]) / (b[e, 0] - a[e, 0])
    x = a[e, 1] + t * (b[e, 1] - a[e, 1])
    order = np.lexsort((x, r))
    r, x = r[order], x[order]
    # crossings come in pairs per row under the even-odd rule
    ra, xa, xb = r[0::2], x[0::2], x[1::2]
    ca = np.clip(np.ceil(xa), 0, cols).astype(np.int64)
    cb = np.clip(np.floor(xb) + 1, 0, cols).astype(np.int64)
    ok = cb > ca
    diff = np.zeros((rows, cols + 1), dtype=np.int32)
    np.add.at(diff, (ra[ok], ca[ok]), 1)
    np.add.at(diff, (ra[ok], cb[ok]), -1)
    return np.cumsum(diff, axis=1)[:, :cols] > 0


def fill_polygon(mask: np.ndarray, frame: RasterFrame, poly: np.ndarray, value: bool = True) -> None:
    mask[polygon_mask(mask.shape, frame.to_pixel(poly))] = value


def wall_mask(fp: Floorplan, frame: RasterFrame) -> np.ndarray:
    """Wall solids (filled outlines plus their edges) with door closures."""
    mask = np.zeros(frame.shape, dtype=bool)
    for w in fp.walls:
        q = w.outline()
        fill_polygon(mask, frame, q)
        for i in range(4):
            draw_segment(mask, frame, q[i], q[(i + 1) % 4])
    for s in fp.door_segments():
        draw_segment(mask, frame, s[0], s[1])
    return mask


def _trace(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask.astype(np.float64), 1)
    contours = measure.find_contours(padded, 0.5)
    c = max(contours, key=len)
    c = measure.approximate_polygon(c, tolerance=0.5)
    if len(c) > 1 and np.allclose(c[0], c[-1]):
        c = c[:-1]
    return c - 1.0


def segment_rooms(fp: Floorplan, resolution: float = 0.02, min_room_area: float = 1.0) -> List[Room]:
    """Enclosed free-space components of the wall raster, traced to polygons."""
    if not fp.walls:
        return []
    pts = np.concatenate([w.outline() for w in fp.walls])
    frame = RasterFrame.covering(pts, resolution)
    blocked = wall_mask(fp, frame)
    labels, n = ndimage.label(~blocked)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    min_px = min_room_area / (resolution * resolution)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    rooms = []
    slices = ndimage.find_objects(labels)
    for k in range(1, n + 1):
        if k in border or sizes[k] < min_px:
            continue
        sl = slices[k - 1]
        comp = labels[sl] == k
        off = np.array([sl[0].start, sl[1].start], dtype=np.float64)
        filled = ndimage.binary_fill_holes(comp)
        exterior = frame.to_world(_trace(filled) + off)
        holes = []
        hl, nh = ndimage.label(filled & ~comp)
        for h in range(1, nh + 1):
            holes.append(frame.to_world(_trace(hl == h) + off))
        rooms.append(Room(exterior, holes))
    return rooms


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _svg(fp: Floorplan) -> str:
    pts = fp.all_points()
    if len(pts) == 0:
        pts = np.zeros((1, 2))
    lo, hi = pts.min(axis=0) - 0.5, pts.max(axis=0) + 0.5

    def xy(p):
        return f'{100 * p[0]:.2f}', f'{-100 * p[1]:.2f}'

    def line(a, b, extra=""):
        (x1, y1), (x2, y2) = xy(a), xy(b)
        return f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"{extra}/>'

    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{100 * lo[0]:.2f} {-100 * hi[1]:.2f} {100 * (hi[0] - lo[0]):.2f} {100 * (hi[1] - lo[1]):.2f}">',
        '<g id="rooms" fill="#eef3f8" stroke="#9ab" stroke-width="1">',
    ]
    for r in fp.rooms:
        rings = [r.exterior] + list(r.holes)
        d = " ".join("M " + " L ".join(" ".join(xy(p)) for p in ring) + " Z" for ring in rings)
        out.append(f'<path fill-rule="evenodd" d="{d}"/>')
    out.append("</g>")
    out.append('<g id="walls" stroke="#222" stroke-width="2">')
    for w in fp.walls:
        out.append(line(w.inner.start, w.inner.end))
        out.append(line(w.outer.start, w.outer.end))
    out.append("</g>")
    out.append('<g id="doors" stroke="#c33" stroke-width="3" stroke-dasharray="6 4">')
    for s in fp.door_segments():
        out.append(line(s[0], s[1]))
    out.append("</g>")
    out.append('<g id="stairs" stroke="#36c" stroke-width="1.5">')
    for run in fp.stairs:
        for a, b in np.asarray(run).reshape(-1, 2, 2):
            out.append(line(a, b))
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_floorplan(fp: Floorplan, format: str = "json") -> bytes:
    if format == "json":
        return (json.dumps(fp.to_json(), separators=(",", ":")) + "\n").encode("utf-8")
    if format == "svg":
        return _svg(fp).encode("utf-8")
    raise ValueError(f"unknown export format {format!r}")


def write_floorplan(fp: Floorplan, path, format: Optional[str] = None) -> None:
    path = Path(path)
    format = format or ("svg" if path.suffix.lower() == ".svg" else "json")
    path.write_bytes(export_floorplan(fp, format))


def read_floorplan(path) -> Floorplan:
    return Floorplan.from_json(Path(path).read_text())
