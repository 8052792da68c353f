"""Door openings as empty rectangles in the (along-wall, height) grid of a wall."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .pcio import LabeledPointCloud
from .preprocess import FloorCeilingLevels
from .walls import WallInstance


@dataclass
class WallGrid:
    wall_id: int
    u_axis: np.ndarray
    origin: np.ndarray
    cell: float
    occupancy: np.ndarray  # (u_bins, v_bins) point counts, v measured from z_floor
    u: np.ndarray
    v: np.ndarray

    @property
    def u_bins(self) -> int:
        return self.occupancy.shape[0]

    @property
    def v_bins(self) -> int:
        return self.occupancy.shape[1]


@dataclass
class DoorBounds:
    w_min: float = 0.6
    w_max: float = 1.6
    h_min: float = 1.8
    h_max: float = 2.4
    a_min: float = 1.2
    a_max: float = 3.5


@dataclass
class DoorOpening:
    wall_id: int
    u_interval: tuple
    width: float
    height: float
    center: np.ndarray

    def to_json(self) -> dict:
        return {
            "wall_id": int(self.wall_id),
            "center": [float(self.center[0]), float(self.center[1])],
            "width": float(self.width),
            "height": float(self.height),
            "u_interval": [float(self.u_interval[0]), float(self.u_interval[1])],
        }

    @classmethod
    def from_json(cls, d: dict) -> "DoorOpening":
        w = float(d["width"])
        u = d.get("u_interval", [0.0, w])
        return cls(int(d["wall_id"]), (float(u[0]), float(u[1])), w, float(d["height"]),
                   np.asarray(d["center"], dtype=np.float64))


def build_wall_grid(wall: WallInstance, cloud: LabeledPointCloud, levels: FloorCeilingLevels,
                    cell: float = 0.05) -> WallGrid:
    """Project wall points onto ``(u, v)`` and count them per cell.

    Points farther than ``3 * inlier_rms + 2 cm`` from the wall plane (open
    door leaves, clutter leaning on the wall) are left out of the grid.
    """
    pts = cloud.positions[wall.point_indices]
    n2 = wall.normal[:2]
    dist = np.abs(pts[:, :2] @ n2 - wall.offset)
    pts = pts[dist <= 3.0 * wall.inlier_rms + 0.02]
    axis = wall.direction
    foot = n2 * wall.offset
    u_all = (pts[:, :2] - foot) @ axis
    u_min = float(u_all.min()) if len(u_all) else 0.0
    origin = foot + axis * u_min
    u = u_all - u_min
    v = pts[:, 2] - levels.z_floor
    u_bins = max(1, int(math.floor(float(u.max()) / cell)) + 1) if len(u) else 1
    v_top = max(levels.z_ceiling - levels.z_floor, float(v.max()) if len(v) else 0.0)
    v_bins = max(1, int(math.floor(v_top / cell)) + 1)
    inside = v >= 0
    u, v = u[inside], v[inside]
    iu = np.minimum((u / cell).astype(np.int64), u_bins - 1)
    iv = np.minimum((v / cell).astype(np.int64), v_bins - 1)
    occ = np.zeros((u_bins, v_bins), dtype=np.int64)
    np.add.at(occ, (iu, iv), 1)
    return WallGrid(wall.wall_id, axis, origin, cell, occ, u, v)


def find_empty_openings(grid: WallGrid, min_clear_height: float = 1.8,
                        keep_boundary: bool = False) -> List[tuple]:
    """Maximal runs of columns that are empty from the floor up to ``min_clear_height``.

    Returns ``(u_lo, u_hi, height)`` tuples. The run edges are refined from the
    nearest occupied points on either side, so widths are not quantized to
    the cell size.
    """
    occ = grid.occupancy
    cell = grid.cell
    n_clear = min(occ.shape[1], int(math.ceil(min_clear_height / cell - 1e-9)))
    clear = occ[:, :n_clear].sum(axis=1) == 0
    nonzero = occ > 0
    first_occ = np.where(nonzero.any(axis=1), np.argmax(nonzero, axis=1), occ.shape[1])
    out = []
    i = 0
    n = len(clear)
    while i < n:
        if not clear[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and clear[j + 1]:
            j += 1
        touches = i == 0 or j == n - 1
        if keep_boundary or not touches:
            height = float(first_occ[i:j + 1].min()) * cell
            low = grid.v < min(height, min_clear_height)
            left = grid.u[low & (grid.u < i * cell)]
            right = grid.u[low & (grid.u >= (j + 1) * cell)]
            u_lo = float(left.max()) if left.size else i * cell
            u_hi = float(right.min()) if right.size else (j + 1) * cell
            out.append((u_lo, u_hi, height))
        i = j + 1
    return out


def parametric_filter_doors(candidates, grid: WallGrid, bounds: DoorBounds = DoorBounds()) -> List[DoorOpening]:
    doors = []
    for u_lo, u_hi, h in candidates:
        w = u_hi - u_lo
        if w <= 0:
            continue
        if not (bounds.w_min <= w <= bounds.w_max and bounds.h_min <= h <= bounds.h_max):
            continue
        if not bounds.a_min <= h / w <= bounds.a_max:
            continue
        center = grid.origin + grid.u_axis * (0.5 * (u_lo + u_hi))
        doors.append(DoorOpening(grid.wall_id, (u_lo, u_hi), w, h, center))
    return doors


def detect_doors(walls, cloud: LabeledPointCloud, levels: FloorCeilingLevels, cell: float = 0.05,
                 min_clear_height: float = 1.8, bounds: DoorBounds = DoorBounds()) -> List[DoorOpening]:
    """Run the grid/opening/filter chain over every wall, concatenated by wall id."""
    doors = []
    for wall in sorted(walls, key=lambda w: w.wall_id):
        grid = build_wall_grid(wall, cloud, levels, cell)
        doors.extend(parametric_filter_doors(find_empty_openings(grid, min_clear_height), grid, bounds))
    return doors
