"""Wall instance segmentation: normal filtering, region growing, parametric filtering."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree

from .pcio import LabeledPointCloud, NormalField, SemanticClass, SpatialIndex
from .preprocess import FloorCeilingLevels


@dataclass
class WallInstance:
    """A vertical plane ``normal . p = offset`` fitted to a wall cluster."""

    wall_id: int
    point_indices: np.ndarray
    normal: np.ndarray  # (nx, ny, 0)
    offset: float
    z_extent: tuple
    centroid: np.ndarray
    inlier_rms: float

    @property
    def direction(self) -> np.ndarray:
        """Unit 2D direction along the wall line."""
        return np.array([-self.normal[1], self.normal[0]])

    def to_json(self) -> dict:
        return {
            "id": self.wall_id,
            "normal": [float(v) for v in self.normal],
            "offset": float(self.offset),
            "z_extent": [float(v) for v in self.z_extent],
            "centroid": [float(v) for v in self.centroid],
            "inlier_rms": float(self.inlier_rms),
            "count": int(len(self.point_indices)),
        }


def filter_wall_candidates(cloud: LabeledPointCloud, normals: NormalField,
                           vertical_tolerance: float = math.radians(10.0),
                           use_labels: bool = True) -> np.ndarray:
    """Indices of points whose normal is horizontal within ``vertical_tolerance``.

    With ``use_labels`` and a labeled cloud only Wall points are considered.
    """
    ok = np.abs(normals.normals[:, 2]) <= math.sin(vertical_tolerance)
    ok &= ~normals.degenerate
    if use_labels and cloud.labels is not None:
        ok &= cloud.labels == int(SemanticClass.WALL)
    return np.flatnonzero(ok)


def region_grow(candidates, cloud: LabeledPointCloud, index: Optional[SpatialIndex], normals: NormalField,
                angle_thresh: float = math.radians(15.0), radius: float = 0.15,
                min_cluster: int = 100) -> List[np.ndarray]:
    """Grow clusters from seeds taken in ascending candidate index order.

    A candidate joins the current cluster when it lies within ``radius`` of a
    member and its normal is within ``angle_thresh`` of the seed normal
    (``n`` and ``-n`` count as equal). Every visited candidate is consumed,
    including members of clusters later dropped for being smaller than
    ``min_cluster``. Output is sorted by size (descending) then seed index.
    """
    cand = np.unique(np.asarray(candidates, dtype=np.int64))
    if cand.size == 0:
        return []
    pos = cloud.positions[cand]
    nrm = normals.normals[cand]
    if index is not None and cand.size == index.n:
        tree = index._tree
    else:
        tree = cKDTree(pos, balanced_tree=False, compact_nodes=False)
    r2 = radius * radius
    r_query = radius * (1 + 1e-9) + 1e-12
    cos_t = math.cos(angle_thresh)
    assigned = np.zeros(cand.size, dtype=bool)
    found = []
    for seed in range(cand.size):
        if assigned[seed]:
            continue
        seed_n = nrm[seed]
        assigned[seed] = True
        members = [np.array([seed])]
        frontier = members[0]
        while frontier.size:
            res = tree.query_ball_point(pos[frontier], r_query, return_sorted=False)
            lens = np.fromiter(map(len, res), dtype=np.int64, count=len(res))
            flat = np.fromiter(itertools.chain.from_iterable(res), dtype=np.int64, count=int(lens.sum()))
            owner = np.repeat(frontier, lens)
            keep = ~assigned[flat]
            flat, owner = flat[keep], owner[keep]
            d = pos[flat] - pos[owner]
            keep = ((d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]) + d[:, 2] * d[:, 2]) <= r2
            flat = flat[keep]
            flat = flat[np.abs(nrm[flat] @ seed_n) >= cos_t]
            frontier = np.unique(flat)
            assigned[frontier] = True
            members.append(frontier)
        cluster = np.concatenate(members)
        if cluster.size >= min_cluster:
            found.append((seed, np.sort(cand[cluster])))
    found.sort(key=lambda sc: (-sc[1].size, sc[0]))
    return [c for _, c in found]


def fit_vertical_plane(xy: np.ndarray):
    """Orthogonal least-squares line through ``xy``; returns ``(normal2d, offset, rms)``."""
    c = xy.mean(axis=0)
    d = xy - c
    cov = d.T @ d
    w, v = np.linalg.eigh(cov)
    n = v[:, 0]
    if abs(n[1]) > 1e-9:
        if n[1] < 0:
            n = -n
    elif n[0] < 0:
        n = -n
    offset = float(n @ c)
    res = xy @ n - offset
    return n, offset, float(np.sqrt(np.mean(res * res)))


def parametric_filter_walls(clusters, cloud: LabeledPointCloud, levels: FloorCeilingLevels,
                            min_points: int = 500, min_height_fraction: float = 0.5) -> List[WallInstance]:
    """Keep clusters that are big and tall enough and fit a vertical plane to each."""
    story = levels.z_ceiling - levels.z_floor
    walls = []
    for idx in clusters:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size < max(min_points, 2):
            continue
        pts = cloud.positions[idx]
        z_lo, z_hi = float(pts[:, 2].min()), float(pts[:, 2].max())
        if z_hi - z_lo < min_height_fraction * story or z_hi <= z_lo:
            continue
        n2, offset, rms = fit_vertical_plane(pts[:, :2])
        walls.append(WallInstance(
            wall_id=len(walls),
            point_indices=idx,
            normal=np.array([n2[0], n2[1], 0.0]),
            offset=offset,
            z_extent=(z_lo, z_hi),
            centroid=pts.mean(axis=0),
            inlier_rms=rms,
        ))
    return walls
