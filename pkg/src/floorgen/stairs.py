"""Stairway detection from alternating riser and tread patches."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .pcio import LabeledPointCloud, NormalField, SemanticClass
from .preprocess import FloorCeilingLevels
from .walls import fit_vertical_plane, region_grow


@dataclass
class StairParams:
    riser_min: float = 0.10
    riser_max: float = 0.22
    tread_min: float = 0.22
    tread_max: float = 0.40
    min_steps: int = 3
    uniformity: float = 0.03
    normal_tol: float = math.radians(15.0)
    patch_radius: float = 0.06
    patch_min_points: int = 15
    plane_gather: float = 0.015
    z_match: float = 0.04
    link_dist: float = 0.6
    max_width: float = 3.0


@dataclass
class TreadPatch:
    indices: np.ndarray
    z: float
    centroid: np.ndarray


@dataclass
class RiserPatch:
    indices: np.ndarray
    normal: np.ndarray  # 2D
    offset: float
    z_lo: float
    z_hi: float
    centroid: np.ndarray


@dataclass
class StairStep:
    tread_z: float
    riser_u: float
    tread_depth: float
    riser_height: float


@dataclass
class StairRun:
    direction: np.ndarray
    origin: np.ndarray
    steps: List[StairStep]
    lateral: tuple
    footprint: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.footprint is None:
            self.footprint = self._footprint()

    def _to_plan(self, u, l):
        perp = np.array([-self.direction[1], self.direction[0]])
        return self.origin + np.outer(u, self.direction) + np.outer(l, perp)

    def _footprint(self) -> np.ndarray:
        u0 = self.steps[0].riser_u
        u1 = self.steps[-1].riser_u + self.steps[-1].tread_depth
        l0, l1 = self.lateral
        return self._to_plan(np.array([u0, u1, u1, u0]), np.array([l0, l0, l1, l1]))

    def lines(self) -> List[np.ndarray]:
        """One plan line per riser (which is also the tread front edge) plus the last tread's back edge."""
        us = [s.riser_u for s in self.steps] + [self.steps[-1].riser_u + self.steps[-1].tread_depth]
        l0, l1 = self.lateral
        return [self._to_plan(np.array([u, u]), np.array([l0, l1])) for u in us]


def detect_stair_patches(cloud: LabeledPointCloud, normals: NormalField, levels: FloorCeilingLevels,
                         params: StairParams = StairParams(), use_labels: bool = True):
    """Cluster near-horizontal (tread) and near-vertical (riser) surfaces into small patches.

    Returns ``(treads, risers)``.
    """
    pos = cloud.positions
    z = pos[:, 2]
    between = (z > levels.z_floor + levels.slab_tolerance) & (z < levels.z_ceiling - levels.slab_tolerance)
    if use_labels and cloud.labels is not None:
        pool = cloud.labels == int(SemanticClass.STAIR)
    else:
        pool = (np.abs(z - levels.z_floor) > levels.slab_tolerance) & \
               (np.abs(z - levels.z_ceiling) > levels.slab_tolerance)
    pool &= ~normals.degenerate
    nz = np.abs(normals.normals[:, 2])
    tread_cand = np.flatnonzero(pool & between & (nz >= math.cos(params.normal_tol)))
    riser_cand = np.flatnonzero(pool & (nz <= math.sin(params.normal_tol)))
    pool_idx = np.flatnonzero(pool)

    treads = []
    for idx in region_grow(tread_cand, cloud, None, normals, params.normal_tol, params.patch_radius,
                           params.patch_min_points):
        p = pos[idx]
        xy = p[:, :2] - p[:, :2].mean(axis=0)
        w = np.linalg.eigvalsh(xy.T @ xy / len(xy))
        depth = math.sqrt(12.0 * max(w[0], 0.0))
        width = math.sqrt(12.0 * max(w[1], 0.0))
        if depth > params.tread_max + 0.1 or width > params.max_width:
            continue
        treads.append(TreadPatch(idx, float(np.median(p[:, 2])), p.mean(axis=0)))

    risers = []
    pool_pos = pos[pool_idx]
    for idx in region_grow(riser_cand, cloud, None, normals, params.normal_tol, params.patch_radius,
                           params.patch_min_points):
        p = pos[idx]
        n2, off, _ = fit_vertical_plane(p[:, :2])
        axis = np.array([-n2[1], n2[0]])
        lat = p[:, :2] @ axis
        if lat.max() - lat.min() > params.max_width:
            continue
        # gather the full riser face (edges have blurred normals)
        near = np.abs(pool_pos[:, :2] @ n2 - off) <= params.plane_gather
        plat = pool_pos[:, :2] @ axis
        near &= (plat >= lat.min()) & (plat <= lat.max())
        near &= (pool_pos[:, 2] >= p[:, 2].min() - params.riser_max) & \
                (pool_pos[:, 2] <= p[:, 2].max() + params.riser_max)
        # a bent patch may sit off its own fitted plane; its points always count
        zz = np.concatenate([pool_pos[near, 2], p[:, 2]])
        z_lo, z_hi = float(zz.min()), float(zz.max())
        if z_hi - z_lo > params.riser_max + 0.03:
            continue
        risers.append(RiserPatch(idx, n2, off, z_lo, z_hi, p.mean(axis=0)))
    return treads, _merge_risers(risers, pos, params)


def _merge_risers(risers, pos, params: StairParams) -> List[RiserPatch]:
    """Fuse fragments of one riser face: same plane, overlapping heights, laterally adjacent."""
    out = []
    cos_t = math.cos(params.normal_tol)
    for r in sorted(risers, key=lambda r: (-len(r.indices), int(r.indices[0]))):
        for k, m in enumerate(out):
            dot = float(r.normal @ m.normal)
            if abs(dot) < cos_t:
                continue
            off = r.offset if dot > 0 else -r.offset
            overlap = min(r.z_hi, m.z_hi) - max(r.z_lo, m.z_lo)
            if abs(off - m.offset) > 2 * params.plane_gather or overlap < 0.5 * min(r.z_hi - r.z_lo, m.z_hi - m.z_lo):
                continue
            axis = np.array([-m.normal[1], m.normal[0]])
            la, lb = pos[m.indices, :2] @ axis, pos[r.indices, :2] @ axis
            if max(la.min(), lb.min()) - min(la.max(), lb.max()) > params.link_dist:
                continue
            idx = np.union1d(m.indices, r.indices)
            n2, o2, _ = fit_vertical_plane(pos[idx, :2])
            out[k] = RiserPatch(idx, n2, o2, min(m.z_lo, r.z_lo), max(m.z_hi, r.z_hi), pos[idx].mean(axis=0))
            break
        else:
            out.append(r)
    return out


def _group_patches(treads, risers, link_dist):
    items = [("t", t) for t in treads] + [("r", r) for r in risers]
    if not items:
        return []
    cents = np.array([it[1].centroid for it in items])
    ds = DisjointSet(range(len(items)))
    d = np.linalg.norm(cents[:, None, :] - cents[None, :, :], axis=2)
    for i, j in zip(*np.nonzero(np.triu(d <= link_dist, 1))):
        ds.merge(int(i), int(j))
    groups = []
    for members in sorted(sorted(sub) for sub in ds.subsets()):
        groups.append(([items[i][1] for i in members if items[i][0] == "t"],
                       [items[i][1] for i in members if items[i][0] == "r"]))
    return groups


def _longest_chain(steps, ok):
    n = len(steps)
    best = [1] * n
    prev = [-1] * n
    for j in range(n):
        for i in range(j):
            if ok(steps[i], steps[j]) and best[i] + 1 > best[j]:
                best[j] = best[i] + 1
                prev[j] = i
    j = int(np.argmax(best))
    chain = []
    while j >= 0:
        chain.append(j)
        j = prev[j]
    return chain[::-1]


def _chain_group(treads, risers, cloud, params: StairParams) -> List[StairRun]:
    if len(risers) < params.min_steps or len(treads) < params.min_steps:
        return []
    pos = cloud.positions
    cents = np.array([p.centroid for p in treads + risers])
    center = cents[:, :2].mean(axis=0)
    rc = np.array([r.centroid[:2] for r in risers]) - center
    w, v = np.linalg.eigh(rc.T @ rc)
    direction = v[:, 1]
    rz = np.array([0.5 * (r.z_lo + r.z_hi) for r in risers])
    if np.sum((rc @ direction - (rc @ direction).mean()) * (rz - rz.mean())) < 0:
        direction = -direction
    perp = np.array([-direction[1], direction[0]])

    cos_dir = math.cos(math.radians(20.0))
    risers = [r for r in risers if abs(float(r.normal @ direction)) >= cos_dir]
    used = set()
    steps = []
    for r in sorted(risers, key=lambda r: float((r.centroid[:2] - center) @ direction)):
        ru = float((r.centroid[:2] - center) @ direction)
        best, best_dz = None, None
        for ti, t in enumerate(treads):
            if ti in used:
                continue
            tu = float((t.centroid[:2] - center) @ direction)
            dz = abs(t.z - r.z_hi)
            if dz <= params.z_match and 0.0 < tu - ru <= params.tread_max and (best is None or dz < best_dz):
                best, best_dz = ti, dz
        if best is None:
            continue
        used.add(best)
        t = treads[best]
        tp = pos[t.indices, :2] - center
        steps.append(dict(
            riser_u=ru, tread_z=t.z, z_lo=r.z_lo,
            depth_end=float(np.percentile(tp @ direction, 99.0)),
            lat=np.concatenate([tp @ perp, (pos[r.indices, :2] - center) @ perp]),
        ))

    def ok(a, b):
        dz = b["tread_z"] - a["tread_z"]
        du = b["riser_u"] - a["riser_u"]
        return params.riser_min <= dz <= params.riser_max and params.tread_min <= du <= params.tread_max

    runs = []
    remaining = steps
    while len(remaining) >= params.min_steps:
        chain = [remaining[i] for i in _longest_chain(remaining, ok)]
        if len(chain) < params.min_steps:
            break
        remaining = [s for s in remaining if not any(s is c for c in chain)]
        heights = [chain[0]["tread_z"] - chain[0]["z_lo"]] + \
                  [b["tread_z"] - a["tread_z"] for a, b in zip(chain, chain[1:])]
        depths = [b["riser_u"] - a["riser_u"] for a, b in zip(chain, chain[1:])] + \
                 [chain[-1]["depth_end"] - chain[-1]["riser_u"]]
        med = float(np.median(heights))
        good = [abs(h - med) <= params.uniformity and params.riser_min <= h <= params.riser_max
                and params.tread_min <= d <= params.tread_max for h, d in zip(heights, depths)]
        # longest contiguous uniform stretch
        best_lo, best_len, lo = 0, 0, None
        for i, g in enumerate(good + [False]):
            if g and lo is None:
                lo = i
            elif not g and lo is not None:
                if i - lo > best_len:
                    best_lo, best_len = lo, i - lo
                lo = None
        chain = chain[best_lo:best_lo + best_len]
        heights = heights[best_lo:best_lo + best_len]
        depths = depths[best_lo:best_lo + best_len]
        if len(chain) < params.min_steps:
            continue
        out_steps = [StairStep(float(s["tread_z"]), float(s["riser_u"]), float(d), float(h))
                     for s, h, d in zip(chain, heights, depths)]
        lat = np.concatenate([s["lat"] for s in chain])
        runs.append(StairRun(direction, center, out_steps, (float(np.percentile(lat, 1.0)),
                                                             float(np.percentile(lat, 99.0)))))
    return runs


def chain_steps(treads, risers, cloud: LabeledPointCloud, params: StairParams = StairParams()) -> List[StairRun]:
    """Group nearby patches, re-center each group and chain risers/treads into runs."""
    runs = []
    for g_treads, g_risers in _group_patches(treads, risers, params.link_dist):
        runs.extend(_chain_group(g_treads, g_risers, cloud, params))
    runs.sort(key=lambda r: (float(r.footprint[:, 0].mean()), float(r.footprint[:, 1].mean())))
    return runs


def detect_stairs(cloud: LabeledPointCloud, normals: NormalField, levels: FloorCeilingLevels,
                  params: Optional[StairParams] = None, use_labels: bool = True) -> List[StairRun]:
    params = params or StairParams()
    treads, risers = detect_stair_patches(cloud, normals, levels, params, use_labels)
    return chain_steps(treads, risers, cloud, params)
