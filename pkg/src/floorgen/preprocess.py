"""Coordinate normalization, statistical outlier removal and slab detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloud, NoPeaksFound, NonPositiveBinSize, TooFewPoints
from .pcio import LabeledPointCloud, SpatialIndex, build_spatial_index, estimate_normals


@dataclass(frozen=True)
class RigidTransform2D5:
    """Translation plus rotation about z.

    ``translation`` is the offset added to original coordinates before the
    rotation by ``-theta``; :meth:`to_original` is the exact inverse, mapping
    normalized coordinates back to the input frame.
    """

    translation: tuple = (0.0, 0.0, 0.0)
    theta: float = 0.0

    def _rot(self, pts, angle):
        c, s = math.cos(angle), math.sin(angle)
        x, y = pts[..., 0], pts[..., 1]
        out = np.array(pts, dtype=np.float64, copy=True)
        out[..., 0] = c * x - s * y
        out[..., 1] = s * x + c * y
        return out

    def to_normalized(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        t = np.asarray(self.translation[: pts.shape[-1]])
        return self._rot(pts + t, -self.theta)

    def to_original(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        t = np.asarray(self.translation[: pts.shape[-1]])
        return self._rot(pts, self.theta) - t


def dominant_orientation(cloud: LabeledPointCloud, k: int = 16, max_points: int = 50_000,
                         horizontal_tol: float = math.radians(30.0)) -> float:
    """Mode of horizontal-normal azimuths folded modulo 90 degrees.

    Returns an angle in ``(-pi/4, pi/4]``; 0 when the cloud has no clear
    dominant direction.
    """
    n = len(cloud)
    if n < max(k, 10):
        return 0.0
    # subsample the query points only; neighbourhoods keep the full density
    sel = np.linspace(0, n - 1, max_points).astype(np.int64) if n > max_points else None
    normals = estimate_normals(cloud, build_spatial_index(cloud), k=k, query=sel).normals
    horiz = np.abs(normals[:, 2]) <= math.sin(horizontal_tol)
    if horiz.sum() < 10:
        return 0.0
    phi = np.arctan2(normals[horiz, 1], normals[horiz, 0])
    psi = np.mod(4.0 * phi, 2 * math.pi)
    nbins = 360
    counts, _ = np.histogram(psi, bins=nbins, range=(0.0, 2 * math.pi))
    window = 2
    padded = np.concatenate([counts[-window:], counts, counts[:window]])
    smooth = np.convolve(padded, np.ones(2 * window + 1), mode="valid")
    mode = int(np.argmax(smooth))
    if smooth[mode] < 3.0 * (2 * window + 1) * counts.mean():
        return 0.0
    center = (mode + 0.5) * 2 * math.pi / nbins
    dpsi = np.angle(np.exp(1j * (psi - center)))
    near = np.abs(dpsi) <= (window + 0.5) * 2 * math.pi / nbins
    mean = center + float(np.mean(dpsi[near]))
    theta = math.atan2(math.sin(mean), math.cos(mean)) / 4.0
    if theta <= -math.pi / 4:
        theta += math.pi / 2
    return theta


def normalize_coordinates(cloud: LabeledPointCloud, align: bool = True, k: int = 16):
    """Center xy on the centroid, put the 1st-percentile z at 0, align walls with x.

    Returns ``(normalized_cloud, transform)``.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot normalize an empty cloud")
    pos = cloud.positions
    cx, cy = pos[:, 0].mean(), pos[:, 1].mean()
    z0 = float(np.percentile(pos[:, 2], 1.0))
    theta = dominant_orientation(cloud, k=k) if align else 0.0
    tf = RigidTransform2D5((-float(cx), -float(cy), -z0), float(theta))
    return cloud.with_positions(tf.to_normalized(pos)), tf


def outlier_mask(cloud: LabeledPointCloud, index: SpatialIndex, k: int = 8,
                 std_ratio: float = 3.0) -> np.ndarray:
    """Boolean keep-mask of the statistical kNN outlier filter."""
    n = len(cloud)
    if n <= k:
        raise TooFewPoints(f"need more than k={k} points, got {n}")
    if math.isinf(std_ratio) and std_ratio > 0:
        return np.ones(n, dtype=bool)
    d, _ = index.knn_all(k + 1)
    mean_d = d[:, 1:].mean(axis=1)
    mu, sd = mean_d.mean(), mean_d.std()
    thresh = mu + std_ratio * sd
    # relative slack absorbs rounding when all distances are equal
    return mean_d <= thresh + 1e-12 * max(abs(thresh), 1.0)


def remove_statistical_outliers(cloud: LabeledPointCloud, index: SpatialIndex, k: int = 8,
                                std_ratio: float = 3.0) -> LabeledPointCloud:
    return cloud.subset(outlier_mask(cloud, index, k, std_ratio))


@dataclass
class ZHistogram:
    bin_size: float
    z_min: float
    counts: np.ndarray

    def center(self, i: int) -> float:
        return self.z_min + (i + 0.5) * self.bin_size


def compute_z_histogram(cloud: LabeledPointCloud, bin_size: float = 0.05) -> ZHistogram:
    if len(cloud) == 0:
        raise EmptyCloud("cannot histogram an empty cloud")
    if not bin_size > 0:
        raise NonPositiveBinSize(f"bin_size must be > 0, got {bin_size}")
    z = cloud.positions[:, 2]
    z_min = float(z.min())
    nbins = int(math.floor((float(z.max()) - z_min) / bin_size)) + 1
    idx = np.minimum(np.floor((z - z_min) / bin_size).astype(np.int64), nbins - 1)
    counts = np.bincount(idx, minlength=nbins)
    return ZHistogram(bin_size, z_min, counts)


@dataclass(frozen=True)
class FloorCeilingLevels:
    z_floor: float
    z_ceiling: float
    slab_tolerance: float

    @property
    def story_height(self) -> float:
        return self.z_ceiling - self.z_floor


def detect_floor_ceiling(hist: ZHistogram, peak_prominence: float = 0.3,
                         min_story_height: float = 1.5, window: int = 3,
                         median_contrast: float = 3.0) -> FloorCeilingLevels:
    """Lowest prominent z peak is the floor; highest peak at least a story above is the ceiling.

    A peak must reach ``peak_prominence * max(counts)``, be the maximum of its
    ``+-window`` neighbourhood and exceed ``median_contrast`` times the median
    bin count, so a flat histogram (walls only) has no peaks.
    """
    counts = np.asarray(hist.counts)
    if counts.size == 0 or counts.sum() == 0:
        raise NoPeaksFound("empty histogram")
    thresh = max(peak_prominence * counts.max(), median_contrast * float(np.median(counts)))
    peaks = []
    for i in range(counts.size):
        lo, hi = max(0, i - window), min(counts.size, i + window + 1)
        if counts[i] > 0 and counts[i] >= thresh and counts[i] >= counts[lo:hi].max():
            peaks.append(i)
    if not peaks:
        raise NoPeaksFound("no prominent peaks")
    z_floor = hist.center(peaks[0])
    above = [i for i in peaks if hist.center(i) - z_floor >= min_story_height - 1e-9]
    if not above:
        raise NoPeaksFound(f"no ceiling peak at least {min_story_height} m above the floor")
    return FloorCeilingLevels(z_floor, hist.center(above[-1]), 2.0 * hist.bin_size)


def levels_from_percentiles(cloud: LabeledPointCloud, slab_tolerance: float = 0.1) -> FloorCeilingLevels:
    """Fallback levels from the 1st and 99th z percentiles."""
    z = cloud.positions[:, 2]
    lo, hi = np.percentile(z, [1.0, 99.0])
    return FloorCeilingLevels(float(lo), float(hi), slab_tolerance)


def detect_levels(cloud: LabeledPointCloud, bin_size: float = 0.05, peak_prominence: float = 0.3,
                  min_story_height: float = 1.5, median_contrast: float = 3.0):
    """Histogram-based levels with the percentile fallback; returns ``(levels, used_fallback)``."""
    hist = compute_z_histogram(cloud, bin_size)
    try:
        return detect_floor_ceiling(hist, peak_prominence, min_story_height,
                                    median_contrast=median_contrast), False
    except NoPeaksFound:
        return levels_from_percentiles(cloud, 2.0 * bin_size), True
