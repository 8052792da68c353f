"""Point cloud data model, file I/O, spatial indexing and normal estimation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud, ParseError, UnsupportedFormat


class SemanticClass(enum.IntEnum):
    CEILING = 0
    FLOOR = 1
    WALL = 2
    DOOR = 3
    STAIR = 4
    CLUTTER = 5


N_CLASSES = len(SemanticClass)


@dataclass
class LabeledPointCloud:
    """Positions with optional per-point colors and semantic labels.

    ``positions`` is ``(N, 3)`` float64 in meters, ``colors`` ``(N, 3)`` uint8,
    ``labels`` ``(N,)`` int8 holding :class:`SemanticClass` values.
    """

    positions: np.ndarray
    colors: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions contain non-finite values")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(self.colors) != n:
                raise ValueError(f"{len(self.colors)} colors for {n} points")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)
            if len(self.labels) != n:
                raise ValueError(f"{len(self.labels)} labels for {n} points")
            if n and (self.labels.min() < 0 or self.labels.max() >= N_CLASSES):
                raise ValueError("labels outside SemanticClass range")

    def __len__(self) -> int:
        return len(self.positions)

    def subset(self, sel) -> "LabeledPointCloud":
        """Return the cloud restricted to a boolean mask or index array."""
        return LabeledPointCloud(
            self.positions[sel],
            None if self.colors is None else self.colors[sel],
            None if self.labels is None else self.labels[sel],
        )

    def with_labels(self, labels) -> "LabeledPointCloud":
        return LabeledPointCloud(self.positions, self.colors, labels)

    def with_positions(self, positions) -> "LabeledPointCloud":
        return LabeledPointCloud(positions, self.colors, self.labels)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def load_point_cloud(path, format: Optional[str] = None) -> LabeledPointCloud:
    """Load a cloud from ``ply-ascii``, ``ply-binary-le`` or ``xyz``.

    ``format=None`` infers from the file suffix (and the PLY header).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if format is None:
        suffix = path.suffix.lower()
        if suffix == ".ply":
            format = "ply"
        elif suffix in (".xyz", ".txt", ".pts"):
            format = "xyz"
        else:
            raise UnsupportedFormat(f"cannot infer format from suffix {suffix!r}")
    if format == "xyz":
        return _read_xyz(path)
    if format in ("ply", "ply-ascii", "ply-binary-le"):
        return _read_ply(path, expect=None if format == "ply" else format)
    raise UnsupportedFormat(format)


def _read_xyz(path: Path) -> LabeledPointCloud:
    rows = []
    line_numbers = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            rows.append(s)
            line_numbers.append(lineno)
    if not rows:
        return LabeledPointCloud(np.zeros((0, 3)))
    ncol = len(rows[0].split())
    if ncol not in (3, 4, 6, 7):
        raise ParseError(f"line {line_numbers[0]}", f"expected 3, 4, 6 or 7 columns, got {ncol}")
    for s, lineno in zip(rows, line_numbers):
        if len(s.split()) != ncol:
            raise ParseError(f"line {lineno}", f"expected {ncol} columns")
    try:
        data = np.array(" ".join(rows).split(), dtype=np.float64).reshape(-1, ncol)
    except ValueError:
        for s, lineno in zip(rows, line_numbers):
            try:
                [float(v) for v in s.split()]
            except ValueError as exc:
                raise ParseError(f"line {lineno}", str(exc)) from None
        raise
    bad = ~np.isfinite(data).all(axis=1)
    if bad.any():
        raise ParseError(f"line {line_numbers[int(np.argmax(bad))]}", "non-finite value")
    colors = labels = None
    if ncol in (6, 7):
        rgb = data[:, 3:6]
        bad = ((rgb < 0) | (rgb > 255) | (rgb != np.round(rgb))).any(axis=1)
        if bad.any():
            raise ParseError(f"line {line_numbers[int(np.argmax(bad))]}", "color outside [0, 255]")
        colors = rgb.astype(np.uint8)
    if ncol in (4, 7):
        lab = data[:, -1]
        bad = (lab < 0) | (lab >= len(SemanticClass)) | (lab != np.round(lab))
        if bad.any():
            raise ParseError(f"line {line_numbers[int(np.argmax(bad))]}", "label outside [0, 5]")
        labels = lab.astype(np.int8)
    return LabeledPointCloud(data[:, :3], colors, labels)


def _parse_ply_header(fh):
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise ParseError("byte 0", "missing 'ply' magic")
    fmt = None
    elements = []  # (name, count, [(prop, dtype or None for list)])
    while True:
        line = fh.readline()
        if not line:
            raise ParseError(f"byte {fh.tell()}", "unterminated header")
        tokens = line.decode("ascii", errors="replace").split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(f"byte {fh.tell()}", "property before element")
            if tokens[1] == "list":
                elements[-1][2].append((tokens[-1], None))
            else:
                if tokens[1] not in _PLY_TYPES:
                    raise ParseError(f"byte {fh.tell()}", f"unknown property type {tokens[1]}")
                elements[-1][2].append((tokens[2], _PLY_TYPES[tokens[1]]))
        elif tokens[0] == "end_header":
            break
    return fmt, elements


def _read_ply(path: Path, expect: Optional[str]) -> LabeledPointCloud:
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        header_end = fh.tell()
        body = fh.read()
    kind = {"ascii": "ply-ascii", "binary_little_endian": "ply-binary-le"}.get(fmt)
    if kind is None:
        raise UnsupportedFormat(f"PLY format {fmt!r}")
    if expect is not None and kind != expect:
        raise UnsupportedFormat(f"file is {kind}, expected {expect}")
    if not elements or elements[0][0] != "vertex":
        raise UnsupportedFormat("PLY must start with the 'vertex' element")
    _, count, props = elements[0]
    names = [p for p, _ in props]
    if any(dt is None for _, dt in props):
        raise UnsupportedFormat("list properties on 'vertex' are not supported")
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise ParseError("header", f"vertex has no '{axis}' property")

    if kind == "ply-binary-le":
        dtype = np.dtype([(p, "<" + dt) for p, dt in props])
        need = dtype.itemsize * count
        if len(body) < need:
            raise ParseError(f"byte {header_end + len(body)}", f"truncated vertex data ({len(body)} < {need} bytes)")
        rec = np.frombuffer(body, dtype=dtype, count=count)
        cols = {p: rec[p].astype(np.float64) for p in names}
        row_loc = lambda i: f"byte {header_end + i * dtype.itemsize}"  # noqa: E731
    else:
        lines = body.decode("ascii", errors="replace").splitlines()
        lines = [ln for ln in lines if ln.strip()]
        if len(lines) < count:
            raise ParseError(f"vertex row {len(lines)}", f"expected {count} vertex rows")
        try:
            arr = np.array(" ".join(lines[:count]).split(), dtype=np.float64)
        except ValueError:
            for i, ln in enumerate(lines[:count]):
                try:
                    [float(v) for v in ln.split()]
                except ValueError as exc:
                    raise ParseError(f"vertex row {i}", str(exc)) from None
            raise
        if arr.size != count * len(names):
            for i, ln in enumerate(lines[:count]):
                if len(ln.split()) != len(names):
                    raise ParseError(f"vertex row {i}", f"expected {len(names)} values")
        arr = arr.reshape(count, len(names))
        cols = {p: arr[:, j] for j, p in enumerate(names)}
        row_loc = lambda i: f"vertex row {i}"  # noqa: E731

    pos = np.column_stack([cols["x"], cols["y"], cols["z"]]) if count else np.zeros((0, 3))
    bad = ~np.isfinite(pos).all(axis=1)
    if bad.any():
        raise ParseError(row_loc(int(np.argmax(bad))), "non-finite coordinate")
    colors = labels = None
    if all(c in cols for c in ("red", "green", "blue")):
        colors = np.column_stack([cols["red"], cols["green"], cols["blue"]])
        if count and (colors.min() < 0 or colors.max() > 255):
            raise ParseError("vertex data", "color outside [0, 255]")
    if "label" in cols:
        lab = cols["label"]
        bad = (lab < 0) | (lab >= N_CLASSES) | (lab != np.round(lab))
        if bad.any():
            raise ParseError(row_loc(int(np.argmax(bad))), "label outside [0, 5]")
        labels = lab
    return LabeledPointCloud(pos, colors, labels)


def save_point_cloud(cloud: LabeledPointCloud, path, format: str = "ply-binary-le") -> None:
    """Write a cloud as ``ply-binary-le``, ``ply-ascii`` or ``xyz``."""
    path = Path(path)
    n = len(cloud)
    if format == "xyz":
        cols = [cloud.positions]
        fmt = ["%.17g"] * 3
        if cloud.colors is not None:
            cols.append(cloud.colors.astype(np.float64))
            fmt += ["%d"] * 3
        if cloud.labels is not None:
            cols.append(cloud.labels.astype(np.float64)[:, None])
            fmt += ["%d"]
        np.savetxt(path, np.hstack(cols) if n else np.zeros((0, len(fmt))), fmt=" ".join(fmt))
        return
    if format not in ("ply-binary-le", "ply-ascii"):
        raise UnsupportedFormat(format)
    props = [("x", "f8", "double"), ("y", "f8", "double"), ("z", "f8", "double")]
    if cloud.colors is not None:
        props += [("red", "u1", "uchar"), ("green", "u1", "uchar"), ("blue", "u1", "uchar")]
    if cloud.labels is not None:
        props += [("label", "u1", "uchar")]
    header = ["ply", "format " + ("binary_little_endian" if format == "ply-binary-le" else "ascii") + " 1.0",
              f"element vertex {n}"]
    header += [f"property {ply} {name}" for name, _, ply in props]
    header.append("end_header")
    rec = np.empty(n, dtype=[(name, "<" + dt) for name, dt, _ in props])
    rec["x"], rec["y"], rec["z"] = cloud.positions.T
    if cloud.colors is not None:
        rec["red"], rec["green"], rec["blue"] = cloud.colors.T
    if cloud.labels is not None:
        rec["label"] = cloud.labels
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if format == "ply-binary-le":
            fh.write(rec.tobytes())
        else:
            for row in rec:
                fh.write((" ".join(repr(v.item()) for v in row) + "\n").encode("ascii"))


# ---------------------------------------------------------------------------
# Spatial index
# ---------------------------------------------------------------------------


def _sqdist(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = points - q
    return (d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]) + d[..., 2] * d[..., 2]


class SpatialIndex:
    """k-d tree over a cloud supporting exact radius and kNN queries.

    Radius membership uses ``squared distance <= r**2`` evaluated in float64,
    so results match a brute-force scan with the same predicate exactly.
    kNN ties are broken by ascending point index.
    """

    def __init__(self, positions: np.ndarray):
        self.positions = np.ascontiguousarray(positions, dtype=np.float64)
        self.n = len(self.positions)
        self._tree = cKDTree(self.positions, balanced_tree=False, compact_nodes=False)

    def query_radius(self, point, r: float) -> np.ndarray:
        """Indices of all points within ``r`` of ``point``, ascending."""
        q = np.asarray(point, dtype=np.float64)
        cand = np.asarray(self._tree.query_ball_point(q, r * (1 + 1e-9) + 1e-12), dtype=np.int64)
        keep = _sqdist(self.positions[cand], q) <= r * r
        return np.sort(cand[keep])

    def query_radius_many(self, points: np.ndarray, r: float, exact: bool = True) -> list:
        """Batched :meth:`query_radius`; returns one index array per query point."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        res = self._tree.query_ball_point(pts, r * (1 + 1e-9) + 1e-12, return_sorted=False)
        out = []
        for q, c in zip(pts, res):
            c = np.asarray(c, dtype=np.int64)
            if exact:
                c = c[_sqdist(self.positions[c], q) <= r * r]
            out.append(c)
        return out

    def query_knn(self, point, k: int):
        """Return ``(distances, indices)`` of the ``k`` nearest points."""
        q = np.asarray(point, dtype=np.float64)
        k = min(k, self.n)
        kk = min(k + 1, self.n)
        _, idx = self._tree.query(q, k=kk)
        idx = np.atleast_1d(idx).astype(np.int64)
        d2 = _sqdist(self.positions[idx], q)
        order = np.lexsort((idx, d2))
        idx, d2 = idx[order], d2[order]
        if kk > k and d2[k] <= d2[k - 1] * (1 + 1e-9):
            # a tie straddles the k-th slot: gather everything at that distance
            cand = self.query_radius(q, float(np.sqrt(d2[k - 1])) * (1 + 1e-9))
            cd2 = _sqdist(self.positions[cand], q)
            order = np.lexsort((cand, cd2))
            idx, d2 = cand[order], cd2[order]
        return np.sqrt(d2[:k]), idx[:k]

    def knn_all(self, k: int, points: Optional[np.ndarray] = None):
        """Batched kNN over ``points`` (default: the indexed points); fast path, no tie fix-up."""
        pts = self.positions if points is None else np.asarray(points, dtype=np.float64)
        d, idx = self._tree.query(pts, k=k)
        if k == 1:
            d, idx = d[:, None], idx[:, None]
        return d, idx.astype(np.int64)


def build_spatial_index(cloud: LabeledPointCloud) -> SpatialIndex:
    if len(cloud) == 0:
        raise EmptyCloud("cannot index an empty cloud")
    return SpatialIndex(cloud.positions)


# ---------------------------------------------------------------------------
# Normals
# ---------------------------------------------------------------------------


@dataclass
class NormalField:
    normals: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.degenerate is None:
            self.degenerate = np.zeros(len(self.normals), dtype=bool)


def orient_hemisphere(n: np.ndarray, eps: float = 1e-9) -> np.ndarray:
    """Flip each vector so z > 0, else y > 0, else x >= 0."""
    n = np.array(n, dtype=np.float64, copy=True)
    z, y, x = n[:, 2], n[:, 1], n[:, 0]
    flip = np.where(np.abs(z) > eps, z < 0, np.where(np.abs(y) > eps, y < 0, x < 0))
    n[flip] *= -1.0
    return n


def _pca_normals(pos: np.ndarray, nbr: np.ndarray):
    """Smallest-eigenvector normals of each neighbourhood; returns ``(normals, degenerate)``."""
    nb = pos[nbr]
    nb = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", nb, nb) / nbr.shape[1]
    w, v = np.linalg.eigh(cov)
    nrm = v[:, :, 0]
    scale = np.maximum(w[:, 2], 1e-300)
    bad = (w[:, 1] <= 1e-10 * scale) | (w[:, 2] <= 0)
    nrm[bad] = (0.0, 0.0, 1.0)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return nrm, bad


def estimate_normals(cloud: LabeledPointCloud, index: SpatialIndex, k: int = 16,
                     chunk: int = 200_000, query: Optional[np.ndarray] = None) -> NormalField:
    """PCA normals from the ``k`` nearest neighbours (the point itself included).

    Points whose neighbourhood covariance has rank < 2 get the fallback
    normal ``(0, 0, 1)`` and are flagged in ``NormalField.degenerate``.
    With ``query`` (point indices) only those points get normals, still
    using neighbours from the whole cloud.
    """
    n = len(cloud)
    if n < k or k < 3:
        raise ValueError(f"need N >= k >= 3 (N={n}, k={k})")
    pos = cloud.positions
    q = np.arange(n) if query is None else np.asarray(query, dtype=np.int64)
    normals = np.empty((len(q), 3))
    degenerate = np.zeros(len(q), dtype=bool)
    for lo in range(0, len(q), chunk):
        hi = min(len(q), lo + chunk)
        _, nbr = index.knn_all(k, pos[q[lo:hi]])
        normals[lo:hi], degenerate[lo:hi] = _pca_normals(pos, nbr)
    return NormalField(orient_hemisphere(normals), degenerate)


def folded_angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle between unit vectors treating ``n`` and ``-n`` as equal, in radians."""
    dot = np.abs(np.sum(np.asarray(a) * np.asarray(b), axis=-1))
    return np.arccos(np.clip(dot, 0.0, 1.0))

