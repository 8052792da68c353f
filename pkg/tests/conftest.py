import numpy as np
import pytest

from floorgen import synth
from floorgen.pcio import LabeledPointCloud
from floorgen.pipeline import run_pipeline
from floorgen.walls import WallInstance

_ACCEPTANCE = {}


class _Cache:
    """Generated fixtures and pipeline runs shared across test modules."""

    def __init__(self):
        self._built = {}
        self._runs = {}

    def built(self, name):
        if name not in self._built:
            self._built[name] = synth.generate_building(synth.fixture(name))
        return self._built[name]

    def run(self, name, mode="labels"):
        key = (name, mode)
        if key not in self._runs:
            cloud, gt = self.built(name)
            if mode == "labels":
                self._runs[key] = run_pipeline(cloud.with_labels(None), labels=cloud.labels)
            else:
                self._runs[key] = run_pipeline(cloud)
        return self._runs[key]


@pytest.fixture(scope="session")
def cache():
    return _Cache()


@pytest.fixture(scope="session")
def acceptance():
    """Record ``(criterion, passed, detail)``; lines are printed in the terminal summary."""

    def record(n, passed, detail):
        _ACCEPTANCE[n] = (bool(passed), detail)
        print(f"criterion {n}: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def plane_points(rng, n, normal, offset=0.0, extent=2.0, sigma=0.0):
    """``n`` points on the plane ``normal . p = offset`` within a square of side ``extent``."""
    normal = np.asarray(normal, dtype=np.float64)
    normal = normal / np.linalg.norm(normal)
    a = np.cross(normal, [0.0, 0.0, 1.0] if abs(normal[2]) < 0.9 else [1.0, 0.0, 0.0])
    a /= np.linalg.norm(a)
    b = np.cross(normal, a)
    uv = rng.uniform(-extent / 2, extent / 2, size=(n, 2))
    p = uv[:, :1] * a + uv[:, 1:] * b + offset * normal
    return p + rng.normal(0.0, sigma, size=(n, 1)) * normal if sigma else p


def two_sided_wall(rng, thickness, sigma=0.005, length=4.0, phi=0.0, n_face=1500, wall_id=0, one_sided=False):
    """Points on both faces of a wall whose first face passes through the origin.

    Returns ``(cloud, wall, direction, normal)`` with ``normal`` pointing from
    the first face to the second.
    """
    d = np.array([np.cos(phi), np.sin(phi)])
    nrm = np.array([-d[1], d[0]])
    faces = [0.0] if one_sided else [0.0, thickness]
    pts = []
    for off in faces:
        t = rng.uniform(-length / 2, length / 2, n_face)
        xy = np.outer(t, d) + np.outer(off + rng.normal(0, sigma, n_face), nrm)
        pts.append(np.column_stack([xy, rng.uniform(0, 3, n_face)]))
    pc = LabeledPointCloud(np.concatenate(pts))
    wall = WallInstance(wall_id, np.arange(len(pc)), np.array([nrm[0], nrm[1], 0.0]), 0.0, (0.0, 3.0),
                        pc.positions.mean(axis=0), sigma)
    return pc, wall, d, nrm


def drawing_from_plan(fp):
    """Drawing polylines for a plan: wall centerlines, door spans along them and stair lines."""
    from floorgen.annotate import DrawingSet

    walls, doors = [], []
    by_id = {}
    for w in fp.walls:
        c = w.centerline()
        a, b = c.start, c.end
        walls.append(np.array([a, b]))
        by_id[w.wall_id] = (b - a) / np.linalg.norm(b - a)
    for d in fp.doors:
        u = by_id[d.wall_id]
        doors.append(np.array([d.center - u * d.width / 2, d.center + u * d.width / 2]))
    stairs = [np.asarray(line) for run in fp.stairs for line in run]
    lines = {"wall": walls}
    if doors:
        lines["door"] = doors
    if stairs:
        lines["stair"] = stairs
    return DrawingSet(lines)
