import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from oracles import nearest_pixel_pr
from floorgen import synth
from floorgen.doors import DoorOpening
from floorgen.errors import FrameMismatch
from floorgen.evaluate import (SIMPLE_LUT, BitRaster, EvalConfig, EvalReport, betti_error, betti_numbers,
                               evaluate_pair, greedy_weighted_iou, neighbour_codes, precision_recall,
                               rasterize_lines, room_iou, shared_frame, simple_points, warp_toward,
                               warping_error)
from floorgen.floorplan import Floorplan, Line2D, RasterFrame, Room, WallSegment2D

M = (0.02, 0.05, 0.10)


def raster(bits, res=0.01):
    return BitRaster(np.asarray(bits, dtype=bool), np.zeros(2), res)


def stair_plan(*lines):
    return Floorplan(stairs=[np.array(lines, dtype=float).reshape(-1, 2, 2)])


def square(x0, y0, x1, y1):
    return Room(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))


def test_line_pixel_count():
    fp = stair_plan([[0.0, 0.0], [0.5, 0.0]])
    frame = shared_frame([fp], 0.01)
    assert rasterize_lines(fp, frame).bits.sum() == 51


def test_empty_rasters():
    e = raster(np.zeros((8, 8)))
    full = raster(np.eye(8))
    assert precision_recall(e, e, M) == {m: (1.0, 1.0) for m in M}
    assert precision_recall(e, full, M) == {m: (0.0, 0.0) for m in M}
    assert precision_recall(full, e, M) == {m: (0.0, 0.0) for m in M}


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), h=st.integers(1, 32), w=st.integers(1, 32), p=st.floats(0.0, 0.3))
def test_pr_matches_brute_force(seed, h, w, p):
    rng = np.random.default_rng(seed)
    a = rng.random((h, w)) < p
    b = rng.random((h, w)) < p
    got = precision_recall(raster(a), raster(b), M)
    assert got == nearest_pixel_pr(a, b, M, 0.01)


def test_pr_symmetry_and_monotone():
    rng = np.random.default_rng(0)
    a, b = rng.random((30, 30)) < 0.05, rng.random((30, 30)) < 0.05
    ab = precision_recall(raster(a), raster(b), M)
    ba = precision_recall(raster(b), raster(a), M)
    for m in M:
        assert ab[m][0] == ba[m][1] and ab[m][1] == ba[m][0]
    ps = [ab[m][0] for m in M]
    assert ps == sorted(ps)


def test_parallel_shift_6cm():
    gt = stair_plan([[0.0, 0.0], [2.0, 0.0]])
    pred = stair_plan([[0.0, 0.06], [2.0, 0.06]])
    frame = shared_frame([gt, pred])
    pr = precision_recall(rasterize_lines(pred, frame), rasterize_lines(gt, frame), M)
    assert pr[0.02][0] == 0.0 and pr[0.05][0] == 0.0
    assert pr[0.10] == (1.0, 1.0)


def test_frame_mismatch():
    with pytest.raises(FrameMismatch):
        precision_recall(raster(np.zeros((4, 4))), raster(np.zeros((4, 5))))
    with pytest.raises(FrameMismatch):
        betti_error(raster(np.zeros((4, 4)), 0.01), raster(np.zeros((4, 4)), 0.02))


def test_greedy_iou_example():
    assert greedy_weighted_iou(np.array([[0.8], [0.0]]), np.array([1.0, 1.0])) == pytest.approx(0.4)


def test_room_iou_rasters():
    frame = RasterFrame(np.array([-0.5, -0.5]), 0.01, (200, 400))
    gt = [square(0, 0, 1, 1), square(2, 0, 3, 1)]
    pred = [square(0, 0, 0.8, 1)]
    assert room_iou(pred, gt, frame) == pytest.approx(0.4, abs=0.01)
    assert room_iou([], [], frame) == 1.0
    assert room_iou([], gt, frame) == 0.0
    assert room_iou(pred, [], frame) == 0.0
    assert room_iou(gt, gt, frame) == 1.0


def test_greedy_iou_one_to_one():
    # the best pair is taken first and blocks both row and column
    iou = np.array([[0.9, 0.8], [0.85, 0.1]])
    assert greedy_weighted_iou(iou, np.array([1.0, 3.0])) == pytest.approx((0.9 + 3 * 0.1) / 4)


def _ring(n=12, hole=4):
    m = np.zeros((n, n), dtype=bool)
    m[2:-2, 2:-2] = True
    c = n // 2
    m[c - hole // 2:c + hole // 2, c - hole // 2:c + hole // 2] = False
    return m


def test_betti_shapes():
    r = np.zeros((10, 10), dtype=bool)
    r[2:6, 3:8] = True
    two = np.zeros((10, 10), dtype=bool)
    two[1:3, 1:3] = True
    two[6:9, 5:9] = True
    assert betti_numbers(r) == (1, 0)
    assert betti_numbers(_ring()) == (1, 1)
    assert betti_numbers(two) == (2, 0)
    diag = np.eye(5, dtype=bool)
    assert betti_numbers(diag) == (1, 0)
    # diagonal neighbours join the foreground but do not open the 4-connected pocket they enclose
    pocket = np.zeros((5, 5), dtype=bool)
    pocket[1, 2] = pocket[2, 1] = pocket[2, 3] = pocket[3, 2] = True
    assert betti_numbers(pocket) == (1, 1)


def test_simple_point_table():
    assert SIMPLE_LUT.sum() == 116
    n, ne, e, se, s, sw, w, nw = (1 << k for k in range(8))
    assert not SIMPLE_LUT[0]          # isolated pixel
    assert not SIMPLE_LUT[255]        # interior pixel
    assert SIMPLE_LUT[n]              # line end
    assert not SIMPLE_LUT[e | w]      # line middle
    assert SIMPLE_LUT[e | se | s]     # square corner
    assert not SIMPLE_LUT[n | s]
    assert not SIMPLE_LUT[ne | sw]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_flipping_simple_points_keeps_topology(seed):
    rng = np.random.default_rng(seed)
    m = rng.random((12, 12)) < 0.5
    m[0], m[-1], m[:, 0], m[:, -1] = False, False, False, False
    before = betti_numbers(m)
    cand = np.argwhere(simple_points(m))
    cand = cand[(cand > 0).all(axis=1) & (cand < 11).all(axis=1)]
    for r, c in cand[rng.permutation(len(cand))[:5]]:
        if simple_points(m)[r, c]:
            m[r, c] = ~m[r, c]
            assert betti_numbers(m) == before


def test_neighbour_codes():
    m = np.zeros((3, 3), dtype=bool)
    m[0, 1] = m[1, 2] = True
    assert neighbour_codes(m)[1, 1] == 0b101


def test_warping_cases():
    gt = np.zeros((20, 20), dtype=bool)
    gt[5:15, 5:15] = True
    assert warping_error(raster(gt), raster(gt)) == 0.0
    bumped = gt.copy()
    bumped[4, 8:11] = True
    assert warping_error(raster(bumped), raster(gt)) == 0.0
    holed = gt.copy()
    holed[9:11, 9:11] = False
    assert warping_error(raster(holed), raster(gt)) > 0.0
    split = gt.copy()
    split[:, 10] = False
    assert warping_error(raster(split), raster(gt)) > 0.0
    # warping never changes the topology of gt
    w = warp_toward(gt, holed, 10)
    assert betti_numbers(w) == betti_numbers(gt)


def test_warp_pass_limit():
    gt = np.zeros((30, 30), dtype=bool)
    gt[10:20, 10:20] = True
    pred = np.zeros((30, 30), dtype=bool)
    pred[10:20, 10:28] = True
    assert (warp_toward(gt, pred, 0) == gt).all()
    one = warp_toward(gt, pred, 1)
    assert 0 < np.count_nonzero(one != gt) < np.count_nonzero(pred != gt)
    assert (warp_toward(gt, pred, 20) == pred).all()


def test_identity_on_fixture(cache):
    _, gt = cache.built("tworoom")
    rep = evaluate_pair(gt, gt)
    assert rep.precision == {m: 1.0 for m in M} and rep.recall == {m: 1.0 for m in M}
    assert rep.room_iou == 1.0 and rep.warping_error == 0.0 and rep.betti_error == 0.0


def test_empty_prediction():
    gt = synth.ground_truth(synth.fixture("rect1"))
    rep = evaluate_pair(Floorplan(), gt)
    assert all(v == 0.0 for v in rep.precision.values())
    assert all(v == 0.0 for v in rep.recall.values())
    assert rep.room_iou == 0.0
    assert rep.betti_error == 1.0


def _shifted(fp, dxy):
    d = np.asarray(dxy, float)
    walls = [WallSegment2D(w.wall_id, Line2D(w.inner.start + d, w.inner.end + d),
                           Line2D(w.outer.start + d, w.outer.end + d), w.thickness) for w in fp.walls]
    doors = [DoorOpening(x.wall_id, x.u_interval, x.width, x.height, x.center + d) for x in fp.doors]
    rooms = [Room(r.exterior + d, [h + d for h in r.holes]) for r in fp.rooms]
    return Floorplan(walls, doors, [s + d for s in fp.stairs], rooms)


def test_corridor_shift_3cm():
    gt = synth.ground_truth(synth.fixture("corridor"))
    pred = _shifted(gt, (0.03, 0.03))
    rep = evaluate_pair(pred, gt)
    # only pixels where a shifted line crosses or abuts a perpendicular gt line fall within 2 cm
    assert rep.precision[0.02] < 0.1
    frame = shared_frame([pred, gt])
    a, b = rasterize_lines(pred, frame).bits, rasterize_lines(gt, frame).bits
    d, _ = cKDTree(np.argwhere(b)).query(np.argwhere(a))
    assert rep.precision[0.02] == np.count_nonzero(d <= 2 + 1e-9) / len(d)
    assert rep.precision[0.05] == 1.0 and rep.recall[0.05] == 1.0
    # rectangles a x b shifted by (s, s) overlap in (a - s)(b - s)
    num = den = 0.0
    for r in gt.rooms:
        a, b = np.ptp(r.exterior, axis=0)
        inter = (a - 0.03) * (b - 0.03)
        num += a * b * inter / (2 * a * b - inter)
        den += a * b
    assert rep.room_iou == pytest.approx(num / den, abs=0.005)


def test_report_json_and_table():
    rep = EvalReport({0.02: 0.5, 0.1: 1.0}, {0.02: 0.25, 0.1: 1.0}, 0.9, 0.001, 2.0)
    js = json.loads(rep.dumps())
    assert js == {"precision": {"0.02": 0.5, "0.10": 1.0}, "recall": {"0.02": 0.25, "0.10": 1.0},
                  "iou": 0.9, "warping_error": 0.001, "betti_error": 2.0}
    head, row = rep.table("ours").splitlines()
    assert head.split("\t") == ["Method", "Prec. (2cm)", "Prec. (10cm)", "Rec. (2cm)", "Rec. (10cm)", "IoU",
                                "Warping Error", "Betti Error"]
    assert row.split("\t")[:2] == ["ours", "50.00%"]


def test_eval_config_margins():
    gt = synth.ground_truth(synth.fixture("rect1"))
    rep = evaluate_pair(gt, gt, EvalConfig(0.02, (0.04,), 2))
    assert rep.precision == {0.04: 1.0}
