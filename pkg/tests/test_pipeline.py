import json

import numpy as np
import pytest

from floorgen import synth
from floorgen.config import PipelineConfig
from floorgen.errors import StageError
from floorgen.pipeline import Fixture, expand_grid, grid_search, run_pipeline

STAGES = ["load", "normalize", "outliers", "levels", "labels", "normals", "wall_candidates", "walls", "doors",
          "stairs", "ransac", "assemble"]


def test_rect1_plan(cache):
    fp, report = cache.run("rect1")
    assert (len(fp.walls), len(fp.doors), len(fp.rooms)) == (4, 1, 1)
    assert [r.stage for r in report.records] == STAGES
    assert all(r.seconds >= 0 for r in report.records)
    assert report.mode == "labels" and not report.used_level_fallback
    json.dumps(report.to_json())


@pytest.mark.parametrize("name,mode", [("rect1", "labels"), ("cluttered", "labels"), ("cluttered", "geometric")])
def test_filtering_counts_non_increasing(cache, name, mode):
    _, report = cache.run(name, mode)
    counts = [report.count(s) for s in ("load", "outliers", "wall_candidates")]
    assert counts == sorted(counts, reverse=True)
    assert report.count("normalize") == report.count("load")


def test_missing_input_names_path(tmp_path):
    path = tmp_path / "nowhere.ply"
    with pytest.raises(StageError) as e:
        run_pipeline(path)
    assert e.value.stage == "load" and str(path) in str(e.value)


def test_one_label_source_only(cache):
    cloud, gt = cache.built("rect1")
    with pytest.raises(ValueError):
        run_pipeline(cloud, labels=cloud.labels, drawing={"classes": []})


def test_embedded_labels_ignored_without_source(cache):
    cloud, _ = cache.built("cluttered")
    _, report = cache.run("cluttered", "geometric")
    assert report.mode == "geometric"
    # furniture sides and vertical scraps of clutter join the candidates
    assert report.count("wall_candidates") > np.count_nonzero(cloud.labels == 2)


def test_plan_in_input_frame(cache):
    # rect1 is offset from the origin; the plan must come back in the cloud frame
    fp, _ = cache.run("rect1")
    _, gt = cache.built("rect1")
    np.testing.assert_allclose(fp.rooms[0].exterior.mean(axis=0), gt.rooms[0].exterior.mean(axis=0), atol=0.05)


def test_expand_grid_order():
    pts = expand_grid({"b": [1, 2], "a": ["x", "y"]})
    assert pts == [{"a": "x", "b": 1}, {"a": "x", "b": 2}, {"a": "y", "b": 1}, {"a": "y", "b": 2}]


@pytest.fixture(scope="module")
def small_corpus():
    cloud, gt = synth.generate_building(synth.fixture("rect1", density=400.0))
    return [Fixture("rect1", cloud.with_labels(None), gt, labels=cloud.labels)]


def test_grid_of_one(small_corpus):
    res = grid_search(small_corpus, {"ransac.iterations": [123]})
    assert res.best_point == {"ransac.iterations": 123}
    assert res.best == PipelineConfig().with_overrides({"ransac.iterations": 123})
    (row,) = res.table
    assert row["score"] == pytest.approx(row["precision"] + row["recall"] + row["iou"])


def test_grid_deterministic_and_failures_score_zero(small_corpus):
    grid = {"ransac.iterations": [100, 200], "walls.min_points": [500, 10 ** 9]}
    a = grid_search(small_corpus, grid)
    b = grid_search(small_corpus, grid)
    assert a.table == b.table and a.best_point == b.best_point
    # an absurd wall threshold leaves no walls and no rooms
    starved = [r for r in a.table if r["walls.min_points"] == 10 ** 9]
    assert all(r["iou"] == 0.0 for r in starved)
    assert a.best_point["walls.min_points"] == 500


def test_geometric_filter_wins_on_cluttered(cache):
    cloud, gt = cache.built("cluttered")
    res = grid_search([Fixture("cluttered", cloud.with_labels(None), gt)],
                      {"walls.parametric_filter": [False, True]})
    off, on = res.table
    assert on["score"] > off["score"]
    assert res.best_point == {"walls.parametric_filter": True}
