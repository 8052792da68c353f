import numpy as np
import pytest

from floorgen import synth
from floorgen.pcio import LabeledPointCloud, SemanticClass as C, build_spatial_index, estimate_normals
from floorgen.preprocess import FloorCeilingLevels, normalize_coordinates, detect_levels
from floorgen.stairs import StairParams, detect_stair_patches, detect_stairs

LEVELS = FloorCeilingLevels(0.0, 3.0, 0.1)


def _stair_cloud(stairs, seed=0, density=1500.0, sigma=0.002):
    """Stair surfaces only (one far wall keeps the BuildingSpec valid; its points are dropped)."""
    parts = []
    for i, s in enumerate(stairs):
        spec = synth.BuildingSpec([synth.WallSpec((50.0, 50.0), (51.0, 50.0))], stair=s, density=density,
                                  noise_sigma=sigma, slabs=False, seed=seed + i)
        cloud, _ = synth.generate_building(spec)
        parts.append(cloud.subset(cloud.labels == int(C.STAIR)))
    pos = np.concatenate([p.positions for p in parts])
    return LabeledPointCloud(pos, labels=np.full(len(pos), int(C.STAIR)))


def _detect(pc, **kw):
    nf = estimate_normals(pc, build_spatial_index(pc), 16)
    return detect_stairs(pc, nf, LEVELS, StairParams(**kw))


def _normalized_run(cache):
    cloud, _ = cache.built("stairhall")
    pc, _ = normalize_coordinates(cloud)
    levels, _ = detect_levels(pc)
    nf = estimate_normals(pc, build_spatial_index(pc), 16)
    return pc, nf, levels


def test_stairhall_single_run(cache):
    pc, nf, levels = _normalized_run(cache)
    treads, risers = detect_stair_patches(pc, nf, levels)
    assert abs(len(treads) - 10) <= 1
    assert abs(len(risers) - 10) <= 1
    runs = detect_stairs(pc, nf, levels)
    assert len(runs) == 1
    (run,) = runs
    assert abs(len(run.steps) - 10) <= 1
    assert np.median([s.riser_height for s in run.steps]) == pytest.approx(0.17, abs=0.02)
    assert np.median([s.tread_depth for s in run.steps]) == pytest.approx(0.28, abs=0.02)
    assert len(run.lines()) == len(run.steps) + 1


def test_stairhall_pipeline_lines_match_gt(cache):
    fp, report = cache.run("stairhall")
    _, gt = cache.built("stairhall")
    assert report.count("stairs") == 1
    pred, want = np.asarray(fp.stairs[0]), np.asarray(gt.stairs[0])
    assert abs(len(pred) - len(want)) <= 1
    # every predicted line lies near some gt line
    mids_p = pred.mean(axis=1)
    mids_g = want.mean(axis=1)
    d = np.linalg.norm(mids_p[:, None] - mids_g[None], axis=2).min(axis=1)
    assert np.median(d) <= 0.05


@pytest.mark.parametrize("name", ["rect1", "tworoom"])
def test_flat_fixtures_have_no_stairs(cache, name):
    _, report = cache.run(name)
    assert report.count("stairs") == 0


def test_two_steps_is_not_a_stair():
    pc = _stair_cloud([synth.StairSpec((0.0, 0.0), (1.0, 0.0), steps=2)])
    assert _detect(pc) == []


def test_spurious_patch_ignored():
    stair = synth.StairSpec((0.0, 0.0), (0.0, 1.0), steps=8)
    pc = _stair_cloud([stair])
    rng = np.random.default_rng(4)
    # loose horizontal patch well off the flight axis
    blob = np.column_stack([rng.uniform(2.5, 2.8, 200), rng.uniform(0.4, 0.7, 200), np.full(200, 0.55)])
    pc2 = LabeledPointCloud(np.vstack([pc.positions, blob]), labels=np.full(len(pc) + 200, int(C.STAIR)))
    (a,) = _detect(pc)
    (b,) = _detect(pc2)
    assert len(a.steps) == len(b.steps)
    np.testing.assert_allclose(np.asarray(a.lines()), np.asarray(b.lines()), atol=1e-9)


def test_two_flights_two_runs():
    pc = _stair_cloud([synth.StairSpec((0.0, 0.0), (1.0, 0.0), steps=6),
                       synth.StairSpec((0.0, 5.0), (0.0, -1.0), steps=5)])
    runs = _detect(pc)
    assert sorted(len(r.steps) for r in runs) == [5, 6]


def test_translation_equivariance():
    pc = _stair_cloud([synth.StairSpec((0.0, 0.0), (1.0, 1.0), steps=6)])
    shift = np.array([5.0, -3.0, 0.0])
    (a,) = _detect(pc)
    (b,) = _detect(LabeledPointCloud(pc.positions + shift, labels=pc.labels))
    np.testing.assert_allclose(np.asarray(b.lines()), np.asarray(a.lines()) + shift[:2], atol=1e-6)
    assert [s.riser_height for s in a.steps] == pytest.approx([s.riser_height for s in b.steps], abs=1e-9)


def test_geometric_mode_on_stairhall(cache):
    _, report = cache.run("stairhall", mode="geometric")
    assert report.count("stairs") == 1


def test_geometric_cluttered_has_no_stairs(cache):
    # furniture corners grow bent vertical patches; they must be rejected, not crash the stage
    _, report = cache.run("cluttered", mode="geometric")
    assert report.count("stairs") == 0
