import json

import numpy as np
import pytest

import cadexpp


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cadexpp")
    manifest = cadexpp.synth(root / "data", preset="desk", seed=1, no_noise=True)
    summary = cadexpp.fit(manifest, root / "run", iterations=5)
    return root, manifest, summary


def test_config_defaults_and_overrides():
    cfg = json.loads(cadexpp.config(iterations=7, loss={"lambda_d": 0.5}))
    assert cfg["iterations"] == 7
    assert cfg["loss"]["lambda_d"] == 0.5
    assert cfg["loss"]["lambda_reg"] == json.loads(cadexpp.config())["loss"]["lambda_reg"]
    with pytest.raises(cadexpp.ConfigError, match="lr_feild"):
        cadexpp.config(optimizer={"lr_feild": 1.0})


def test_fit_summary(run):
    _, _, summary = run
    assert summary["steps"] == 5
    assert summary["loss"].shape == (5,)
    assert summary["flow_pairs"] > 0
    assert summary["checkpoint"].exists()


def test_track_and_evaluate(run):
    root, manifest, summary = run
    gt_pos, gt_vis, gt_qf = cadexpp.read_tracks(root / "data" / "gt_tracks.txt")
    queries = np.stack([gt_qf, gt_pos[np.arange(len(gt_qf)), gt_qf, 0], gt_pos[np.arange(len(gt_qf)), gt_qf, 1]], 1)
    pos, vis = cadexpp.track(summary["checkpoint"], queries)
    assert pos.shape == gt_pos.shape
    assert vis.dtype == bool
    report = cadexpp.evaluate(pos, vis, gt_pos, gt_vis, gt_qf)
    assert 0.0 <= report["delta_avg"] <= 1.0
    assert 0.0 <= report["average_jaccard"] <= report["delta_avg"] + 1e-12
    perfect = cadexpp.evaluate(gt_pos, gt_vis, gt_pos, gt_vis, gt_qf)
    assert perfect["delta_avg"] == 1.0
    assert perfect["occlusion_accuracy"] == 1.0


def test_lattice_queries():
    q = cadexpp.lattice_queries(2, 10, 6, 4)
    assert q.shape == (6, 3)
    assert (q[:, 0] == 2).all()


def test_raster_round_trip(tmp_path):
    a = np.random.default_rng(0).standard_normal((2, 3, 4, 5)).astype(np.float32)
    cadexpp.write_raster(tmp_path / "r.cdxr", a)
    b = cadexpp.read_raster(tmp_path / "r.cdxr")
    assert b.dtype == np.float32
    assert np.array_equal(a.view(np.uint32), b.view(np.uint32))


def test_errors(tmp_path):
    with pytest.raises(cadexpp.DataError):
        cadexpp.fit(tmp_path / "missing.json", tmp_path / "run")
    (tmp_path / "junk.cdxr").write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(cadexpp.FormatError):
        cadexpp.read_raster(tmp_path / "junk.cdxr")
    assert issubclass(cadexpp.FormatError, cadexpp.DataError)
    with pytest.raises(ValueError):
        cadexpp.track(tmp_path / "junk.cdxr", np.zeros((2, 2)))
