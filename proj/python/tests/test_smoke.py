import numpy as np
import pytest

import loco


def linear_poses(frames, vu=2.0, vv=-1.0):
    t = np.arange(frames, dtype=float)[:, None]
    j = np.arange(25, dtype=float)[None, :]
    poses = np.empty((frames, 25, 3))
    poses[..., 0] = 100.0 + 8.0 * j + vu * t
    poses[..., 1] = 300.0 - 4.0 * j + vv * t
    poses[..., 2] = 1.0
    return poses


def test_kde_uniform_offset():
    a = linear_poses(4)
    b = a.copy()
    b[..., 0] += 3.0
    b[..., 1] += 4.0
    assert loco.kde(a, b) == 125.0
    assert loco.mean_kde(a, b) == 5.0
    assert loco.kde(a, b, norm="l1") == 175.0


def test_decompose_recombine_round_trip():
    rng = np.random.default_rng(0)
    poses = rng.uniform(0, 1000, size=(10, 25, 3))
    poses[..., :2] = np.vectorize(loco.snap_to_lattice)(poses[..., :2])
    poses[..., 2] = rng.uniform(0.1, 1.0, size=(10, 25))
    anchor, anchor_conf, offsets, conf = loco.decompose(poses)
    assert anchor.shape == (10, 2)
    assert offsets.shape == (10, 24, 2)
    np.testing.assert_array_equal(loco.recombine(anchor, anchor_conf, offsets, conf), poses)


def test_baselines_on_linear_motion():
    poses = linear_poses(30)
    hist, future = poses[:15], poses[15:]
    assert loco.kde(loco.baseline("constant_velocity", hist, 15), future) == 0.0
    assert loco.mean_kde(loco.baseline("zero_velocity", linear_poses(30, 2.0, 0.0)[:15], 15),
                         linear_poses(30, 2.0, 0.0)[15:]) == 16.0
    with pytest.raises(Exception):
        loco.baseline("nope", hist, 15)


def test_chain_and_generation():
    records = loco.generate_dataset(2, 5, 5, "camera_heavy", seed=3)
    assert len(records) == 2
    r = records[0]
    assert r["poses"].shape == (10, 25, 3)
    assert r["transforms"].shape == (10, 3, 4)
    np.testing.assert_allclose(r["transforms"][0], np.eye(3, 4))
    step = np.eye(3, 4)
    step[:, 3] = [0.5, 0.0, -1.0]
    chained = loco.chain_transforms(np.stack([step, step]))
    np.testing.assert_allclose(chained[0][:, 3], [1.0, 0.0, -2.0])


def test_qrnn_saturated_forget_gate():
    rng = np.random.default_rng(1)
    W = rng.normal(size=(2 * 3, 3 * 4))
    b = np.zeros((1, 12))
    b[0, 4:8] = 40.0
    c0 = rng.normal(size=(1, 4))
    h, c = loco.qrnn_layer_forward(rng.normal(size=(30, 3)), W, b, 4, 2, "fo", c0)
    assert h.shape == (30, 4)
    np.testing.assert_allclose(c, c0, atol=1e-8)


def test_completion_and_cli(tmp_path):
    records = loco.generate_dataset(4, seed=1)
    poses = np.concatenate([r["truth"] for r in records])
    model = loco.train_completion(poses, steps=50, seed=2)
    assert len(model.loss_history) == 50
    masked = poses[:3].copy()
    masked[:, 4] = 0.0
    out = model.complete(masked)
    np.testing.assert_array_equal(out[:, 5], masked[:, 5])
    assert np.all(out[:, 4, 2] == 0.25)
    model.save(tmp_path)
    np.testing.assert_array_equal(loco.CompletionModel.load(tmp_path).complete(masked), out)

    data = tmp_path / "d.jsonl"
    code, out_text, _ = loco.cli(["generate", "--out", str(data), "--count", "2", "--seed", "5"])
    assert code == 0 and "wrote 2" in out_text
    assert [r["id"] for r in loco.load_dataset(data)] == [r["id"] for r in
                                                           loco.generate_dataset(2, seed=5)]
    code, _, err = loco.cli(["evaluate", "--data", str(data), "--method", "bogus", "--out",
                             str(tmp_path / "e.json")])
    assert code != 0 and "error" in err
