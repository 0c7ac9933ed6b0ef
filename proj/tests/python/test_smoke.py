"""Smoke tests for the amdl extension module."""

import math

import numpy as np
import pytest

import amdl


def test_conv2d_identity_kernel():
    x = np.arange(2 * 3 * 5 * 5, dtype=np.float32).reshape(2, 3, 5, 5) / 10.0
    w = np.zeros((3, 3, 3, 3), dtype=np.float32)
    for c in range(3):
        w[c, c, 1, 1] = 1.0
    b = np.zeros(3, dtype=np.float32)
    y = amdl.conv2d(x, w, b, stride=1, pad=1)
    np.testing.assert_array_equal(y, x)


def test_conv2d_matches_manual_patch():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1, 2, 4, 4)).astype(np.float32)
    w = rng.normal(size=(1, 2, 3, 3)).astype(np.float32)
    b = np.array([0.25], dtype=np.float32)
    y = amdl.conv2d(x, w, b, stride=1, pad=0)
    expect = b[0] + float(np.sum(x[0, :, 0:3, 0:3] * w[0]))
    assert y.shape == (1, 1, 2, 2)
    assert y[0, 0, 0, 0] == pytest.approx(expect, rel=1e-5)


def test_relu_and_pool():
    x = np.array([[[[-1.0, 2.0], [3.0, -4.0]]]], dtype=np.float32)
    np.testing.assert_array_equal(amdl.relu(x)[0, 0], [[0.0, 2.0], [3.0, 0.0]])
    assert amdl.global_avg_pool(x)[0, 0] == pytest.approx(0.0)


def test_batchnorm_eval_affine():
    x = np.ones((1, 1, 2, 2), dtype=np.float32) * 3.0
    out = amdl.batchnorm(
        x,
        np.array([2.0], np.float32),
        np.array([1.0], np.float32),
        np.array([1.0], np.float32),
        np.array([4.0], np.float32),
        training=False,
    )
    expect = (3.0 - 1.0) / math.sqrt(4.0 + 1e-5) * 2.0 + 1.0
    assert out["y"][0, 0, 0, 0] == pytest.approx(expect, rel=1e-5)


def test_softmax_cross_entropy_uniform():
    logits = np.zeros((4, 10), dtype=np.float32)
    loss = amdl.softmax_cross_entropy(logits, [0, 3, 7, 9])
    assert loss == pytest.approx(math.log(10.0), rel=1e-6)


def test_conv2d_grads_bias_counts_positions():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 2, 5, 5)).astype(np.float32)
    w = rng.normal(size=(3, 2, 3, 3)).astype(np.float32)
    b = np.zeros(3, dtype=np.float32)
    grads = amdl.conv2d_grads(x, w, b, stride=1, pad=1)
    # d(sum)/db_o equals the number of contributing output positions
    assert grads["b"] == pytest.approx([2 * 5 * 5] * 3)


def test_schedules():
    assert amdl.lr_at(0) == pytest.approx(0.1)
    assert amdl.lr_at(85) == pytest.approx(0.01)
    assert amdl.lr_at(110) == pytest.approx(0.001)
    assert amdl.weight_decay_for(1020) == pytest.approx(5e-3)
    assert amdl.weight_decay_for(31367) == pytest.approx(5e-4)
    assert amdl.weight_decay_for(1232167) == pytest.approx(1e-4)


def test_decathlon_fixture():
    specs = {s["name"]: s for s in amdl.decathlon_fixture()}
    assert len(specs) == 10
    assert specs["GTSRB"]["num_classes"] == 43
    assert specs["GTSRB"]["train_size"] == 31367
    assert specs["OGlt"]["num_classes"] == 1623
    assert sum(s["num_classes"] for s in specs.values()) == 3128


def test_generate_synthetic_deterministic():
    a = amdl.generate_synthetic("medium", 30, split="train", side=32, seed=9)
    b = amdl.generate_synthetic("medium", 30, split="train", side=32, seed=9)
    np.testing.assert_array_equal(a["pixels"], b["pixels"])
    assert a["num_classes"] == 10
    counts = np.bincount(a["labels"], minlength=10)
    assert counts.max() - counts.min() <= 1
    with pytest.raises(ValueError):
        amdl.generate_synthetic("hard", 5, split="train", side=32, seed=1)


def test_count_params_closed_forms():
    led = amdl.count_params(preset="resnet26", num_classes=10, topology="basic", adapt=True)
    # one 64-channel unit: 2*(9*64^2+64) base, 2*(64^2+3*64) adapters+BN
    assert led["unit_base"][0][0] == 73856
    assert led["unit_adapter"][0][0] == 8576
    assert abs(led["fraction_at_exit"][0] * 100 - 4.7) < 1.0
    assert abs(led["fraction_at_exit"][1] * 100 - 23.8) < 1.0


def test_table2_best_row():
    out = amdl.table2_best_row(3.5)
    assert out["mean_accuracy"] == pytest.approx(72.79, abs=0.01)
    by_domain = {s["domain"]: s for s in out["selections"]}
    assert by_domain["GTSR"]["exit"] == 1
    assert by_domain["GTSR"]["accuracy"] == pytest.approx(97.00)
    assert by_domain["GTSR"]["difficulty"] == "easy"
    assert by_domain["Flwr"]["exit"] == 3
    assert by_domain["OGlt"]["accuracy"] == pytest.approx(87.13)


def test_select_exit_rows():
    rows = [
        {"config": "m", "exit": "1", "cost": "1", "d": "90.0"},
        {"config": "m", "exit": "2", "cost": "2", "d": "95.0"},
        {"config": "m", "exit": "3", "cost": "3", "d": "96.0"},
    ]
    sel = amdl.select_exit(rows, "d", threshold=3.5)
    assert sel["exit"] == 2
    assert sel["loss"] == pytest.approx(1.0)


def test_training_pipeline(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    amdl.write_synthetic_domain("easy", 48, 24, 24, 32, 11, str(data))
    base_path = str(tmp_path / "base.ckpt")
    history = amdl.train_base(str(data), "easy", "tiny", base_path, epochs=1, batch_size=16, milestones=[], seed=11)
    assert len(history) == 1
    assert 0.0 <= history[0]["acc"][0] <= 1.0

    bundle_path = str(tmp_path / "easy.adpt")
    history = amdl.train_domain(base_path, str(data), "easy", topology="mlp:8", out_path=bundle_path,
                                epochs=1, batch_size=16, milestones=[], seed=11)
    assert len(history) == 1
    assert len(history[0]["acc"]) == 3

    acc = amdl.evaluate(base_path, bundle_path, str(data), "easy", split="val")
    assert len(acc) == 3
    assert all(0.0 <= a <= 1.0 for a in acc)

    ds = amdl.load_dataset(str(data / "easy_train.amds"))
    assert ds["pixels"].shape == (48, 32, 32, 3)
