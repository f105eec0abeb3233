# SPDX-License-Identifier: Apache-2.0
# Copyright (c) 2026 mptrack contributors

import math

import numpy as np
import pytest

import mptrack as mpt


def test_box_metrics():
    a = mpt.Box(0, 0, 2, 2)
    b = mpt.Box(1, 1, 3, 3)
    assert mpt.iou(a, b) == pytest.approx(1.0 / 7.0, abs=1e-12)
    assert mpt.giou(mpt.Box(0, 0, 1, 1), mpt.Box(2, 2, 3, 3)) == pytest.approx(
        -7.0 / 9.0, abs=1e-12
    )
    assert abs(mpt.iou(a, b) - mpt.raster_iou(a, b, 4096)) < 1e-3


def test_region_normalization_roundtrip():
    r = mpt.SearchRegion(10.0, 10.0, 4.0)
    n = mpt.normalize_to_region(mpt.Box(9, 9, 11, 11), r)
    assert n.x1 == pytest.approx(0.25)
    back = mpt.denormalize_from_region(n, r)
    assert back.x2 == pytest.approx(11.0)


def test_temporal_encoding_constants():
    alpha = mpt.nyquist_alpha()
    assert alpha == pytest.approx(math.pi * math.log(10), abs=1e-15)
    assert abs(alpha - 7.23) < 1e-2
    assert mpt.instantaneous_frequency(0, 0, alpha, 1e4, 64) == pytest.approx(
        math.pi, abs=1e-12
    )
    table = mpt.temporal_pe_table(30, 64, alpha)
    assert table.shape == (30, 64)
    assert np.allclose(table[0, 0::2], 0.0)
    assert np.allclose(table[0, 1::2], 1.0)
    assert table[9, 0] == pytest.approx(math.sin(alpha), abs=1e-12)


def test_simulator_and_forward():
    scene = mpt.SceneConfig()
    scene.grid_h = 8
    scene.grid_w = 8
    scene.app_channels = 4
    scene.episode_len = 20
    scene.n_distractors = 1
    episode = mpt.simulate_episode(scene, 7)
    assert episode.length == 20

    cfg = mpt.ModelConfig()
    cfg.traj_len = 6
    cfg.channels = 16
    cfg.grid_h = 8
    cfg.grid_w = 8
    cfg.app_channels = 4
    model = mpt.Model(cfg)

    gt0 = episode.gt[0]
    region = mpt.region_around(mpt.Box(*gt0), 4.0, 0.05)
    obs = episode.observation(5, region)
    assert obs.shape == (64, 4)

    template = np.zeros((1, 4))
    score, box = model.vision_forward(obs, template)
    assert score.shape == (64, 1)
    assert len(box) == 4
    assert box[0] <= box[2] and box[1] <= box[3]

    traj = [mpt.normalize_to_region(mpt.Box(*episode.gt[i]), region) for i in range(6)]
    out = model.joint_forward(
        obs, template, [[t.x1, t.y1, t.x2, t.y2] for t in traj]
    )
    assert 0.0 <= out["weight"] <= 1.0
    assert len(out["motion_box"]) == 4


def test_episode_run_and_determinism():
    scene = mpt.SceneConfig()
    scene.grid_h = 8
    scene.grid_w = 8
    scene.app_channels = 4
    scene.episode_len = 15
    episode = mpt.simulate_episode(scene, 3)

    cfg = mpt.ModelConfig()
    cfg.traj_len = 4
    cfg.channels = 16
    cfg.grid_h = 8
    cfg.grid_w = 8
    cfg.app_channels = 4
    model = mpt.Model(cfg)

    run1 = mpt.run_episode(model, episode, mpt.EvalMode.joint)
    run2 = mpt.run_episode(model, episode, mpt.EvalMode.joint)
    assert run1["success_rate"] == run2["success_rate"]
    assert len(run1["frames"]) == 14
    # Identical seeds give identical models.
    assert mpt.Model(cfg).tracker_checksum() == model.tracker_checksum()
