// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mptrack/eval.hpp"

using namespace mpt;

namespace {

std::vector<Box> linear_trace(int len) {
    std::vector<Box> out;
    for (int i = 0; i < len; ++i) {
        const double x = 0.01 * i;
        out.push_back(Box{x, x, x + 0.1, x + 0.1});
    }
    return out;
}

ModelConfig tiny_model() {
    ModelConfig mc;
    mc.traj_len = 6;
    mc.channels = 16;
    mc.grid_h = 8;
    mc.grid_w = 8;
    mc.app_channels = 4;
    mc.decoder_mlp_hidden = 16;
    mc.head_hidden = 16;
    mc.size_head_hidden = 8;
    mc.init_seed = 42;
    return mc;
}

SceneConfig tiny_scene() {
    SceneConfig sc;
    sc.grid_h = 8;
    sc.grid_w = 8;
    sc.app_channels = 4;
    sc.episode_len = 30;
    sc.n_distractors = 1;
    return sc;
}

TrainConfig tiny_train() {
    TrainConfig tc;
    tc.epochs = 2;
    tc.pairs_per_epoch = 32;
    tc.batch_size = 8;
    tc.samples_per_episode = 8;
    tc.lr_decay_epoch = 1;
    tc.seed = 7;
    tc.threads = 1;
    return tc;
}

}  // namespace

TEST_CASE("trajectory sampling: dense forward window") {
    auto trace = linear_trace(200);
    Rng rng(1);
    // reverse_prob 0 and sparseness_max 1 force s=1 forward.
    const Trajectory tr = sample_trajectory(trace, 100, 30, 1, 0.0, rng);
    REQUIRE(tr.length() == 30);
    for (int i = 0; i < 30; ++i) {
        const int frame = 100 - 30 + i;
        CHECK(tr.boxes[static_cast<std::size_t>(i)].x1 ==
              doctest::Approx(trace[static_cast<std::size_t>(frame)].x1));
    }
}

TEST_CASE("trajectory sampling: span, length, and no current-frame leak") {
    auto trace = linear_trace(400);
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        const int current = 1 + static_cast<int>(rng.below(398));
        const Trajectory tr = sample_trajectory(trace, current, 30, 5, 0.5, rng);
        CHECK(tr.length() == 30);
        for (const Box& b : tr.boxes) {
            // x1 encodes the source frame: frame = x1 / 0.01.
            const int frame = static_cast<int>(std::lround(b.x1 / 0.01));
            CHECK(frame != current);
        }
    }
    // s = 5, T = 30 spans 150 frames.
    Rng rng2(9);
    bool saw_full_span = false;
    for (int rep = 0; rep < 300 && !saw_full_span; ++rep) {
        const Trajectory tr = sample_trajectory(trace, 350, 30, 5, 0.0, rng2);
        const int oldest = static_cast<int>(std::lround(tr.boxes[0].x1 / 0.01));
        const int newest = static_cast<int>(std::lround(tr.boxes[29].x1 / 0.01));
        if (newest - oldest == 145 && 350 - oldest == 150) saw_full_span = true;
    }
    CHECK(saw_full_span);
}

TEST_CASE("trajectory sampling: short episode pads by replication") {
    auto trace = linear_trace(5);
    Rng rng(2);
    const Trajectory tr = sample_trajectory(trace, 4, 10, 3, 0.0, rng);
    REQUIRE(tr.length() == 10);
    CHECK(tr.boxes[0].x1 == trace[0].x1);  // padded
    CHECK(tr.boxes[9].x1 == trace[3].x1);  // newest = current - 1
}

TEST_CASE("reverse sampling mirrors future frames") {
    auto trace = linear_trace(100);
    Rng rng(4);
    const Trajectory tr = sample_trajectory(trace, 10, 8, 1, 1.0, rng);
    // Newest slot is current + 1; oldest is current + 8.
    CHECK(std::lround(tr.boxes[7].x1 / 0.01) == 11);
    CHECK(std::lround(tr.boxes[0].x1 / 0.01) == 18);
}

TEST_CASE("jittered traces hit requested quality bins") {
    SceneConfig sc = tiny_scene();
    sc.n_distractors = 0;
    const Episode ep = simulate_episode(sc, 31);
    Rng rng(5);
    for (const int b : {0, 4, 8}) {
        const double lo = quality_bin_lo(b), hi = quality_bin_hi(b);
        const auto trace = trace_for_bin(ep, rng, lo, hi);
        double acc = 0.0;
        for (std::size_t i = 0; i < trace.size(); ++i) acc += iou(trace[i], ep.gt[i]);
        acc /= static_cast<double>(trace.size());
        INFO("bin " << b << " got " << acc);
        CHECK(acc >= lo - 0.05);
        CHECK(acc < hi + 0.05);
    }
    // Perfect trace: ground truth itself.
    double acc = 0.0;
    for (std::size_t i = 0; i < ep.gt.size(); ++i) acc += iou(ep.gt[i], ep.gt[i]);
    CHECK(acc / static_cast<double>(ep.gt.size()) == doctest::Approx(1.0));
}

TEST_CASE("loss decomposition: lambda_m = 0 is the tracking term, bit-exact") {
    const ModelConfig mc = tiny_model();
    MptModel model(mc);
    SceneConfig sc = tiny_scene();
    const Episode ep = simulate_episode(sc, 3);
    const int frame = 10;
    const SearchRegion region = region_around(ep.gt[frame], sc.region_scale, 0.05);
    const Tensor obs = render_observation(ep, frame, region);
    const Box gt_norm = normalize_to_region(ep.gt[frame], region);
    std::vector<Box> hist(ep.gt.begin(), ep.gt.begin() + frame);
    const Trajectory window = normalize_to_region(
        window_from_history(hist, static_cast<std::size_t>(mc.traj_len)), region);

    Tape t1;
    const auto out1 = model.joint_forward(t1, obs, ep.target_appearance, window);
    LossWeights lw;
    lw.lambda_m = 0.0;
    const auto total = total_loss(t1, out1, gt_norm, mc.grid_h, mc.grid_w, lw);
    const Var tr_only = tracking_loss(t1, out1.score, out1.box, gt_norm, mc.grid_h, mc.grid_w);
    CHECK(t1.value(total.total).bit_equal(t1.value(tr_only)));

    // Weight label equals the geometry-module IoU of the motion box.
    Tape t2;
    const auto out2 = model.joint_forward(t2, obs, ep.target_appearance, window);
    const auto full = total_loss(t2, out2, gt_norm, mc.grid_h, mc.grid_w, LossWeights{});
    CHECK(full.weight_label ==
          doctest::Approx(iou(box_from_tensor(t2.value(out2.motion_box)), gt_norm))
              .epsilon(1e-15));
}

TEST_CASE("hand-computed loss: perfect motion box") {
    // B_M == GT and W_M = 0.5: the motion terms vanish and the weight term is
    // (0.5 - 1)^2 = 0.25.
    Tape t;
    JointResult out;
    const Box gt{0.0, 0.0, 1.0, 1.0};
    out.motion_box = t.input(Tensor::from_rows(1, 4, {0, 0, 1, 1}));
    out.weight = t.input(Tensor::scalar(0.5));

    const Var l_m_giou = giou_loss(t, out.motion_box, gt);
    CHECK(t.value(l_m_giou)[0] == doctest::Approx(0.0).epsilon(1e-15));
    const Var l_m_l1 = l1_loss(t, out.motion_box, gt);
    CHECK(t.value(l_m_l1)[0] == doctest::Approx(0.0).epsilon(1e-15));

    const double label = iou(Box{0, 0, 1, 1}, gt);
    CHECK(label == 1.0);
    const Var diff = t.add_const(out.weight, -label);
    CHECK(t.value(t.mul(diff, diff))[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("prompt-only training leaves the tracker untouched; finetune_all changes it") {
    const ModelConfig mc = tiny_model();
    const SceneConfig sc = tiny_scene();
    TrainConfig tc = tiny_train();

    {
        MptModel model(mc);
        const std::uint64_t before = model.tracker_checksum();
        tc.freeze_mode = FreezeMode::kPromptOnly;
        train_mpt(model, tc, sc);
        CHECK(model.tracker_checksum() == before);
    }
    {
        MptModel model(mc);
        const std::uint64_t before = model.tracker_checksum();
        tc.freeze_mode = FreezeMode::kAll;
        train_mpt(model, tc, sc);
        CHECK(model.tracker_checksum() != before);
    }
    {
        MptModel model(mc);
        const Tensor vis_before = model.params().find("tracker.vis_proj.w")->value;
        const Tensor size_before = model.params().find("tracker.size_head.fc1.w")->value;
        tc.freeze_mode = FreezeMode::kHead;
        train_mpt(model, tc, sc);
        CHECK(model.params().find("tracker.vis_proj.w")->value.bit_equal(vis_before));
        CHECK(!model.params().find("tracker.size_head.fc1.w")->value.bit_equal(size_before));
    }
}

TEST_CASE("training metrics are deterministic for identical config and seed") {
    const ModelConfig mc = tiny_model();
    const SceneConfig sc = tiny_scene();
    const TrainConfig tc = tiny_train();

    const auto run_once = [&](const std::string& name) {
        MptModel model(mc);
        const auto result = train_mpt(model, tc, sc);
        const auto path = std::filesystem::temp_directory_path() / name;
        write_metrics_csv(path.string(), result.epochs);
        std::ifstream f(path);
        std::stringstream ss;
        ss << f.rdbuf();
        std::filesystem::remove(path);
        return ss.str();
    };
    const std::string a = run_once("mpt_metrics_a.csv");
    const std::string b = run_once("mpt_metrics_b.csv");
    CHECK(a == b);
    CHECK(a.find("epoch,loss_total") == 0);
}

TEST_CASE("lr column reflects the step decay") {
    const ModelConfig mc = tiny_model();
    const SceneConfig sc = tiny_scene();
    TrainConfig tc = tiny_train();
    tc.epochs = 3;
    tc.lr_decay_epoch = 2;
    MptModel model(mc);
    const auto result = train_mpt(model, tc, sc);
    REQUIRE(result.epochs.size() == 3);
    CHECK(result.epochs[0].lr == tc.base_lr);
    CHECK(result.epochs[1].lr == tc.base_lr);
    CHECK(result.epochs[2].lr == tc.base_lr / 10.0);
}

TEST_CASE("threaded batches reproduce the configured layout deterministically") {
    const ModelConfig mc = tiny_model();
    const SceneConfig sc = tiny_scene();
    TrainConfig tc = tiny_train();
    tc.threads = 2;
    MptModel m1(mc);
    MptModel m2(mc);
    const auto r1 = train_mpt(m1, tc, sc);
    const auto r2 = train_mpt(m2, tc, sc);
    REQUIRE(r1.epochs.size() == r2.epochs.size());
    for (std::size_t i = 0; i < r1.epochs.size(); ++i)
        CHECK(r1.epochs[i].loss_total == r2.epochs[i].loss_total);
    CHECK(m1.params().checksum() == m2.params().checksum());
}
