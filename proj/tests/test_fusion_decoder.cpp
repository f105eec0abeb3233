// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include <doctest.h>

#include <cmath>

#include "fd_ops.hpp"
#include "mptrack/training.hpp"

using namespace mpt;

namespace {

ModelConfig small_config() {
    ModelConfig mc;
    mc.traj_len = 4;
    mc.channels = 16;
    mc.grid_h = 4;
    mc.grid_w = 4;
    mc.app_channels = 4;
    mc.decoder_mlp_hidden = 24;
    mc.head_hidden = 24;
    mc.size_head_hidden = 8;
    mc.init_seed = 11;
    return mc;
}

struct SmallScene {
    Episode episode;
    Tensor obs;
    Box gt_norm;
    Trajectory window_norm;
    SearchRegion region;
};

SmallScene make_small_scene(const ModelConfig& mc, std::uint64_t seed = 4) {
    SceneConfig sc;
    sc.grid_h = mc.grid_h;
    sc.grid_w = mc.grid_w;
    sc.app_channels = mc.app_channels;
    sc.episode_len = 16;
    SmallScene s;
    s.episode = simulate_episode(sc, seed);
    const int frame = 8;
    s.region = region_around(s.episode.gt[frame], sc.region_scale, 0.05);
    s.obs = render_observation(s.episode, frame, s.region);
    s.gt_norm = normalize_to_region(s.episode.gt[frame], s.region);
    std::vector<Box> hist(s.episode.gt.begin(), s.episode.gt.begin() + frame);
    s.window_norm = normalize_to_region(
        window_from_history(hist, static_cast<std::size_t>(mc.traj_len)), s.region);
    return s;
}

}  // namespace

TEST_CASE("decode preserves shapes and rep rows") {
    const ModelConfig mc = small_config();
    MptModel model(mc);
    const SmallScene s = make_small_scene(mc);

    Tape t;
    const auto out = model.joint_forward(t, s.obs, s.episode.target_appearance, s.window_norm);
    CHECK(t.value(out.f_v).rows() == 16);
    CHECK(t.value(out.f_v).cols() == 16);
    CHECK(t.value(out.fused).rows() == 16);
    CHECK(t.value(out.score).rows() == 16);
    CHECK(t.value(out.score).cols() == 1);
    CHECK(t.value(out.box).cols() == 4);
    CHECK(t.value(out.motion_box).cols() == 4);
}

TEST_CASE("zero output projections make each block an identity") {
    const ModelConfig mc = small_config();
    ParamStore store;
    Rng rng(3);
    DecoderBlock block = DecoderBlock::create(store, "decoder.block0", mc, rng);
    for (auto& p : store.all())
        if (p.name.ends_with(".o.w") || p.name.ends_with(".o.b") ||
            p.name.ends_with(".mlp.fc2.w") || p.name.ends_with(".mlp.fc2.b"))
            p.value.fill(0.0);

    Rng data(9);
    Tensor motion(11, 16), vision(16, 16), mpe(11, 16), dsm(16, 16);
    for (std::size_t i = 0; i < motion.size(); ++i) motion[i] = data.uniform(-1, 1);
    for (std::size_t i = 0; i < vision.size(); ++i) vision[i] = data.uniform(-1, 1);
    for (std::size_t i = 0; i < mpe.size(); ++i) mpe[i] = data.uniform(-1, 1);
    for (std::size_t i = 0; i < dsm.size(); ++i) dsm[i] = data.uniform(-1, 1);

    Tape t;
    const Var m = t.input(motion);
    const Var v = t.input(vision);
    const auto out = block.forward(t, m, v, t.input(mpe), t.input(dsm), 8);
    CHECK(t.value(out.motion).bit_equal(motion));
    CHECK(t.value(out.vision).bit_equal(vision));
}

TEST_CASE("rep cross-attention consumes exactly three key rows") {
    // The visual update must not change when every non-rep motion row is
    // overwritten, proving only the 3 rep rows feed step (4).
    const ModelConfig mc = small_config();
    ParamStore store;
    Rng rng(5);
    DecoderBlock block = DecoderBlock::create(store, "decoder.block0", mc, rng);

    Rng data(13);
    Tensor vision(16, 16), mpe(11, 16), dsm(16, 16);
    for (std::size_t i = 0; i < vision.size(); ++i) vision[i] = data.uniform(-1, 1);
    for (std::size_t i = 0; i < mpe.size(); ++i) mpe[i] = data.uniform(-1, 1);
    for (std::size_t i = 0; i < dsm.size(); ++i) dsm[i] = data.uniform(-1, 1);

    // Same rep rows, different point-token rows, fed directly into step (4)
    // by isolating it: motion streams that agree on rows 8..10 after the
    // preceding sub-layers would be hard to construct, so instead check the
    // attention itself: it is invariant to non-rep rows by construction.
    Tensor m_a(11, 16), m_b(11, 16);
    for (std::size_t i = 0; i < m_a.size(); ++i) m_a[i] = data.uniform(-1, 1);
    m_b = m_a;
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 16; ++c) m_b.at(r, c) = data.uniform(-1, 1);

    Tape t;
    const Var va = t.input(vision);
    const Var rep_a = block.ln_rep_kv.apply(t, t.slice_rows(t.input(m_a), 8, 11));
    const Var rep_b = block.ln_rep_kv.apply(t, t.slice_rows(t.input(m_b), 8, 11));
    CHECK(t.value(rep_a).rows() == 3);
    const Var q = t.add(block.ln_vis_q.apply(t, va), t.input(dsm));
    const Tensor out_a = t.value(block.cross_vr.apply(t, q, rep_a, rep_a));
    const Tensor out_b = t.value(block.cross_vr.apply(t, q, rep_b, rep_b));
    CHECK(out_a.bit_equal(out_b));
}

TEST_CASE("attention rows of the rep cross-attention sum to one") {
    // Softmax over 3 keys: weights per visual query sum to 1. Checked through
    // the op directly (the module test above pins the key count).
    Tape t;
    Rng rng(2);
    Tensor scores(5, 3);
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = rng.uniform(-2, 2);
    const Tensor& w = t.value(t.softmax_rows(t.input(scores)));
    for (std::size_t r = 0; r < 5; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c) s += w.at(r, c);
        CHECK(std::fabs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("weight head output lies in [0,1]; zeroed head gives 0.5") {
    const ModelConfig mc = small_config();
    ParamStore store;
    Rng rng(21);
    WeightHead wh = WeightHead::create(store, "weight_head", mc, rng);
    Rng data(4);
    for (int i = 0; i < 20; ++i) {
        Tensor row(1, 16);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = data.uniform(-5, 5);
        Tape t;
        const double w = t.value(wh.predict(t, t.input(row)))[0];
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
    }
    for (Parameter* p : {wh.mlp.fc1.w, wh.mlp.fc1.b, wh.mlp.fc2.w, wh.mlp.fc2.b})
        p->value.fill(0.0);
    Tape t;
    Tensor row(1, 16);
    row.fill(1.3);
    CHECK(t.value(wh.predict(t, t.input(row)))[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("motion head box is ordered and inside the unit square") {
    const ModelConfig mc = small_config();
    ParamStore store;
    Rng rng(31);
    MotionHead mh = MotionHead::create(store, "motion_head", mc, rng);
    Rng data(6);
    for (int i = 0; i < 50; ++i) {
        Tensor tl(1, 16), br(1, 16);
        for (std::size_t c = 0; c < tl.size(); ++c) {
            tl[c] = data.uniform(-8, 8);
            br[c] = data.uniform(-8, 8);
        }
        Tape t;
        const Tensor& b = t.value(mh.predict(t, t.input(tl), t.input(br)));
        CHECK(b[0] <= b[2]);
        CHECK(b[1] <= b[3]);
        for (int k = 0; k < 4; ++k) {
            CHECK(b[static_cast<std::size_t>(k)] >= 0.0);
            CHECK(b[static_cast<std::size_t>(k)] <= 1.0);
        }
    }
}

TEST_CASE("adaptive fuse endpoints and linearity") {
    Tape t;
    Rng rng(12);
    Tensor a(4, 3), b(4, 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform(-2, 2);
        b[i] = rng.uniform(-2, 2);
    }
    const Var va = t.input(a), vb = t.input(b);
    const Tensor& f0 = t.value(adaptive_fuse(t, va, vb, t.input(Tensor::scalar(0.0))));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(f0[i] == a[i]);
    const Tensor& f1 = t.value(adaptive_fuse(t, va, vb, t.input(Tensor::scalar(1.0))));
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(f1[i] == b[i]);

    const Var zeros = t.input(Tensor(4, 3));
    const Tensor& fh = t.value(adaptive_fuse(t, zeros, vb, t.input(Tensor::scalar(0.5))));
    for (std::size_t i = 0; i < b.size(); ++i)
        CHECK(fh[i] == doctest::Approx(0.5 * b[i]).epsilon(1e-15));

    CHECK_THROWS(adaptive_fuse(t, va, t.input(Tensor(2, 2)), t.input(Tensor::scalar(0.5))));
}

TEST_CASE("identity paths: forced weight 0 bypasses, zero projections + forced 1") {
    const ModelConfig mc = small_config();
    const SmallScene s = make_small_scene(mc);

    // Path 1: forced weight 0 reproduces the vision output bit-exactly.
    {
        MptModel model(mc);
        Tape tv;
        const auto vis = model.vision_forward(tv, s.obs, s.episode.target_appearance);
        Tape tj;
        ForwardOptions fo;
        fo.forced_weight = ForcedWeight::kZero;
        fo.compute_motion_head = false;
        const auto joint =
            model.joint_forward(tj, s.obs, s.episode.target_appearance, s.window_norm, fo);
        CHECK(tj.value(joint.box).bit_equal(tv.value(vis.box)));
        CHECK(tj.value(joint.score).bit_equal(tv.value(vis.score)));
        CHECK(tj.value(joint.fused).bit_equal(tv.value(vis.f_v)));
    }

    // Path 2: zeroed decoder output projections + forced weight 1 leave the
    // visual stream untouched.
    {
        MptModel model(mc);
        model.zero_decoder_output_projections();
        Tape t;
        ForwardOptions fo;
        fo.forced_weight = ForcedWeight::kOne;
        const auto joint =
            model.joint_forward(t, s.obs, s.episode.target_appearance, s.window_norm, fo);
        CHECK(t.value(joint.fused).bit_equal(t.value(joint.f_v)));
    }
}

TEST_CASE("decode is deterministic") {
    const ModelConfig mc = small_config();
    const SmallScene s = make_small_scene(mc);
    MptModel m1(mc);
    MptModel m2(mc);
    Tape t1, t2;
    const auto o1 = m1.joint_forward(t1, s.obs, s.episode.target_appearance, s.window_norm);
    const auto o2 = m2.joint_forward(t2, s.obs, s.episode.target_appearance, s.window_norm);
    CHECK(t1.value(o1.box).bit_equal(t2.value(o2.box)));
    CHECK(t1.value(o1.score).bit_equal(t2.value(o2.score)));
    CHECK(o1.weight_value == o2.weight_value);
}

TEST_CASE("full pipeline gradient check on the small config") {
    const ModelConfig mc = small_config();
    MptModel model(mc);
    mpt::testing::randomize_decoder_outputs(model, 91);
    model.apply_freeze_mode(FreezeMode::kAll);
    const SmallScene s = make_small_scene(mc);

    // The weight label is detached supervision; pin it so finite differences
    // perturb the same function the tape differentiates.
    LossWeights lw;
    {
        Tape t0(false);
        const auto out0 =
            model.joint_forward(t0, s.obs, s.episode.target_appearance, s.window_norm);
        lw.weight_label_override = iou(box_from_tensor(t0.value(out0.motion_box)), s.gt_norm);
    }
    const auto fwd = [&](Tape& t) {
        const auto out =
            model.joint_forward(t, s.obs, s.episode.target_appearance, s.window_norm);
        return total_loss(t, out, s.gt_norm, mc.grid_h, mc.grid_w, lw).total;
    };
    std::vector<Parameter*> params;
    for (auto& p : model.params().all()) params.push_back(&p);
    const auto res = grad_check(fwd, params, 1e-6);
    INFO("worst: " << res.worst_param << "[" << res.worst_index << "]");
    REQUIRE(res.finite);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("frozen tracker reports zero gradient through the joint loss") {
    const ModelConfig mc = small_config();
    MptModel model(mc);
    mpt::testing::randomize_decoder_outputs(model, 92);
    model.apply_freeze_mode(FreezeMode::kPromptOnly);
    const SmallScene s = make_small_scene(mc);

    Tape t;
    const auto out = model.joint_forward(t, s.obs, s.episode.target_appearance, s.window_norm);
    const auto loss = total_loss(t, out, s.gt_norm, mc.grid_h, mc.grid_w, LossWeights{});
    t.backward(loss.total);
    t.accumulate_param_grads();
    for (Parameter* p : model.tracker().all_params())
        for (std::size_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);

    bool prompt_grad = false;
    const Parameter* tpe = model.params().find("encoder.tpe");
    for (std::size_t i = 0; i < tpe->grad.size(); ++i)
        prompt_grad = prompt_grad || tpe->grad[i] != 0.0;
    CHECK(prompt_grad);
}
