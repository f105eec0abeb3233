// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/model.hpp"

#include <cmath>
#include <stdexcept>

namespace mpt {

FreezeMode freeze_mode_from_string(const std::string& s) {
    if (s == "prompt_only") return FreezeMode::kPromptOnly;
    if (s == "head") return FreezeMode::kHead;
    if (s == "all") return FreezeMode::kAll;
    throw std::invalid_argument("unknown freeze mode: " + s);
}

const char* to_string(FreezeMode m) {
    switch (m) {
        case FreezeMode::kPromptOnly: return "prompt_only";
        case FreezeMode::kHead: return "head";
        case FreezeMode::kAll: return "all";
    }
    return "prompt_only";
}

ToyTracker::ToyTracker(ParamStore& store, const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    const auto c = static_cast<std::size_t>(cfg.channels);
    const auto ca = static_cast<std::size_t>(cfg.app_channels);
    vis_proj_ = Linear::create(store, "tracker.vis_proj", ca, c, rng, 0.2);
    tmp_proj_ = Linear::create(store, "tracker.tmp_proj", ca, c, rng, 0.2);
    // Size input: softly pooled feature plus the response-spread statistics.
    size_head_ = Mlp::create(store, "tracker.size_head", c + 2, cfg.size_head_hidden, 2, rng,
                             0.2);
    score_scale_ = &store.create("tracker.score_scale", Tensor::full(1, 1, 1.0));
    score_bias_ = &store.create("tracker.score_bias", Tensor(1, 1));

    cell_centers_ = Tensor(static_cast<std::size_t>(cfg.grid_h) * cfg.grid_w, 2);
    std::size_t i = 0;
    for (int r = 0; r < cfg.grid_h; ++r)
        for (int col = 0; col < cfg.grid_w; ++col) {
            cell_centers_.at(i, 0) = (col + 0.5) / static_cast<double>(cfg.grid_w);
            cell_centers_.at(i, 1) = (r + 0.5) / static_cast<double>(cfg.grid_h);
            ++i;
        }
}

std::vector<Parameter*> ToyTracker::all_params() const {
    auto out = backbone_params();
    for (Parameter* p : head_params()) out.push_back(p);
    return out;
}

Var ToyTracker::features(Tape& t, const Tensor& obs) const {
    if (obs.rows() != static_cast<std::size_t>(cfg_.grid_h) * cfg_.grid_w ||
        obs.cols() != static_cast<std::size_t>(cfg_.app_channels))
        throw std::invalid_argument("tracker features: observation shape mismatch");
    return vis_proj_.apply(t, t.input(obs));
}

Var ToyTracker::template_embedding(Tape& t, const Tensor& template_app) const {
    return tmp_proj_.apply(t, t.input(template_app));
}

Tensor ToyTracker::make_center_prior(double strength) const {
    Tensor prior(cell_centers_.rows(), 1);
    for (std::size_t i = 0; i < prior.rows(); ++i) {
        const double dx = cell_centers_.at(i, 0) - 0.5;
        const double dy = cell_centers_.at(i, 1) - 0.5;
        prior[i] = -strength * (dx * dx + dy * dy);
    }
    return prior;
}

ToyTracker::HeadOut ToyTracker::head(Tape& t, Var f_v, Var template_embed,
                                     const Tensor* center_prior) const {
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(cfg_.channels));
    const Var corr = t.scale(t.matmul_nt(f_v, template_embed), inv_sqrt_c);  // [HW, 1]
    // Calibrated logits: a flat raw correlation map cannot satisfy the focal
    // targets, so scale and bias are learned.
    Var score = t.add_row(t.mul_bcast(corr, t.param(*score_scale_)), t.param(*score_bias_));
    if (center_prior != nullptr) score = t.add(score, t.input(*center_prior));

    // Center from a sharp soft-argmax; size from a softer pooling that keeps
    // the whole response blob in view, plus its spatial spread.
    const Var cells = t.input(cell_centers_);
    const Var sharp = t.softmax_rows(t.scale(t.transpose(score), cfg_.softargmax_tau));
    const Var center = t.matmul(sharp, cells);  // [1, 2]

    const Var soft = t.softmax_rows(t.scale(t.transpose(score), cfg_.pool_tau));  // [1, HW]
    const Var pooled = t.matmul(soft, f_v);                                       // [1, C]
    Tensor cells_sq(cell_centers_.rows(), 2);
    for (std::size_t i = 0; i < cells_sq.rows(); ++i) {
        cells_sq.at(i, 0) = cell_centers_.at(i, 0) * cell_centers_.at(i, 0);
        cells_sq.at(i, 1) = cell_centers_.at(i, 1) * cell_centers_.at(i, 1);
    }
    const Var mean1 = t.matmul(soft, cells);                 // [1, 2]
    const Var mean2 = t.matmul(soft, t.input(cells_sq));     // [1, 2]
    const Var spread =
        t.sqrt(t.add_const(t.relu(t.sub(mean2, t.mul(mean1, mean1))), 1e-8));
    const Var size =
        t.sigmoid(size_head_.apply(t, t.concat_cols({pooled, spread})));  // [1, 2]

    const Var cx = t.slice_cols(center, 0, 1);
    const Var cy = t.slice_cols(center, 1, 2);
    const Var hw = t.scale(t.slice_cols(size, 0, 1), 0.5);
    const Var hh = t.scale(t.slice_cols(size, 1, 2), 0.5);
    const Var x1 = t.clamp01(t.sub(cx, hw));
    const Var y1 = t.clamp01(t.sub(cy, hh));
    const Var x2 = t.clamp01(t.add(cx, hw));
    const Var y2 = t.clamp01(t.add(cy, hh));
    return HeadOut{score, t.concat_cols({x1, y1, x2, y2})};
}

MptModel::MptModel(const ModelConfig& cfg) : cfg_(cfg) {
    Rng rng(cfg.init_seed);
    tracker_ = std::make_unique<ToyTracker>(store_, cfg_, rng);
    encoder_ = std::make_unique<MotionEncoder>(store_, cfg_, rng);
    decoder_ = FusionDecoder(store_, cfg_, rng);
    weight_head_ = WeightHead::create(store_, "weight_head", cfg_, rng);
    motion_head_ = MotionHead::create(store_, "motion_head", cfg_, rng);
    // The visual stream starts untouched: the projection that writes motion
    // content into it is zero, so an untrained prompt module cannot corrupt
    // the frozen tracker's features. The motion-side sub-layers keep their
    // random init and train at full speed.
    for (auto& p : store_.all()) {
        const bool vis_out = p.name.rfind("decoder.", 0) == 0 &&
                             (p.name.ends_with(".cross_vr.o.w") ||
                              p.name.ends_with(".cross_vr.o.b"));
        if (vis_out) p.value.fill(0.0);
    }
}

VisionResult MptModel::vision_forward(Tape& t, const Tensor& obs, const Tensor& template_app,
                                      const Tensor* center_prior) const {
    const Var f_v = tracker_->features(t, obs);
    const Var z = tracker_->template_embedding(t, template_app);
    const auto out = tracker_->head(t, f_v, z, center_prior);
    return VisionResult{f_v, out.score, out.box};
}

JointResult MptModel::joint_forward(Tape& t, const Tensor& obs, const Tensor& template_app,
                                    const Trajectory& traj, const ForwardOptions& opts) const {
    JointResult res;
    res.f_v = tracker_->features(t, obs);
    const Var z = tracker_->template_embedding(t, template_app);

    if (opts.forced_weight == ForcedWeight::kZero && !opts.compute_motion_head) {
        // Pure bypass: the decoder cannot influence the output.
        res.fused = res.f_v;
        res.weight_value = 0.0;
        const auto out = tracker_->head(t, res.fused, z, opts.center_prior);
        res.score = out.score;
        res.box = out.box;
        return res;
    }

    const Var f_m = encoder_->encode(t, traj);
    const Var mpe = encoder_->motion_positional(t);
    const Var dsm = encoder_->dense_spatial_map(t);
    const auto dec = decoder_.decode(t, f_m, res.f_v, mpe, dsm);

    if (opts.compute_motion_head) {
        const Var rep_tl = t.slice_rows(dec.rep_out, 0, 1);
        const Var rep_br = t.slice_rows(dec.rep_out, 1, 2);
        res.motion_box = motion_head_.predict(t, rep_tl, rep_br);
    }

    if (opts.forced_weight == ForcedWeight::kZero) {
        res.fused = res.f_v;
        res.weight_value = 0.0;
    } else if (opts.forced_weight == ForcedWeight::kOne || !cfg_.weight_mechanism) {
        // "w/o Weight": the decoder output feeds the head directly.
        res.fused = dec.vision;
        res.weight_value = 1.0;
    } else {
        const Var rep_w = t.slice_rows(dec.rep_out, 2, 3);
        res.weight = weight_head_.predict(t, rep_w);
        res.fused = adaptive_fuse(t, res.f_v, dec.vision, res.weight);
        res.weight_value = t.value(res.weight)[0];
    }

    const auto out = tracker_->head(t, res.fused, z, opts.center_prior);
    res.score = out.score;
    res.box = out.box;
    return res;
}

void MptModel::apply_freeze_mode(FreezeMode mode) {
    const bool freeze_backbone = (mode == FreezeMode::kPromptOnly || mode == FreezeMode::kHead);
    const bool freeze_head = (mode == FreezeMode::kPromptOnly);
    for (Parameter* p : tracker_->backbone_params()) p->frozen = freeze_backbone;
    for (Parameter* p : tracker_->head_params()) p->frozen = freeze_head;
    // Prompt-module parameters keep their structural freezes (disabled TPE,
    // disabled point embeddings) regardless of mode.
}

std::uint64_t MptModel::tracker_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Parameter* p : tracker_->all_params()) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
        const std::size_t n = p->value.size() * sizeof(double);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

void MptModel::zero_decoder_output_projections() {
    for (auto& p : store_.all()) {
        const bool is_attn_out = p.name.find("decoder.") == 0 &&
                                 (p.name.ends_with(".o.w") || p.name.ends_with(".o.b"));
        const bool is_mlp_out = p.name.find("decoder.") == 0 &&
                                (p.name.ends_with(".mlp.fc2.w") || p.name.ends_with(".mlp.fc2.b"));
        if (is_attn_out || is_mlp_out) p.value.fill(0.0);
    }
}

}  // namespace mpt
