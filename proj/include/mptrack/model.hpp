// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <memory>

#include "mptrack/fusion_decoder.hpp"
#include "mptrack/motion_encoder.hpp"
#include "mptrack/sim.hpp"

namespace mpt {

enum class FreezeMode { kPromptOnly, kHead, kAll };
FreezeMode freeze_mode_from_string(const std::string& s);
const char* to_string(FreezeMode m);

/// Stub visual branch: a learned projection of the appearance grid, template
/// correlation, and a tracking head (soft-argmax center + size regression).
/// Frozen during prompt learning; the same head consumes the fused map in the
/// joint path.
class ToyTracker {
public:
    ToyTracker(ParamStore& store, const ModelConfig& cfg, Rng& rng);

    struct HeadOut {
        Var score;  // [HW, 1] correlation logits (prior applied when given)
        Var box;    // [1, 4] region-normalized corners in [0,1]
    };

    Var features(Tape& t, const Tensor& obs) const;                  // [HW, C]
    Var template_embedding(Tape& t, const Tensor& template_app) const;  // [1, C]
    /// center_prior: optional [HW,1] additive logit penalty (tracking-loop
    /// displacement window; nullptr during training).
    HeadOut head(Tape& t, Var f_v, Var template_embed,
                 const Tensor* center_prior = nullptr) const;

    /// Quadratic displacement penalty around the region center, scaled by
    /// `strength`: penalty_i = -strength * d_i^2.
    Tensor make_center_prior(double strength) const;

    std::vector<Parameter*> backbone_params() const { return {vis_proj_.w, vis_proj_.b,
                                                              tmp_proj_.w, tmp_proj_.b}; }
    std::vector<Parameter*> head_params() const {
        return {size_head_.fc1.w, size_head_.fc1.b, size_head_.fc2.w, size_head_.fc2.b,
                score_scale_, score_bias_};
    }
    std::vector<Parameter*> all_params() const;

private:
    ModelConfig cfg_;
    Linear vis_proj_;  // app_channels -> C
    Linear tmp_proj_;  // app_channels -> C
    Mlp size_head_;    // C -> hidden -> 2
    Parameter* score_scale_ = nullptr;  // correlation logit calibration
    Parameter* score_bias_ = nullptr;
    Tensor cell_centers_;  // [HW, 2]
};

enum class ForcedWeight { kNone, kZero, kOne };

struct ForwardOptions {
    ForcedWeight forced_weight = ForcedWeight::kNone;
    bool compute_motion_head = true;  // the motion head is optional at inference
    const Tensor* center_prior = nullptr;  // tracking-loop displacement window
};

struct VisionResult {
    Var f_v;
    Var score;
    Var box;
};

struct JointResult {
    Var f_v;        // original visual stream
    Var fused;      // blended stream fed to the tracking head
    Var score;      // [HW, 1]
    Var box;        // [1, 4]
    Var weight;     // [1, 1]; invalid when the weight mechanism is off or forced
    Var motion_box; // [1, 4]; invalid unless compute_motion_head
    double weight_value = 1.0;
};

/// The full joint model: toy visual tracker plus the motion prompt modules
/// (encoder, fusion decoder, weight and motion heads).
class MptModel {
public:
    explicit MptModel(const ModelConfig& cfg);

    MptModel(const MptModel&) = delete;
    MptModel& operator=(const MptModel&) = delete;

    VisionResult vision_forward(Tape& t, const Tensor& obs, const Tensor& template_app,
                                const Tensor* center_prior = nullptr) const;

    /// Trajectory must be normalized to the current search region.
    JointResult joint_forward(Tape& t, const Tensor& obs, const Tensor& template_app,
                              const Trajectory& traj, const ForwardOptions& opts = {}) const;

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    ToyTracker& tracker() { return *tracker_; }
    const ToyTracker& tracker() const { return *tracker_; }
    MotionEncoder& encoder() { return *encoder_; }
    FusionDecoder& decoder() { return decoder_; }
    MotionHead& motion_head() { return motion_head_; }

    void apply_freeze_mode(FreezeMode mode);
    std::uint64_t tracker_checksum() const;

    /// Zeroes every decoder attention output projection and MLP second layer,
    /// making each block an exact identity on both streams (test config).
    void zero_decoder_output_projections();

private:
    ModelConfig cfg_;
    ParamStore store_;
    std::unique_ptr<ToyTracker> tracker_;
    std::unique_ptr<MotionEncoder> encoder_;
    FusionDecoder decoder_;
    WeightHead weight_head_;
    MotionHead motion_head_;
};

}  // namespace mpt
