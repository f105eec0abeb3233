// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include "mptrack/losses.hpp"
#include "mptrack/model.hpp"
#include "mptrack/sim.hpp"

namespace mpt {

enum class EvalMode { kVision, kMotion, kJoint, kNoWeight };
EvalMode eval_mode_from_string(const std::string& s);
const char* to_string(EvalMode m);

struct FrameLog {
    int frame = 0;
    Box gt;
    Box pred;          // arena coordinates, clamped into the arena
    Box b_m;           // motion-head box (arena), when computed
    bool has_b_m = false;
    double w_m = 1.0;  // blend weight actually used
    double iou_value = 0.0;
    bool occluded = false;
    bool scoremap_hit = false;  // score argmax cell contains the gt center
    double traj_quality = 0.0;  // mean IoU of the input window vs per-frame gt
    double iou_last = 0.0;      // IoU of the newest window box vs its frame's gt
};

struct EpisodeRun {
    std::vector<FrameLog> frames;

    double success_rate(double threshold = 0.5) const;
    double mean_iou() const;
    double scoremap_accuracy() const;
    /// Robustness analog: disjoint runs of at least `run_len` consecutive
    /// frames with IoU exactly zero.
    int failure_events(int run_len = 10) const;
};

struct TrackOptions {
    EvalMode mode = EvalMode::kJoint;
    /// External per-frame trace in arena coordinates (only frames < t are
    /// consumed at step t). nullptr tracks on the model's own predictions.
    const std::vector<Box>* trajectory_source = nullptr;
    bool compute_motion_head = true;
    double min_region_side = 0.05;
    /// State-update damping: the tracked size blends the prediction with the
    /// previous size, and the per-frame scale change is clamped. Keeps one bad
    /// frame from collapsing or exploding the search region.
    /// Scale handling of the tracked state. Entities keep their size in this
    /// simulator, so the default locks the search-region scale to the
    /// first-frame target size (max_scale_step = 1 disables adaptation);
    /// predictions themselves always carry the regressed size.
    double size_damping = 0.25;       // fraction taken from the new prediction
    double max_scale_step = 1.0;      // per-frame scale change bound
    double min_box_size = 1e-3;
    /// Additive displacement window on the score logits (0 disables): the
    /// usual local-tracker response window, applied at inference only.
    double center_prior_strength = 1.0;
};

/// Tracks one episode frame by frame: crop the search region around the
/// previous prediction, normalize the trajectory window into it, run the
/// selected mode, and log per-frame results. Frame 0 is initialized with
/// ground truth.
EpisodeRun run_episode(const MptModel& model, const Episode& ep, const TrackOptions& opts);

/// Per-frame boxes produced by vision-only tracking (frame 0 = ground truth).
std::vector<Box> vision_trace(const MptModel& model, const Episode& ep);

void write_episode_log(const std::string& path, const EpisodeRun& run);

}  // namespace mpt
