// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <array>
#include <optional>

#include "mptrack/training.hpp"

namespace mpt {

/// Threshold grid for the success curve: 0.00, 0.05, ..., 1.00.
inline constexpr int kNumThresholds = 21;

/// Trajectory-quality bins [0.1,0.2) ... [0.9,1.0).
inline constexpr int kNumQualityBins = 9;
inline double quality_bin_lo(int b) { return 0.1 * (b + 1); }
inline double quality_bin_hi(int b) { return 0.1 * (b + 2); }

enum class TrajectorySource { kSelf, kVisionTrace, kPerfect, kQualityBin };

struct EvalConfig {
    int episodes = 100;
    std::uint64_t seed = 1000;
    SceneConfig scene;
    EvalMode mode = EvalMode::kJoint;
    TrajectorySource source = TrajectorySource::kSelf;
    int quality_bin = -1;  // with kQualityBin: 0..8
    double success_threshold = 0.5;
    double precision_center_threshold = 0.05;  // arena units
    int threads = 1;

    std::string to_json() const;
    static EvalConfig from_json(const std::string& text);
};

struct EvalReport {
    double success_rate = 0.0;
    double auc = 0.0;           // mean success over the threshold grid
    double auc_crosscheck = 0.0;  // same quantity accumulated per frame
    double precision = 0.0;     // center error below threshold
    std::array<double, kNumThresholds> threshold_success{};
    double wm_iou_pearson = 0.0;
    double wm_mse = 0.0;
    bool has_weight_stats = false;
    double failures_per_episode = 0.0;
    double mean_iou = 0.0;
    double scoremap_accuracy = 0.0;
    int episodes = 0;
    int frames = 0;

    // Success/failure case analysis vs a vision baseline (when run):
    // per-frame joint IoU at least 0.3 above / below the vision IoU.
    std::array<double, 10> success_iou_traj_hist{};
    std::array<double, 10> success_iou_last_hist{};
    std::array<double, 10> failure_iou_traj_hist{};
    std::array<double, 10> failure_iou_last_hist{};
    bool has_case_hists = false;

    std::string to_json() const;
    void write_csv(const std::string& path) const;
};

/// Evaluates a model over seeded episodes. When `episode_log_dir` is given,
/// per-frame JSON-lines logs are written there. When `with_vision_baseline`
/// is set (joint-family modes), the vision baseline runs on the same episodes
/// and the success/failure case histograms are filled.
EvalReport evaluate(const MptModel& model, const EvalConfig& cfg,
                    const std::string& episode_log_dir = "",
                    bool with_vision_baseline = false);

/// Success rate per trajectory-quality bin (Fig.-style sensitivity curve):
/// for each bin, traces are resampled to land in the bin and the model is
/// evaluated with them as the trajectory input.
std::array<double, kNumQualityBins> success_by_quality_bin(const MptModel& model,
                                                           const EvalConfig& cfg);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mpt
