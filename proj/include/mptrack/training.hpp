// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <functional>
#include <optional>

#include "mptrack/optim.hpp"
#include "mptrack/tracking.hpp"

namespace mpt {

struct TrainConfig {
    int epochs = 60;
    int pairs_per_epoch = 6000;
    int batch_size = 32;
    int lr_decay_epoch = 40;
    double base_lr = 1e-3;
    double weight_decay = 1e-4;
    int samples_per_episode = 10;
    int sparseness_max = 5;
    double cutmix_prob = 0.5;
    double reverse_sample_prob = 0.5;
    /// Probability of replacing the tracker-trace window with a ground-truth
    /// window jittered at a random magnitude. Spreads the motion-quality label
    /// across its full range so the confidence head sees both regimes.
    double quality_mix_prob = 0.35;
    FreezeMode freeze_mode = FreezeMode::kPromptOnly;
    double lambda_iou = 2.0;
    double lambda_l1 = 5.0;
    double lambda_m = 1.0;
    bool loss_weight_term = true;  // drop for the L_Tr + L_M ablation
    double divergence_factor = 10.0;
    int divergence_patience = 3;
    int threads = 1;  // worker lanes for batch gradients; part of the config
    std::uint64_t seed = 0;

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

/// Sparse trajectory sampling around a training frame. Spacing s is uniform in
/// {1..sparseness_max} (shrunk when the episode is too short); the window is
/// taken before the current frame, or mirrored from after it with probability
/// reverse_prob. Boxes come from the given (noisy) trace; the current frame is
/// never included. Out-of-range slots replicate the nearest available box.
Trajectory sample_trajectory(const std::vector<Box>& trace, int current_frame, int traj_len,
                             int sparseness_max, double reverse_prob, Rng& rng);

/// Parametric jitter: per frame, center shifted by a Gaussian scaled to the
/// box extent and size scaled log-normally.
std::vector<Box> jittered_trace(const Episode& ep, Rng& rng, double sigma_center,
                                double sigma_size);

/// Tracker-like degradation: alternating locked segments (ground truth plus
/// mild jitter) and lost segments that follow a diverging constant-velocity
/// ghost from the loss point. dial in [0,1] moves the trace from near-perfect
/// to mostly lost.
std::vector<Box> drifted_trace(const Episode& ep, Rng& rng, double dial);

/// Trace whose mean IoU against ground truth lands in [lo, hi): bisects the
/// drift dial, then rejection-resamples. Returns the nearest achieved trace
/// if the bin is not hit within max_tries.
std::vector<Box> trace_for_bin(const Episode& ep, Rng& rng, double lo, double hi,
                               int max_tries = 100);

/// Feature-level distractor injection; returns true if a blob was placed.
bool cutmix_observation(Tensor& obs, const Episode& ep, int frame, const SearchRegion& region,
                        double prob, Rng& rng);

struct EpochMetrics {
    int epoch = 0;
    double loss_total = 0.0;
    double loss_tr = 0.0;
    double loss_m = 0.0;
    double loss_w = 0.0;
    double train_iou = 0.0;
    double scoremap_acc = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochMetrics> epochs;
    bool diverged = false;
    std::string divergence_term;
};

/// Thrown when the loss exceeds divergence_factor x the first-epoch loss for
/// divergence_patience consecutive epochs.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Prompt-learning loop over synthetic episodes. The model must already carry
/// the pretrained tracker weights; freezing follows cfg.freeze_mode. Episode
/// banks, trajectories and augmentations are reseeded per (seed, epoch,
/// index), so results do not depend on worker scheduling.
TrainResult train_mpt(MptModel& model, const TrainConfig& cfg, const SceneConfig& scene,
                      const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Vision-only pretraining of the toy tracker (no motion modules in the loss).
TrainResult pretrain_tracker(MptModel& model, const TrainConfig& cfg, const SceneConfig& scene,
                             const std::function<void(const EpochMetrics&)>& on_epoch = {});

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows);

}  // namespace mpt
