// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include "mptrack/eval.hpp"

namespace mpt {

inline constexpr const char* kVersion = "mptrack 0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

/// One JSON document describing a full run: model, scenes, training and
/// evaluation parameters. Any run is reproducible from (config, seed); the
/// resolved config is always echoed into the run directory.
struct RunConfig {
    std::uint64_t seed = 1;
    ModelConfig model;
    SceneConfig pretrain_scene;  // easy scenes: the stub tracker must be learnable
    SceneConfig train_scene;     // difficulty mix for prompt learning
    SceneConfig eval_scene;      // hard suite: identical distractors + occlusion
    TrainConfig pretrain;
    TrainConfig train;
    EvalConfig eval;

    /// Derives per-stage seeds from the run seed.
    void reseed(std::uint64_t s);

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);

    /// Desk-scale defaults: minutes-scale on a small CPU budget.
    static RunConfig desk_defaults();
};

/// Ablation selectors: named model/loss/freezing variants trained under a
/// config otherwise identical to the full model.
RunConfig apply_ablation(const RunConfig& base, const std::string& selector);
std::vector<std::string> ablation_selectors();

/// Sweep parameters: alpha, T, cutmix_prob, sparseness.
RunConfig apply_sweep_value(const RunConfig& base, const std::string& param, double value);

}  // namespace mpt
