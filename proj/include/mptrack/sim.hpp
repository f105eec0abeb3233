// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mptrack/geometry.hpp"
#include "mptrack/rng.hpp"
#include "mptrack/tensor.hpp"

namespace mpt {

/// Scene generator parameters. The arena is the unit square with reflecting
/// walls; all coordinates are arena units.
struct SceneConfig {
    int episode_len = 100;
    int n_distractors = 2;
    /// Distractor appearance perturbation; 0 means distractors are visually
    /// identical to the target.
    double eps_app = 0.0;
    /// If >= eps_app, each episode draws its perturbation uniformly from
    /// [eps_app, eps_app_max] (training-time difficulty mix).
    double eps_app_max = -1.0;
    double occlusion_prob = 0.3;  // probability of one occlusion interval per episode
    int occl_min = 5;
    int occl_max = 15;
    double size_min = 0.08;
    double size_max = 0.16;
    double speed_min = 0.004;
    double speed_max = 0.02;
    /// Fraction of distractors spawned close to the target with a similar
    /// heading, so their paths keep crossing; the rest spawn anywhere.
    double near_spawn_frac = 1.0;
    double near_spawn_radius = 0.22;
    double accel_noise = 0.0015;  // per-frame velocity noise (sigma)
    double obs_noise = 0.02;      // appearance grid noise (sigma)
    double region_scale = 4.0;    // search region side = scale * max(w, h)
    int grid_h = 16;
    int grid_w = 16;
    int app_channels = 8;

    std::string to_json() const;
    static SceneConfig from_json(const std::string& text);
};

struct Entity {
    double px = 0.5, py = 0.5;  // center
    double vx = 0.0, vy = 0.0;
    double w = 0.1, h = 0.1;
    Tensor appearance;  // [1, app_channels]

    Box box() const { return Box::from_center(px, py, w, h); }
};

/// Live scene state. Constant-velocity dynamics with Gaussian acceleration
/// noise and reflecting walls; the occlusion schedule silences the target's
/// appearance during its intervals.
struct Scene {
    SceneConfig cfg;
    Entity target;
    std::vector<Entity> distractors;
    std::vector<std::pair<int, int>> occlusions;  // [start, end) frame intervals
    int frame = 0;
    Rng rng;

    Scene(const SceneConfig& cfg, std::uint64_t seed);

    bool target_occluded() const;
    void step();
};

/// A simulated episode: ground truth and distractor boxes per frame plus the
/// appearance vectors needed to render observations on demand.
struct Episode {
    SceneConfig cfg;
    std::uint64_t seed = 0;
    Tensor target_appearance;                    // [1, app_channels]
    std::vector<Tensor> distractor_appearances;  // each [1, app_channels]
    std::vector<Box> gt;                         // per frame
    std::vector<std::vector<Box>> distractor_boxes;
    std::vector<bool> occluded;

    int length() const { return static_cast<int>(gt.size()); }
};

Episode simulate_episode(const SceneConfig& cfg, std::uint64_t seed);

/// Appearance grid over a search region: each cell holds the sum of entity
/// appearance vectors weighted by box/cell overlap, plus Gaussian noise.
/// Rendering is deterministic in (episode.seed, frame). [HW, app_channels]
Tensor render_observation(const Episode& ep, int frame, const SearchRegion& region,
                          bool with_noise = true);

/// Adds one synthetic appearance blob (a copy of the target's descriptor, at
/// the target's current size) at a random location whose cells do not touch
/// the ground-truth box. Gives up after max_tries rejections.
bool inject_appearance_blob(Tensor& obs, const Episode& ep, int frame,
                            const SearchRegion& region, Rng& rng, int max_tries = 100);

/// Maximum entry of an [H*W, 1] (or [H, W]) score map; ties resolve to the
/// smallest row-major index.
std::pair<int, int> argmax_with_tiebreak(const Tensor& score_map, int grid_w);

}  // namespace mpt
