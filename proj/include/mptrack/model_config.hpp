// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <cstdint>
#include <numbers>
#include <string>

namespace mpt {

/// How trajectory corner coordinates are lifted into the embedding space.
enum class SpeMode {
    kFourier,       // fixed Gaussian Fourier features (default)
    kLearnedLinear  // learnable linear lift of raw coordinates (SPE ablation)
};

/// Temporal table initialization / learnability variants.
enum class TpeMode {
    kLogInit,        // log-warped sinusoidal init, learnable (default)
    kZeros,          // disabled: all-zero, frozen
    kRandomInit,     // random init, learnable
    kLinearInit,     // linear-warped sinusoidal init, learnable
    kLogInitFrozen   // log-warped sinusoidal init, frozen
};

/// Highest initial temporal frequency admissible without aliasing under unit
/// frame sampling: the instantaneous frequency at (t=0, i=0) equals pi.
inline double nyquist_alpha() { return std::numbers::pi * std::numbers::ln10; }

struct ModelConfig {
    // Dimensions.
    int traj_len = 30;            // T
    int channels = 64;            // C, shared by visual and motion embeddings
    int app_channels = 8;         // raw appearance descriptor width
    int grid_h = 16;
    int grid_w = 16;
    int heads = 8;
    int decoder_blocks = 2;
    int decoder_mlp_hidden = 256;
    int head_hidden = 256;        // weight / motion head hidden size
    int size_head_hidden = 32;    // toy tracker size head hidden size

    // Positional encodings.
    double spe_sigma = 1.0;
    double tpe_alpha = nyquist_alpha();
    double tpe_n = 1e4;

    // Ablation switches.
    SpeMode spe_mode = SpeMode::kFourier;
    TpeMode tpe_mode = TpeMode::kLogInit;
    bool point_embeddings = true;
    bool weight_mechanism = true;

    // Toy tracking head.
    double softargmax_tau = 30.0;  // sharp: center readout
    double pool_tau = 8.0;         // soft: feature pooling and extent statistics

    std::uint64_t init_seed = 1;

    int motion_tokens() const { return 2 * traj_len + 3; }

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

const char* to_string(SpeMode m);
const char* to_string(TpeMode m);
SpeMode spe_mode_from_string(const std::string& s);
TpeMode tpe_mode_from_string(const std::string& s);

}  // namespace mpt
