// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include "mptrack/model_config.hpp"
#include "mptrack/nn.hpp"

namespace mpt {

/// One fusion block. Sub-layer order is fixed:
///   1. motion self-attention
///   2. cross-attention, motion queries <- visual keys/values
///   3. MLP on the motion stream
///   4. cross-attention, visual queries <- the 3 representative token rows
/// Pre-norm residual structure throughout; positional tensors are added to
/// attention queries/keys only, never to values.
struct DecoderBlock {
    LayerNorm ln_self;
    MultiHeadAttention self_attn;
    LayerNorm ln_cross_q;
    LayerNorm ln_cross_kv;
    MultiHeadAttention cross_mv;
    LayerNorm ln_mlp;
    Mlp mlp;
    LayerNorm ln_vis_q;
    LayerNorm ln_rep_kv;
    MultiHeadAttention cross_vr;

    static DecoderBlock create(ParamStore& store, const std::string& name,
                               const ModelConfig& cfg, Rng& rng);

    struct Streams {
        Var motion;
        Var vision;
    };

    /// motion: [2T+3, C]; vision: [HW, C]; motion_pe: [2T+3, C]; dsm: [HW, C].
    Streams forward(Tape& t, Var motion, Var vision, Var motion_pe, Var dsm,
                    int rep_row_start) const;
};

class FusionDecoder {
public:
    FusionDecoder() = default;
    FusionDecoder(ParamStore& store, const ModelConfig& cfg, Rng& rng);

    struct Out {
        Var vision;   // [HW, C] fused visual stream
        Var rep_out;  // [3, C] final representative token rows
    };

    Out decode(Tape& t, Var motion_tokens, Var vision, Var motion_pe, Var dsm) const;

    int blocks() const { return static_cast<int>(blocks_.size()); }

private:
    std::vector<DecoderBlock> blocks_;
    LayerNorm ln_final_;  // closing norm on the rep-token readout
    int rep_row_start_ = 0;
    int channels_ = 0;
};

/// Two-layer perceptron ending in a sigmoid; predicts the motion-confidence
/// blend weight from the final rep_w token row.
struct WeightHead {
    Mlp mlp;

    static WeightHead create(ParamStore& store, const std::string& name, const ModelConfig& cfg,
                             Rng& rng);

    Var predict(Tape& t, Var rep_w_row) const;  // [1,1] in [0,1]
};

/// Predicts the current box from the final rep_tl / rep_br rows. Raw outputs
/// are squashed to (cx, cy, w, h) in [0,1] and converted to clamped corners,
/// so corner ordering holds by construction.
struct MotionHead {
    Mlp mlp;

    static MotionHead create(ParamStore& store, const std::string& name, const ModelConfig& cfg,
                             Rng& rng);

    Var predict(Tape& t, Var rep_tl_row, Var rep_br_row) const;  // [1,4] corners
};

/// w * fused + (1 - w) * original, elementwise; w is a [1,1] var.
Var adaptive_fuse(Tape& t, Var original, Var fused, Var w);

}  // namespace mpt
