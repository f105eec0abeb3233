// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <string>
#include <vector>

#include "mptrack/autograd.hpp"
#include "mptrack/rng.hpp"

namespace mpt {

/// Truncated-normal init (std 0.02 by default) for projections, zeros for biases.
Tensor trunc_normal_init(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 0.02);

struct Linear {
    Parameter* w = nullptr;  // [in, out]
    Parameter* b = nullptr;  // [1, out]

    static Linear create(ParamStore& store, const std::string& name, std::size_t in,
                         std::size_t out, Rng& rng, double stddev = 0.02);

    Var apply(Tape& t, Var x) const { return t.add_row(t.matmul(x, t.param(*w)), t.param(*b)); }
};

struct LayerNorm {
    Parameter* gain = nullptr;  // [1, n], ones
    Parameter* bias = nullptr;  // [1, n], zeros

    static LayerNorm create(ParamStore& store, const std::string& name, std::size_t n);

    Var apply(Tape& t, Var x) const {
        return t.layer_norm_rows(x, t.param(*gain), t.param(*bias));
    }
};

/// Scaled dot-product attention with learned input/output projections,
/// scale 1/sqrt(C/heads). Queries may differ from keys/values in length.
struct MultiHeadAttention {
    Linear q, k, v, o;
    std::size_t heads = 8;
    std::size_t channels = 0;

    static MultiHeadAttention create(ParamStore& store, const std::string& name,
                                     std::size_t channels, std::size_t heads, Rng& rng);

    /// q_in: [Lq,C]; k_in, v_in: [Lk,C]; returns [Lq,C].
    Var apply(Tape& t, Var q_in, Var k_in, Var v_in) const;
};

/// Two-layer perceptron with GELU.
struct Mlp {
    Linear fc1, fc2;

    static Mlp create(ParamStore& store, const std::string& name, std::size_t in,
                      std::size_t hidden, std::size_t out, Rng& rng, double stddev = 0.02);

    Var apply(Tape& t, Var x) const { return fc2.apply(t, t.gelu(fc1.apply(t, x))); }
};

}  // namespace mpt
