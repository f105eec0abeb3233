// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "mptrack/tensor.hpp"

namespace mpt {

/// Learnable value: tensor plus gradient slot. Frozen parameters take part in
/// forward passes but never accumulate gradient and are skipped by optimizers.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool frozen = false;
    std::size_t index = 0;  // registration order within the owning store

    void zero_grad() { grad.fill(0.0); }
};

/// Owns parameters with stable addresses and registration order.
class ParamStore {
public:
    Parameter& create(const std::string& name, Tensor init, bool frozen = false);
    Parameter* find(const std::string& name);
    const std::deque<Parameter>& all() const { return params_; }
    std::deque<Parameter>& all() { return params_; }
    std::size_t count() const { return params_.size(); }
    std::size_t total_elements() const;
    void zero_grads();
    /// FNV-1a over the raw bytes of every parameter value, in registration order.
    std::uint64_t checksum() const;

private:
    std::deque<Parameter> params_;
};

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Operations append slots holding forward values; backward
/// walks slots in reverse creation order. One tape per forward/backward pass,
/// confined to a single thread. Parameter gradients are accumulated into the
/// tape first and exported explicitly, so concurrent tapes can share parameter
/// values read-only.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    // ---- leaves ----
    Var input(Tensor value);            // constant, no gradient
    Var param(Parameter& p);            // parameter leaf (gradient unless frozen)

    // ---- access ----
    const Tensor& value(Var v) const { return slots_[v.id].value; }
    const Tensor& grad(Var v) const;
    std::size_t node_count() const { return slots_.size(); }

    // ---- linear algebra ----
    Var matmul(Var a, Var b);        // [m,k] x [k,n]
    Var matmul_nt(Var a, Var b);     // [m,k] x [n,k]^T
    Var transpose(Var a);

    // ---- elementwise / broadcast ----
    Var add(Var a, Var b);           // same shape
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var add_row(Var m, Var row);     // [m,n] + [1,n]
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var mul_bcast(Var a, Var s);     // [m,n] * scalar var [1,1]
    Var emax_const(Var a, double c);
    Var emin_const(Var a, double c);
    Var relu(Var a);
    Var clamp01(Var a);
    Var abs(Var a);
    Var log(Var a);
    Var exp(Var a);
    Var sqrt(Var a);
    Var sigmoid(Var a);
    Var gelu(Var a);

    // ---- reductions ----
    Var sum(Var a);                  // -> [1,1]
    Var mean(Var a);                 // -> [1,1]

    // ---- shape ----
    Var slice_rows(Var a, std::size_t r0, std::size_t r1);
    Var slice_cols(Var a, std::size_t c0, std::size_t c1);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);

    // ---- normalizers ----
    Var softmax_rows(Var a);
    Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-6);

    // ---- fused losses ----
    /// CenterNet-style penalty-reduced focal loss over a score map.
    /// logits: [n,1]; target: [n,1] with exactly the positive cells equal to 1.
    Var focal_map_loss(Var logits, const Tensor& target, double alpha = 2.0, double beta = 4.0);

    // ---- backward ----
    /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable slot.
    void backward(Var scalar_loss);

    /// Adds this tape's parameter-leaf gradients into Parameter::grad
    /// (skips frozen parameters; they stay identically zero).
    void accumulate_param_grads();

    /// Adds parameter-leaf gradients into an external buffer keyed by
    /// parameter address (for ordered cross-thread reduction).
    void export_param_grads(std::vector<std::pair<const Parameter*, Tensor>>& sink) const;

    /// Adds parameter-leaf gradients into buffer[param.index], allocating
    /// entries lazily. The buffer must be sized to the store's parameter count.
    void export_param_grads_indexed(std::vector<Tensor>& buffer) const;

private:
    struct Slot {
        Tensor value;
        Tensor grad;                      // allocated lazily during backward
        bool needs_grad = false;
        bool grad_alloc = false;
        Parameter* param = nullptr;       // set for parameter leaves
        std::function<void(Tape&, int)> backward;
    };

    int push(Tensor value, bool needs_grad);
    Tensor& grad_ref(int id);
    void add_to_grad(int id, const Tensor& g);
    bool needs(Var v) const { return grad_enabled_ && slots_[v.id].needs_grad; }

    // deque keeps value()/grad() references stable while later ops append
    std::deque<Slot> slots_;
    bool grad_enabled_ = true;
};

}  // namespace mpt
