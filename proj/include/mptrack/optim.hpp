// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <vector>

#include "mptrack/autograd.hpp"

namespace mpt {

/// Step-decay schedule: base learning rate divided by 10 once the epoch index
/// reaches decay_epoch (0-based epochs).
struct LrSchedule {
    double base_lr = 1e-3;
    int decay_epoch = 40;

    double at_epoch(int epoch) const { return epoch >= decay_epoch ? base_lr / 10.0 : base_lr; }
};

/// Adam with decoupled weight decay. Frozen parameters are never touched;
/// their moment buffers stay zero.
class AdamW {
public:
    struct Config {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
    };

    explicit AdamW(ParamStore& store) : AdamW(store, Config{}) {}
    AdamW(ParamStore& store, Config cfg);

    /// One update over every non-frozen parameter using populated gradients.
    void step(double lr);

    int step_count() const { return step_count_; }

private:
    ParamStore& store_;
    Config cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    int step_count_ = 0;
};

}  // namespace mpt
