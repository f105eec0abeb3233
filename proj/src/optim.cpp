// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/optim.hpp"

#include <cmath>

namespace mpt {

AdamW::AdamW(ParamStore& store, Config cfg) : store_(store), cfg_(cfg) {
    for (const auto& p : store_.all()) {
        m_.emplace_back(p.value.rows(), p.value.cols());
        v_.emplace_back(p.value.rows(), p.value.cols());
    }
}

void AdamW::step(double lr) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, step_count_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, step_count_);
    std::size_t idx = 0;
    for (auto& p : store_.all()) {
        if (!p.frozen) {
            Tensor& m = m_[idx];
            Tensor& v = v_[idx];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad[i];
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p.value[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                    cfg_.weight_decay * p.value[i]);
            }
        }
        ++idx;
    }
}

}  // namespace mpt
