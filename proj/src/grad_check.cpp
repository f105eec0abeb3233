// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/grad_check.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace mpt {

namespace {

double eval_loss(const std::function<Var(Tape&)>& forward) {
    Tape tape(false);
    const Var loss = forward(tape);
    return tape.value(loss)[0];
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(Tape&)>& forward,
                           const std::vector<Parameter*>& params, double eps) {
    GradCheckResult res;

    // Analytic pass.
    std::map<const Parameter*, Tensor> analytic;
    {
        Tape tape;
        const Var loss = forward(tape);
        tape.backward(loss);
        std::vector<std::pair<const Parameter*, Tensor>> sink;
        tape.export_param_grads(sink);
        for (auto& [p, g] : sink) {
            auto it = analytic.find(p);
            if (it == analytic.end())
                analytic.emplace(p, g);
            else
                it->second.add_inplace(g);
        }
    }

    for (Parameter* p : params) {
        const Tensor* ag = nullptr;
        auto it = analytic.find(p);
        if (it != analytic.end()) ag = &it->second;

        if (p->frozen) {
            // Contract: frozen parameters accumulate no gradient at all.
            if (ag != nullptr) {
                res.finite = false;
                res.max_rel_error = std::numeric_limits<double>::infinity();
                res.worst_param = p->name;
            }
            continue;
        }

        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + eps;
            const double loss_p = eval_loss(forward);
            p->value[i] = saved - eps;
            const double loss_m = eval_loss(forward);
            p->value[i] = saved;

            const double numeric = (loss_p - loss_m) / (2.0 * eps);
            const double a = (ag != nullptr) ? (*ag)[i] : 0.0;
            if (!std::isfinite(a) || !std::isfinite(numeric)) {
                res.finite = false;
                res.max_rel_error = std::numeric_limits<double>::infinity();
                res.worst_param = p->name;
                res.worst_index = i;
                return res;
            }
            const double rel =
                std::fabs(a - numeric) / std::max(1.0, std::fabs(a) + std::fabs(numeric));
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = p->name;
                res.worst_index = i;
            }
        }
    }
    return res;
}

}  // namespace mpt
