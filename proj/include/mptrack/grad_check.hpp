// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <functional>
#include <vector>

#include "mptrack/autograd.hpp"

namespace mpt {

/// Verifies reverse-mode gradients against central finite differences.
///
/// `forward` must rebuild the computation on the given tape from the current
/// parameter values and return a scalar loss. Every entry of every listed
/// non-frozen parameter is perturbed by +/- eps; frozen parameters must report
/// an identically zero analytic gradient or the check fails.
struct GradCheckResult {
    double max_rel_error = 0.0;
    bool finite = true;            // false if any analytic or numeric value was non-finite
    std::string worst_param;
    std::size_t worst_index = 0;
};

GradCheckResult grad_check(const std::function<Var(Tape&)>& forward,
                           const std::vector<Parameter*>& params, double eps = 1e-6);

}  // namespace mpt
