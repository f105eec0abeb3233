// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <optional>

#include "mptrack/autograd.hpp"
#include "mptrack/geometry.hpp"
#include "mptrack/model.hpp"

namespace mpt {

/// Thrown when a loss term turns non-finite; names the offending term.
struct NonFiniteLoss : std::runtime_error {
    explicit NonFiniteLoss(const std::string& term)
        : std::runtime_error("non-finite loss term: " + term), term_name(term) {}
    std::string term_name;
};

/// 1 - GIoU(pred, gt), differentiable in the predicted corners.
/// pred: [1,4] corner box; gt must be non-degenerate.
Var giou_loss(Tape& t, Var pred_box, const Box& gt);

/// Mean absolute corner error, [1,1].
Var l1_loss(Tape& t, Var pred_box, const Box& gt);

/// Gaussian score-map target around the ground-truth center; the cell
/// containing the center is exactly 1. [HW, 1]
Tensor make_score_target(const Box& gt_norm, int grid_h, int grid_w);

struct TrackingLossWeights {
    double lambda_iou = 2.0;
    double lambda_l1 = 5.0;
};

/// Toy tracking loss: focal-style score-map classification plus L1 and GIoU
/// on the regressed box.
Var tracking_loss(Tape& t, Var score, Var box, const Box& gt_norm, int grid_h, int grid_w,
                  const TrackingLossWeights& w = {});

struct LossWeights {
    double lambda_iou = 2.0;
    double lambda_l1 = 5.0;
    double lambda_m = 1.0;
    bool weight_term = true;  // include the blend-weight regression term
    /// The weight label is a detached supervision constant. Finite-difference
    /// checks must hold it fixed while perturbing parameters; setting this
    /// pins the label to a precomputed value.
    std::optional<double> weight_label_override;
};

struct LossBreakdown {
    Var total;
    double total_value = 0.0;
    double tracking = 0.0;
    double motion = 0.0;
    double weight = 0.0;
    double weight_label = 0.0;  // iou(motion box, gt), the regression target
};

/// Total training loss. With lambda_m == 0 the result is the tracking term
/// alone, bit-exact, and the motion terms are never built. The weight label is
/// iou(motion_box, gt) computed by the geometry module and treated as a
/// constant.
LossBreakdown total_loss(Tape& t, const JointResult& out, const Box& gt_norm, int grid_h,
                         int grid_w, const LossWeights& w);

Box box_from_tensor(const Tensor& row4);

}  // namespace mpt
