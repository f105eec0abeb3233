// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mpt {

Box box_from_tensor(const Tensor& row4) {
    return Box{row4[0], row4[1], row4[2], row4[3]};
}

Var giou_loss(Tape& t, Var pred_box, const Box& gt) {
    if (!(gt.area() > 0.0)) throw std::invalid_argument("giou_loss: degenerate ground truth");
    const Var px1 = t.slice_cols(pred_box, 0, 1);
    const Var py1 = t.slice_cols(pred_box, 1, 2);
    const Var px2 = t.slice_cols(pred_box, 2, 3);
    const Var py2 = t.slice_cols(pred_box, 3, 4);

    const Var iw = t.relu(t.sub(t.emin_const(px2, gt.x2), t.emax_const(px1, gt.x1)));
    const Var ih = t.relu(t.sub(t.emin_const(py2, gt.y2), t.emax_const(py1, gt.y1)));
    const Var inter = t.mul(iw, ih);

    const Var area_p = t.mul(t.sub(px2, px1), t.sub(py2, py1));
    const Var uni = t.sub(t.add_const(area_p, gt.area()), inter);

    const Var hull_w = t.sub(t.emax_const(px2, gt.x2), t.emin_const(px1, gt.x1));
    const Var hull_h = t.sub(t.emax_const(py2, gt.y2), t.emin_const(py1, gt.y1));
    const Var hull = t.mul(hull_w, hull_h);

    const Var iou_v = t.div(inter, uni);
    const Var g = t.sub(iou_v, t.div(t.sub(hull, uni), hull));
    return t.add_const(t.scale(g, -1.0), 1.0);
}

Var l1_loss(Tape& t, Var pred_box, const Box& gt) {
    Tensor gt_row(1, 4);
    gt_row[0] = gt.x1;
    gt_row[1] = gt.y1;
    gt_row[2] = gt.x2;
    gt_row[3] = gt.y2;
    return t.mean(t.abs(t.sub(pred_box, t.input(std::move(gt_row)))));
}

Tensor make_score_target(const Box& gt_norm, int grid_h, int grid_w) {
    Tensor target(static_cast<std::size_t>(grid_h) * grid_w, 1);
    const double gx = gt_norm.cx();
    const double gy = gt_norm.cy();
    // Spread tied to the target extent, floored at half a cell.
    const double sigma = std::max(0.25 * std::max(gt_norm.width(), gt_norm.height()),
                                  0.5 / std::max(grid_h, grid_w));
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int r = 0; r < grid_h; ++r)
        for (int c = 0; c < grid_w; ++c) {
            const double cx = (c + 0.5) / grid_w;
            const double cy = (r + 0.5) / grid_h;
            const double d2 = (cx - gx) * (cx - gx) + (cy - gy) * (cy - gy);
            target[static_cast<std::size_t>(r) * grid_w + c] = std::exp(-d2 * inv2s2);
        }
    // Exactly one positive: the cell containing the center.
    const int pc = std::clamp(static_cast<int>(gx * grid_w), 0, grid_w - 1);
    const int pr = std::clamp(static_cast<int>(gy * grid_h), 0, grid_h - 1);
    target[static_cast<std::size_t>(pr) * grid_w + pc] = 1.0;
    return target;
}

Var tracking_loss(Tape& t, Var score, Var box, const Box& gt_norm, int grid_h, int grid_w,
                  const TrackingLossWeights& w) {
    const Tensor target = make_score_target(gt_norm, grid_h, grid_w);
    const Var cls = t.focal_map_loss(score, target);
    const Var g = t.scale(giou_loss(t, box, gt_norm), w.lambda_iou);
    const Var l1 = t.scale(l1_loss(t, box, gt_norm), w.lambda_l1);
    return t.add(cls, t.add(g, l1));
}

LossBreakdown total_loss(Tape& t, const JointResult& out, const Box& gt_norm, int grid_h,
                         int grid_w, const LossWeights& w) {
    LossBreakdown b;
    const Var l_tr =
        tracking_loss(t, out.score, out.box, gt_norm, grid_h, grid_w,
                      TrackingLossWeights{w.lambda_iou, w.lambda_l1});
    b.tracking = t.value(l_tr)[0];
    if (!std::isfinite(b.tracking)) throw NonFiniteLoss("tracking");

    if (w.lambda_m == 0.0) {
        b.total = l_tr;
        b.total_value = b.tracking;
        return b;
    }
    if (!out.motion_box.valid())
        throw std::invalid_argument("total_loss: motion head output missing");

    const Var l_m = t.add(t.scale(giou_loss(t, out.motion_box, gt_norm), w.lambda_iou),
                          t.scale(l1_loss(t, out.motion_box, gt_norm), w.lambda_l1));
    b.motion = t.value(l_m)[0];
    if (!std::isfinite(b.motion)) throw NonFiniteLoss("motion");

    Var aux = l_m;
    if (w.weight_term && out.weight.valid()) {
        b.weight_label = w.weight_label_override
                             ? *w.weight_label_override
                             : iou(box_from_tensor(t.value(out.motion_box)), gt_norm);
        const Var diff = t.add_const(out.weight, -b.weight_label);
        const Var l_w = t.mul(diff, diff);
        b.weight = t.value(l_w)[0];
        if (!std::isfinite(b.weight)) throw NonFiniteLoss("weight");
        aux = t.add(aux, l_w);
    }
    b.total = t.add(l_tr, t.scale(aux, w.lambda_m));
    b.total_value = t.value(b.total)[0];
    if (!std::isfinite(b.total_value)) throw NonFiniteLoss("total");
    return b;
}

}  // namespace mpt
