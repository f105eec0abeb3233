// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mpt {

using nlohmann::json;

EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "vision") return EvalMode::kVision;
    if (s == "motion") return EvalMode::kMotion;
    if (s == "joint") return EvalMode::kJoint;
    if (s == "no_weight") return EvalMode::kNoWeight;
    throw std::invalid_argument("unknown eval mode: " + s);
}

const char* to_string(EvalMode m) {
    switch (m) {
        case EvalMode::kVision: return "vision";
        case EvalMode::kMotion: return "motion";
        case EvalMode::kJoint: return "joint";
        case EvalMode::kNoWeight: return "no_weight";
    }
    return "joint";
}

double EpisodeRun::success_rate(double threshold) const {
    if (frames.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& f : frames)
        if (f.iou_value > threshold) ++hits;
    return static_cast<double>(hits) / static_cast<double>(frames.size());
}

double EpisodeRun::mean_iou() const {
    if (frames.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& f : frames) acc += f.iou_value;
    return acc / static_cast<double>(frames.size());
}

double EpisodeRun::scoremap_accuracy() const {
    if (frames.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& f : frames)
        if (f.scoremap_hit) ++hits;
    return static_cast<double>(hits) / static_cast<double>(frames.size());
}

int EpisodeRun::failure_events(int run_len) const {
    int events = 0;
    int streak = 0;
    for (const auto& f : frames) {
        if (f.iou_value <= 0.0) {
            if (++streak == run_len) {
                ++events;
                streak = 0;
            }
        } else {
            streak = 0;
        }
    }
    return events;
}

namespace {

bool score_argmax_hits_gt(const Tensor& score, const Box& gt, const SearchRegion& region,
                          int grid_h, int grid_w) {
    const Box gt_norm = normalize_to_region(gt, region);
    const double gx = gt_norm.cx();
    const double gy = gt_norm.cy();
    if (gx < 0.0 || gx >= 1.0 || gy < 0.0 || gy >= 1.0) return false;
    const int gc = std::clamp(static_cast<int>(gx * grid_w), 0, grid_w - 1);
    const int gr = std::clamp(static_cast<int>(gy * grid_h), 0, grid_h - 1);
    const auto [r, c] = argmax_with_tiebreak(score, grid_w);
    return r == gr && c == gc;
}

}  // namespace

EpisodeRun run_episode(const MptModel& model, const Episode& ep, const TrackOptions& opts) {
    const ModelConfig& cfg = model.config();
    if (ep.cfg.grid_h != cfg.grid_h || ep.cfg.grid_w != cfg.grid_w ||
        ep.cfg.app_channels != cfg.app_channels)
        throw std::invalid_argument("run_episode: episode grid does not match model config");

    EpisodeRun run;
    if (ep.length() < 2) return run;

    std::vector<Box> history{ep.gt[0]};
    const double k = ep.cfg.region_scale;
    Tensor prior;
    if (opts.center_prior_strength > 0.0)
        prior = model.tracker().make_center_prior(opts.center_prior_strength);
    const Tensor* prior_ptr = prior.empty() ? nullptr : &prior;

    for (int t_idx = 1; t_idx < ep.length(); ++t_idx) {
        const Box& prev = history.back();
        const SearchRegion region = region_around(prev, k, opts.min_region_side);
        const Tensor obs = render_observation(ep, t_idx, region);

        // Trajectory window over past frames only.
        const std::vector<Box>* source = &history;
        std::vector<Box> trace_prefix;
        if (opts.trajectory_source != nullptr) {
            const auto& tr = *opts.trajectory_source;
            trace_prefix.assign(tr.begin(),
                                tr.begin() + std::min<std::size_t>(tr.size(),
                                                                   static_cast<std::size_t>(t_idx)));
            source = &trace_prefix;
        }
        const Trajectory window =
            window_from_history(*source, static_cast<std::size_t>(cfg.traj_len));
        const Trajectory window_norm = normalize_to_region(window, region);

        FrameLog log;
        log.frame = t_idx;
        log.gt = ep.gt[static_cast<std::size_t>(t_idx)];
        log.occluded = ep.occluded[static_cast<std::size_t>(t_idx)];

        // Input-trajectory quality diagnostics (right-aligned frame mapping).
        {
            double acc = 0.0;
            for (std::size_t i = 0; i < window.boxes.size(); ++i) {
                const int f = std::max(
                    t_idx - static_cast<int>(window.boxes.size()) + static_cast<int>(i), 0);
                acc += iou(window.boxes[i], ep.gt[static_cast<std::size_t>(f)]);
            }
            log.traj_quality = acc / static_cast<double>(window.boxes.size());
            log.iou_last =
                iou(window.boxes.back(), ep.gt[static_cast<std::size_t>(std::max(t_idx - 1, 0))]);
        }

        Tape tape(false);
        Box pred_norm;
        if (opts.mode == EvalMode::kVision) {
            const auto out = model.vision_forward(tape, obs, ep.target_appearance, prior_ptr);
            pred_norm = box_from_tensor(tape.value(out.box));
            log.scoremap_hit =
                score_argmax_hits_gt(tape.value(out.score), log.gt, region, cfg.grid_h, cfg.grid_w);
        } else {
            ForwardOptions fo;
            fo.compute_motion_head = opts.compute_motion_head || opts.mode == EvalMode::kMotion;
            fo.center_prior = prior_ptr;
            if (opts.mode == EvalMode::kNoWeight) fo.forced_weight = ForcedWeight::kOne;
            const auto out =
                model.joint_forward(tape, obs, ep.target_appearance, window_norm, fo);
            log.w_m = out.weight_value;
            if (out.motion_box.valid()) {
                log.b_m = denormalize_from_region(box_from_tensor(tape.value(out.motion_box)),
                                                  region)
                              .clamped01();
                log.has_b_m = true;
            }
            pred_norm = opts.mode == EvalMode::kMotion
                            ? box_from_tensor(tape.value(out.motion_box))
                            : box_from_tensor(tape.value(out.box));
            log.scoremap_hit =
                score_argmax_hits_gt(tape.value(out.score), log.gt, region, cfg.grid_h, cfg.grid_w);
        }

        const Box pred = denormalize_from_region(pred_norm, region).clamped01();
        log.pred = pred;
        log.iou_value = iou(pred, log.gt);
        run.frames.push_back(log);

        // Damped state update: keep the raw prediction in the log, but bound
        // how fast the tracked size may change so a single bad frame cannot
        // collapse the next search region.
        const auto damp = [&](double prev_sz, double new_sz) {
            const double lo = prev_sz / opts.max_scale_step;
            const double hi = prev_sz * opts.max_scale_step;
            const double blended =
                opts.size_damping * new_sz + (1.0 - opts.size_damping) * prev_sz;
            return std::max(std::clamp(blended, lo, hi), opts.min_box_size);
        };
        const double w = damp(prev.width(), pred.width());
        const double h = damp(prev.height(), pred.height());
        const Box state = Box::from_center(std::clamp(pred.cx(), 0.0, 1.0),
                                           std::clamp(pred.cy(), 0.0, 1.0), w, h);
        history.push_back(state);
    }
    return run;
}

std::vector<Box> vision_trace(const MptModel& model, const Episode& ep) {
    TrackOptions opts;
    opts.mode = EvalMode::kVision;
    const EpisodeRun run = run_episode(model, ep, opts);
    std::vector<Box> trace;
    trace.reserve(static_cast<std::size_t>(ep.length()));
    trace.push_back(ep.gt[0]);
    for (const auto& f : run.frames) trace.push_back(f.pred);
    return trace;
}

void write_episode_log(const std::string& path, const EpisodeRun& run) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open episode log for writing: " + path);
    for (const auto& fl : run.frames) {
        json rec = {
            {"frame", fl.frame},
            {"gt_box", {fl.gt.x1, fl.gt.y1, fl.gt.x2, fl.gt.y2}},
            {"pred_box", {fl.pred.x1, fl.pred.y1, fl.pred.x2, fl.pred.y2}},
            {"w_m", fl.w_m},
            {"b_m", {fl.b_m.x1, fl.b_m.y1, fl.b_m.x2, fl.b_m.y2}},
            {"iou", fl.iou_value},
            {"occluded", fl.occluded},
        };
        f << rec.dump() << "\n";
    }
}

}  // namespace mpt
