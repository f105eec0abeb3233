// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace mpt {

using nlohmann::json;

std::string EvalConfig::to_json() const {
    json j = {{"episodes", episodes},
              {"seed", seed},
              {"scene", json::parse(scene.to_json())},
              {"mode", to_string(mode)},
              {"source", source == TrajectorySource::kSelf          ? "self"
                         : source == TrajectorySource::kVisionTrace ? "vision_trace"
                         : source == TrajectorySource::kPerfect     ? "perfect"
                                                                    : "quality_bin"},
              {"quality_bin", quality_bin},
              {"success_threshold", success_threshold},
              {"precision_center_threshold", precision_center_threshold},
              {"threads", threads}};
    return j.dump();
}

EvalConfig EvalConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    EvalConfig c;
    c.episodes = j.value("episodes", c.episodes);
    c.seed = j.value("seed", c.seed);
    if (j.contains("scene")) c.scene = SceneConfig::from_json(j["scene"].dump());
    if (j.contains("mode")) c.mode = eval_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("source")) {
        const std::string s = j["source"].get<std::string>();
        c.source = s == "self"           ? TrajectorySource::kSelf
                   : s == "vision_trace" ? TrajectorySource::kVisionTrace
                   : s == "perfect"      ? TrajectorySource::kPerfect
                                         : TrajectorySource::kQualityBin;
    }
    c.quality_bin = j.value("quality_bin", c.quality_bin);
    c.success_threshold = j.value("success_threshold", c.success_threshold);
    c.precision_center_threshold =
        j.value("precision_center_threshold", c.precision_center_threshold);
    c.threads = j.value("threads", c.threads);
    return c;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return 0.0;
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

namespace {

struct EpisodeBundle {
    Episode episode;
    std::vector<Box> trace;  // external trajectory source, when applicable
    bool has_trace = false;
};

std::vector<EpisodeBundle> make_episodes(const MptModel& model, const EvalConfig& cfg) {
    std::vector<EpisodeBundle> out(static_cast<std::size_t>(cfg.episodes));
    for (int e = 0; e < cfg.episodes; ++e) {
        auto& b = out[static_cast<std::size_t>(e)];
        b.episode = simulate_episode(cfg.scene,
                                     Rng::derive(cfg.seed, static_cast<std::uint64_t>(e), 0xe7));
        switch (cfg.source) {
            case TrajectorySource::kSelf:
                break;
            case TrajectorySource::kVisionTrace:
                b.trace = vision_trace(model, b.episode);
                b.has_trace = true;
                break;
            case TrajectorySource::kPerfect:
                b.trace = b.episode.gt;
                b.has_trace = true;
                break;
            case TrajectorySource::kQualityBin: {
                Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(e), 0xb1));
                b.trace = trace_for_bin(b.episode, rng, quality_bin_lo(cfg.quality_bin),
                                        quality_bin_hi(cfg.quality_bin));
                b.has_trace = true;
                break;
            }
        }
    }
    return out;
}

std::vector<EpisodeRun> run_all(const MptModel& model, const std::vector<EpisodeBundle>& eps,
                                EvalMode mode, int threads) {
    std::vector<EpisodeRun> runs(eps.size());
    const int workers = std::max(std::min<int>(threads, static_cast<int>(eps.size())), 1);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < eps.size(); i = next.fetch_add(1)) {
            TrackOptions to;
            to.mode = mode;
            to.trajectory_source = eps[i].has_trace ? &eps[i].trace : nullptr;
            runs[i] = run_episode(model, eps[i].episode, to);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return runs;
}

int hist_bucket(double v) {
    return std::clamp(static_cast<int>(v * 10.0), 0, 9);
}

}  // namespace

EvalReport evaluate(const MptModel& model, const EvalConfig& cfg,
                    const std::string& episode_log_dir, bool with_vision_baseline) {
    const auto episodes = make_episodes(model, cfg);
    const auto runs = run_all(model, episodes, cfg.mode, cfg.threads);
    std::vector<EpisodeRun> vision_runs;
    if (with_vision_baseline && cfg.mode != EvalMode::kVision)
        vision_runs = run_all(model, episodes, EvalMode::kVision, cfg.threads);

    EvalReport rep;
    rep.episodes = static_cast<int>(runs.size());

    std::vector<double> wm, wm_label;
    double iou_acc = 0.0, scoremap_acc = 0.0, precision_hits = 0.0;
    int failures = 0;
    double frame_threshold_mass = 0.0;  // per-frame accumulation of the success curve

    for (std::size_t e = 0; e < runs.size(); ++e) {
        const auto& run = runs[e];
        failures += run.failure_events();
        for (std::size_t fi = 0; fi < run.frames.size(); ++fi) {
            const auto& f = run.frames[fi];
            ++rep.frames;
            iou_acc += f.iou_value;
            scoremap_acc += f.scoremap_hit ? 1.0 : 0.0;
            if (f.iou_value > cfg.success_threshold) rep.success_rate += 1.0;

            int above = 0;
            for (int k = 0; k < kNumThresholds; ++k) {
                const double thr = 0.05 * k;
                if (f.iou_value > thr) {
                    rep.threshold_success[static_cast<std::size_t>(k)] += 1.0;
                    ++above;
                }
            }
            frame_threshold_mass += static_cast<double>(above) / kNumThresholds;

            const double cerr = std::hypot(f.pred.cx() - f.gt.cx(), f.pred.cy() - f.gt.cy());
            if (cerr < cfg.precision_center_threshold) precision_hits += 1.0;

            if (f.has_b_m) {
                wm.push_back(f.w_m);
                wm_label.push_back(iou(f.b_m, f.gt));
            }

            if (!vision_runs.empty()) {
                const auto& vf = vision_runs[e].frames[fi];
                const double delta = f.iou_value - vf.iou_value;
                if (delta > 0.3) {
                    rep.success_iou_traj_hist[static_cast<std::size_t>(
                        hist_bucket(f.traj_quality))] += 1.0;
                    rep.success_iou_last_hist[static_cast<std::size_t>(
                        hist_bucket(f.iou_last))] += 1.0;
                } else if (delta < -0.3) {
                    rep.failure_iou_traj_hist[static_cast<std::size_t>(
                        hist_bucket(f.traj_quality))] += 1.0;
                    rep.failure_iou_last_hist[static_cast<std::size_t>(
                        hist_bucket(f.iou_last))] += 1.0;
                }
            }
        }
        if (!episode_log_dir.empty()) {
            const auto path = std::filesystem::path(episode_log_dir) /
                              ("episode_" + std::to_string(e) + ".jsonl");
            write_episode_log(path.string(), run);
        }
    }

    const double n = static_cast<double>(std::max(rep.frames, 1));
    rep.success_rate /= n;
    rep.mean_iou = iou_acc / n;
    rep.scoremap_accuracy = scoremap_acc / n;
    rep.precision = precision_hits / n;
    for (auto& s : rep.threshold_success) s /= n;
    double auc = 0.0;
    for (const double s : rep.threshold_success) auc += s;
    rep.auc = auc / kNumThresholds;
    rep.auc_crosscheck = frame_threshold_mass / n;
    rep.failures_per_episode =
        static_cast<double>(failures) / static_cast<double>(std::max(rep.episodes, 1));
    rep.has_case_hists = !vision_runs.empty();

    if (!wm.empty()) {
        rep.has_weight_stats = true;
        rep.wm_iou_pearson = pearson(wm, wm_label);
        double mse = 0.0;
        for (std::size_t i = 0; i < wm.size(); ++i)
            mse += (wm[i] - wm_label[i]) * (wm[i] - wm_label[i]);
        rep.wm_mse = mse / static_cast<double>(wm.size());
    }
    return rep;
}

std::array<double, kNumQualityBins> success_by_quality_bin(const MptModel& model,
                                                           const EvalConfig& cfg) {
    std::array<double, kNumQualityBins> out{};
    for (int b = 0; b < kNumQualityBins; ++b) {
        EvalConfig c = cfg;
        c.source = TrajectorySource::kQualityBin;
        c.quality_bin = b;
        out[static_cast<std::size_t>(b)] = evaluate(model, c).success_rate;
    }
    return out;
}

std::string EvalReport::to_json() const {
    json j = {{"success_rate", success_rate},
              {"auc", auc},
              {"auc_crosscheck", auc_crosscheck},
              {"precision", precision},
              {"threshold_success", threshold_success},
              {"wm_iou_pearson", wm_iou_pearson},
              {"wm_mse", wm_mse},
              {"has_weight_stats", has_weight_stats},
              {"failures_per_episode", failures_per_episode},
              {"mean_iou", mean_iou},
              {"scoremap_accuracy", scoremap_accuracy},
              {"episodes", episodes},
              {"frames", frames},
              {"has_case_hists", has_case_hists},
              {"success_iou_traj_hist", success_iou_traj_hist},
              {"success_iou_last_hist", success_iou_last_hist},
              {"failure_iou_traj_hist", failure_iou_traj_hist},
              {"failure_iou_last_hist", failure_iou_last_hist}};
    return j.dump(2);
}

void EvalReport::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open report csv for writing: " + path);
    f << "metric,value\n";
    char buf[256];
    const auto row = [&](const char* name, double v) {
        std::snprintf(buf, sizeof buf, "%s,%.17g\n", name, v);
        f << buf;
    };
    row("success_rate", success_rate);
    row("auc", auc);
    row("precision", precision);
    row("mean_iou", mean_iou);
    row("scoremap_accuracy", scoremap_accuracy);
    row("failures_per_episode", failures_per_episode);
    row("wm_iou_pearson", wm_iou_pearson);
    row("wm_mse", wm_mse);
    for (int k = 0; k < kNumThresholds; ++k) {
        std::snprintf(buf, sizeof buf, "success_at_%.2f,%.17g\n", 0.05 * k,
                      threshold_success[static_cast<std::size_t>(k)]);
        f << buf;
    }
}

}  // namespace mpt
