// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace mpt {

using nlohmann::json;

std::string TrainConfig::to_json() const {
    json j = {{"epochs", epochs},
              {"pairs_per_epoch", pairs_per_epoch},
              {"batch_size", batch_size},
              {"lr_decay_epoch", lr_decay_epoch},
              {"base_lr", base_lr},
              {"weight_decay", weight_decay},
              {"samples_per_episode", samples_per_episode},
              {"sparseness_max", sparseness_max},
              {"cutmix_prob", cutmix_prob},
              {"reverse_sample_prob", reverse_sample_prob},
              {"quality_mix_prob", quality_mix_prob},
              {"freeze_mode", to_string(freeze_mode)},
              {"lambda_iou", lambda_iou},
              {"lambda_l1", lambda_l1},
              {"lambda_m", lambda_m},
              {"loss_weight_term", loss_weight_term},
              {"divergence_factor", divergence_factor},
              {"divergence_patience", divergence_patience},
              {"threads", threads},
              {"seed", seed}};
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.pairs_per_epoch = j.value("pairs_per_epoch", c.pairs_per_epoch);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_decay_epoch = j.value("lr_decay_epoch", c.lr_decay_epoch);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.samples_per_episode = j.value("samples_per_episode", c.samples_per_episode);
    c.sparseness_max = j.value("sparseness_max", c.sparseness_max);
    c.cutmix_prob = j.value("cutmix_prob", c.cutmix_prob);
    c.reverse_sample_prob = j.value("reverse_sample_prob", c.reverse_sample_prob);
    if (j.contains("freeze_mode"))
        c.freeze_mode = freeze_mode_from_string(j["freeze_mode"].get<std::string>());
    c.quality_mix_prob = j.value("quality_mix_prob", c.quality_mix_prob);
    c.lambda_iou = j.value("lambda_iou", c.lambda_iou);
    c.lambda_l1 = j.value("lambda_l1", c.lambda_l1);
    c.lambda_m = j.value("lambda_m", c.lambda_m);
    c.loss_weight_term = j.value("loss_weight_term", c.loss_weight_term);
    c.divergence_factor = j.value("divergence_factor", c.divergence_factor);
    c.divergence_patience = j.value("divergence_patience", c.divergence_patience);
    c.threads = j.value("threads", c.threads);
    c.seed = j.value("seed", c.seed);
    return c;
}

Trajectory sample_trajectory(const std::vector<Box>& trace, int current_frame, int traj_len,
                             int sparseness_max, double reverse_prob, Rng& rng) {
    if (trace.empty()) throw std::invalid_argument("sample_trajectory: empty trace");
    const int last = static_cast<int>(trace.size()) - 1;
    int s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                std::max(sparseness_max, 1))));
    bool reverse = rng.bernoulli(reverse_prob);
    if (current_frame >= last) reverse = false;  // nothing after the current frame
    if (current_frame <= 0) reverse = true;

    Trajectory out;
    out.boxes.resize(static_cast<std::size_t>(traj_len));
    if (!reverse) {
        while (s > 1 && current_frame - s * traj_len < 0) --s;
        for (int i = 0; i < traj_len; ++i) {
            const int f = std::max(current_frame - s * (traj_len - i), 0);
            out.boxes[static_cast<std::size_t>(i)] = trace[static_cast<std::size_t>(f)];
        }
    } else {
        while (s > 1 && current_frame + s * traj_len > last) --s;
        // Mirrored time: the slot closest to the current frame is current + s.
        for (int i = 0; i < traj_len; ++i) {
            const int f = std::min(current_frame + s * (traj_len - i), last);
            out.boxes[static_cast<std::size_t>(i)] = trace[static_cast<std::size_t>(f)];
        }
    }
    return out;
}

std::vector<Box> jittered_trace(const Episode& ep, Rng& rng, double sigma_center,
                                double sigma_size) {
    std::vector<Box> out;
    out.reserve(static_cast<std::size_t>(ep.length()));
    for (const Box& g : ep.gt) {
        const double scale = std::max(g.width(), g.height());
        const double cx = g.cx() + sigma_center * scale * rng.normal();
        const double cy = g.cy() + sigma_center * scale * rng.normal();
        const double w = g.width() * std::exp(sigma_size * rng.normal());
        const double h = g.height() * std::exp(sigma_size * rng.normal());
        out.push_back(Box::from_center(cx, cy, w, h).clamped01());
    }
    return out;
}

namespace {

double trace_mean_iou(const std::vector<Box>& trace, const Episode& ep) {
    double acc = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i)
        acc += iou(trace[i], ep.gt[i]);
    return acc / static_cast<double>(trace.size());
}

}  // namespace

std::vector<Box> drifted_trace(const Episode& ep, Rng& rng, double dial) {
    const double d = std::clamp(dial, 0.0, 1.0);
    const double jitter = 0.02 + 0.12 * d;
    const double lost_frac = std::min(d * d * 1.1, 0.97);

    std::vector<Box> out;
    out.reserve(static_cast<std::size_t>(ep.length()));
    bool lost = false;
    int segment_left = 0;
    double gx = 0, gy = 0, gvx = 0, gvy = 0;  // ghost state while lost

    for (int f = 0; f < ep.length(); ++f) {
        const Box& gt = ep.gt[static_cast<std::size_t>(f)];
        if (segment_left == 0) {
            const bool was_lost = lost;
            lost = rng.uniform() < lost_frac;
            if (lost) {
                segment_left = 8 + static_cast<int>(rng.below(18));
                if (!was_lost) {
                    // Diverge from the current truth with a rotated heading.
                    gx = gt.cx();
                    gy = gt.cy();
                    const int prev = std::max(f - 1, 0);
                    double vx = gt.cx() - ep.gt[static_cast<std::size_t>(prev)].cx();
                    double vy = gt.cy() - ep.gt[static_cast<std::size_t>(prev)].cy();
                    if (std::hypot(vx, vy) < 1e-4) {
                        vx = 0.01;
                        vy = 0.0;
                    }
                    const double rot = rng.uniform(-1.2, 1.2);
                    const double c = std::cos(rot), sn = std::sin(rot);
                    gvx = c * vx - sn * vy;
                    gvy = sn * vx + c * vy;
                }
            } else {
                segment_left = 6 + static_cast<int>(rng.below(20));
            }
        }
        --segment_left;

        if (lost) {
            gx = std::clamp(gx + gvx, 0.0, 1.0);
            gy = std::clamp(gy + gvy, 0.0, 1.0);
            out.push_back(
                Box::from_center(gx, gy, gt.width(), gt.height()).clamped01());
        } else {
            const double scale = std::max(gt.width(), gt.height());
            const double cx = gt.cx() + jitter * scale * rng.normal();
            const double cy = gt.cy() + jitter * scale * rng.normal();
            const double w = gt.width() * std::exp(0.3 * jitter * rng.normal());
            const double h = gt.height() * std::exp(0.3 * jitter * rng.normal());
            out.push_back(Box::from_center(cx, cy, w, h).clamped01());
        }
    }
    return out;
}

std::vector<Box> trace_for_bin(const Episode& ep, Rng& rng, double lo, double hi,
                               int max_tries) {
    const double target = 0.5 * (lo + hi);
    // Mean IoU is monotone decreasing in the drift dial; bisect it.
    double m_lo = 0.0, m_hi = 1.0;
    for (int i = 0; i < 24; ++i) {
        const double mid = 0.5 * (m_lo + m_hi);
        Rng probe(rng.next_u64());
        const double q = trace_mean_iou(drifted_trace(ep, probe, mid), ep);
        if (q > target)
            m_lo = mid;
        else
            m_hi = mid;
    }
    const double m = 0.5 * (m_lo + m_hi);

    std::vector<Box> best;
    double best_dist = 1e9;
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        std::vector<Box> trace = drifted_trace(ep, rng, m);
        const double q = trace_mean_iou(trace, ep);
        if (q >= lo && q < hi) return trace;
        const double dist = std::fabs(q - target);
        if (dist < best_dist) {
            best_dist = dist;
            best = std::move(trace);
        }
    }
    return best;
}

bool cutmix_observation(Tensor& obs, const Episode& ep, int frame, const SearchRegion& region,
                        double prob, Rng& rng) {
    if (!rng.bernoulli(prob)) return false;
    return inject_appearance_blob(obs, ep, frame, region, rng);
}

namespace {

struct Sample {
    const Episode* episode = nullptr;
    const std::vector<Box>* trace = nullptr;          // tracker-generated
    const std::vector<Box>* quality_trace = nullptr;  // drifted, random dial
    int frame = 0;
    std::uint64_t seed = 0;
};

struct SampleStats {
    double loss_total = 0.0, loss_tr = 0.0, loss_m = 0.0, loss_w = 0.0;
    double iou_value = 0.0;
    bool scoremap_hit = false;
};

struct WorkerOut {
    std::vector<Tensor> grads;
    std::vector<SampleStats> stats;
    std::string error;
};

// Wide crop augmentation: the tracking loop re-centers on its own (possibly
// off) predictions, so training must cover off-center targets and misjudged
// scales.
SearchRegion training_region(const Box& gt, double region_scale, Rng& rng) {
    const double side =
        std::max(region_scale * std::max(gt.width(), gt.height()), 0.05) *
        rng.uniform(0.8, 1.3);
    const double cx = gt.cx() + rng.uniform(-0.15, 0.15) * side;
    const double cy = gt.cy() + rng.uniform(-0.15, 0.15) * side;
    return SearchRegion{cx, cy, side};
}

SampleStats run_training_sample(const MptModel& model, const Sample& smp,
                                const TrainConfig& cfg, bool prompt_phase,
                                std::vector<Tensor>& grad_buffer) {
    const ModelConfig& mc = model.config();
    const Episode& ep = *smp.episode;
    Rng rng(smp.seed);

    const Box& gt = ep.gt[static_cast<std::size_t>(smp.frame)];
    const SearchRegion region = training_region(gt, ep.cfg.region_scale, rng);
    Tensor obs = render_observation(ep, smp.frame, region);
    cutmix_observation(obs, ep, smp.frame, region, cfg.cutmix_prob, rng);
    const Box gt_norm = normalize_to_region(gt, region);

    Tape tape;
    LossBreakdown loss;
    Box pred_norm;
    Tensor score_value;
    if (prompt_phase) {
        const std::vector<Box>& source =
            rng.bernoulli(cfg.quality_mix_prob) ? *smp.quality_trace : *smp.trace;
        const Trajectory window = sample_trajectory(source, smp.frame, mc.traj_len,
                                                    cfg.sparseness_max,
                                                    cfg.reverse_sample_prob, rng);
        const Trajectory window_norm = normalize_to_region(window, region);
        ForwardOptions fo;
        fo.compute_motion_head = cfg.lambda_m != 0.0;
        const JointResult out = model.joint_forward(tape, obs, ep.target_appearance,
                                                    window_norm, fo);
        LossWeights lw{cfg.lambda_iou, cfg.lambda_l1, cfg.lambda_m, cfg.loss_weight_term};
        loss = total_loss(tape, out, gt_norm, mc.grid_h, mc.grid_w, lw);
        pred_norm = box_from_tensor(tape.value(out.box));
        score_value = tape.value(out.score);
    } else {
        const VisionResult out = model.vision_forward(tape, obs, ep.target_appearance);
        const Var l = tracking_loss(tape, out.score, out.box, gt_norm, mc.grid_h, mc.grid_w,
                                    TrackingLossWeights{cfg.lambda_iou, cfg.lambda_l1});
        loss.total = l;
        loss.total_value = tape.value(l)[0];
        loss.tracking = loss.total_value;
        if (!std::isfinite(loss.total_value)) throw NonFiniteLoss("tracking");
        pred_norm = box_from_tensor(tape.value(out.box));
        score_value = tape.value(out.score);
    }

    // Mean-over-batch scaling before backward.
    const Var scaled = tape.scale(loss.total, 1.0 / static_cast<double>(cfg.batch_size));
    tape.backward(scaled);
    tape.export_param_grads_indexed(grad_buffer);

    SampleStats st;
    st.loss_total = loss.total_value;
    st.loss_tr = loss.tracking;
    st.loss_m = loss.motion;
    st.loss_w = loss.weight;
    st.iou_value = iou(pred_norm, gt_norm);
    const double gx = gt_norm.cx(), gy = gt_norm.cy();
    if (gx >= 0.0 && gx < 1.0 && gy >= 0.0 && gy < 1.0) {
        const int gc = std::clamp(static_cast<int>(gx * mc.grid_w), 0, mc.grid_w - 1);
        const int gr = std::clamp(static_cast<int>(gy * mc.grid_h), 0, mc.grid_h - 1);
        const auto [r, c] = argmax_with_tiebreak(score_value, mc.grid_w);
        st.scoremap_hit = (r == gr && c == gc);
    }
    return st;
}

TrainResult run_training(MptModel& model, const TrainConfig& cfg, const SceneConfig& scene,
                         bool prompt_phase,
                         const std::function<void(const EpochMetrics&)>& on_epoch) {
    model.apply_freeze_mode(prompt_phase ? cfg.freeze_mode : FreezeMode::kAll);

    AdamW optimizer(model.params(), AdamW::Config{0.9, 0.999, 1e-8, cfg.weight_decay});
    const LrSchedule schedule{cfg.base_lr, cfg.lr_decay_epoch};

    TrainResult result;
    double first_epoch_loss = -1.0;
    int bad_epochs = 0;

    const int n_episodes = std::max(
        (cfg.pairs_per_epoch + cfg.samples_per_episode - 1) / cfg.samples_per_episode, 1);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fresh episode bank per epoch, seeded independently of scheduling.
        std::vector<Episode> bank;
        std::vector<std::vector<Box>> traces;
        bank.reserve(static_cast<std::size_t>(n_episodes));
        for (int e = 0; e < n_episodes; ++e) {
            bank.push_back(simulate_episode(
                scene, Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch) + 1,
                                   static_cast<std::uint64_t>(e))));
        }
        std::vector<std::vector<Box>> quality_traces;
        if (prompt_phase) {
            traces.resize(bank.size());
            quality_traces.resize(bank.size());
            const int workers = std::max(cfg.threads, 1);
            std::vector<std::thread> pool;
            std::atomic<std::size_t> next{0};
            for (int w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (std::size_t i = next.fetch_add(1); i < bank.size();
                         i = next.fetch_add(1)) {
                        traces[i] = vision_trace(model, bank[i]);
                        Rng trng(Rng::derive(cfg.seed,
                                             (static_cast<std::uint64_t>(epoch) << 20) ^ i,
                                             0xd21f));
                        quality_traces[i] = drifted_trace(bank[i], trng,
                                                          trng.uniform(0.0, 1.0));
                    }
                });
            for (auto& th : pool) th.join();
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.lr = schedule.at_epoch(epoch);
        std::size_t n_samples = 0;

        const int batches = std::max(cfg.pairs_per_epoch / std::max(cfg.batch_size, 1), 1);
        for (int batch = 0; batch < batches; ++batch) {
            // Build the batch sample list.
            std::vector<Sample> samples;
            samples.reserve(static_cast<std::size_t>(cfg.batch_size));
            for (int i = 0; i < cfg.batch_size; ++i) {
                const std::uint64_t global_index =
                    static_cast<std::uint64_t>(batch) * cfg.batch_size + i;
                Sample s;
                const std::size_t ep_idx =
                    static_cast<std::size_t>(global_index / cfg.samples_per_episode) %
                    bank.size();
                s.episode = &bank[ep_idx];
                s.trace = prompt_phase ? &traces[ep_idx] : nullptr;
                s.quality_trace = prompt_phase ? &quality_traces[ep_idx] : nullptr;
                s.seed = Rng::derive(cfg.seed,
                                     (static_cast<std::uint64_t>(epoch) << 24) ^ global_index,
                                     0x7a17);
                Rng frame_rng(s.seed ^ 0x9e37);
                s.frame = 1 + static_cast<int>(frame_rng.below(
                                  static_cast<std::uint64_t>(s.episode->length() - 1)));
                samples.push_back(s);
            }

            // Worker lanes over contiguous chunks; merge order is fixed by
            // chunk index, so the reduction is deterministic for a given
            // thread-count config.
            const int workers = std::max(std::min<int>(cfg.threads,
                                                       static_cast<int>(samples.size())), 1);
            std::vector<WorkerOut> outs(static_cast<std::size_t>(workers));
            const std::size_t chunk =
                (samples.size() + static_cast<std::size_t>(workers) - 1) /
                static_cast<std::size_t>(workers);
            const std::size_t n_params = model.params().count();

            auto work = [&](int w) {
                WorkerOut& out = outs[static_cast<std::size_t>(w)];
                out.grads.assign(n_params, Tensor());
                const std::size_t lo = static_cast<std::size_t>(w) * chunk;
                const std::size_t hi = std::min(samples.size(), lo + chunk);
                try {
                    for (std::size_t i = lo; i < hi; ++i)
                        out.stats.push_back(run_training_sample(model, samples[i], cfg,
                                                                prompt_phase, out.grads));
                } catch (const std::exception& ex) {
                    out.error = ex.what();
                }
            };
            if (workers == 1) {
                work(0);
            } else {
                std::vector<std::thread> pool;
                for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
                for (auto& th : pool) th.join();
            }
            for (const auto& out : outs)
                if (!out.error.empty()) throw DivergenceError("training aborted: " + out.error);

            // Ordered gradient merge, then one optimizer step.
            model.params().zero_grads();
            auto& all = model.params().all();
            for (const auto& out : outs)
                for (std::size_t i = 0; i < n_params; ++i)
                    if (!out.grads[i].empty()) all[i].grad.add_inplace(out.grads[i]);
            optimizer.step(em.lr);

            for (const auto& out : outs)
                for (const auto& st : out.stats) {
                    em.loss_total += st.loss_total;
                    em.loss_tr += st.loss_tr;
                    em.loss_m += st.loss_m;
                    em.loss_w += st.loss_w;
                    em.train_iou += st.iou_value;
                    em.scoremap_acc += st.scoremap_hit ? 1.0 : 0.0;
                    ++n_samples;
                }
        }

        const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(n_samples, 1));
        em.loss_total *= inv;
        em.loss_tr *= inv;
        em.loss_m *= inv;
        em.loss_w *= inv;
        em.train_iou *= inv;
        em.scoremap_acc *= inv;
        result.epochs.push_back(em);
        if (on_epoch) on_epoch(em);

        if (first_epoch_loss < 0.0) first_epoch_loss = em.loss_total;
        if (em.loss_total > cfg.divergence_factor * first_epoch_loss) {
            if (++bad_epochs >= cfg.divergence_patience) {
                result.diverged = true;
                result.divergence_term = "loss_total";
                throw DivergenceError(
                    "loss diverged: epoch " + std::to_string(epoch) + " loss " +
                    std::to_string(em.loss_total) + " vs initial " +
                    std::to_string(first_epoch_loss));
            }
        } else {
            bad_epochs = 0;
        }
    }
    return result;
}

}  // namespace

TrainResult train_mpt(MptModel& model, const TrainConfig& cfg, const SceneConfig& scene,
                      const std::function<void(const EpochMetrics&)>& on_epoch) {
    return run_training(model, cfg, scene, true, on_epoch);
}

TrainResult pretrain_tracker(MptModel& model, const TrainConfig& cfg, const SceneConfig& scene,
                             const std::function<void(const EpochMetrics&)>& on_epoch) {
    return run_training(model, cfg, scene, false, on_epoch);
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open metrics csv for writing: " + path);
    f << "epoch,loss_total,loss_tr,loss_m,loss_w,train_iou,scoremap_acc,lr\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                      r.loss_total, r.loss_tr, r.loss_m, r.loss_w, r.train_iou, r.scoremap_acc,
                      r.lr);
        f << buf;
    }
}

}  // namespace mpt
