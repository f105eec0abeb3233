// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mptrack/checkpoint.hpp"
#include "mptrack/grad_check.hpp"
#include "mptrack/runconfig.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

mpt::RunConfig load_run_config(const std::string& config_path, bool seed_given,
                               std::uint64_t seed) {
    mpt::RunConfig cfg = mpt::RunConfig::desk_defaults();
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw std::runtime_error("cannot open config: " + config_path);
        std::stringstream ss;
        ss << f.rdbuf();
        cfg = mpt::RunConfig::from_json(ss.str());
    }
    if (seed_given) cfg.reseed(seed);
    return cfg;
}

void echo_config(const fs::path& out_dir, const mpt::RunConfig& cfg,
                 const std::string& command) {
    fs::create_directories(out_dir);
    json j = json::parse(cfg.to_json());
    j["version"] = mpt::kVersion;
    j["command"] = command;
    std::ofstream f(out_dir / "config_echo.json", std::ios::trunc);
    f << j.dump(2) << "\n";
}

void write_json_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text << "\n";
}

std::unique_ptr<mpt::MptModel> model_from_checkpoint(const std::string& prefix) {
    if (!mpt::checkpoint_exists(prefix))
        throw std::runtime_error("missing checkpoint: " + prefix);
    const auto cfg = mpt::ModelConfig::from_json(mpt::read_checkpoint_config(prefix));
    auto model = std::make_unique<mpt::MptModel>(cfg);
    mpt::load_checkpoint(prefix, model->params());
    return model;
}

int cmd_pretrain(const mpt::RunConfig& cfg, const fs::path& out) {
    mpt::MptModel model(cfg.model);
    mpt::TrainConfig pc = cfg.pretrain;
    auto result = mpt::pretrain_tracker(model, pc, cfg.pretrain_scene,
                                        [](const mpt::EpochMetrics& m) {
                                            std::printf("pretrain epoch %d loss %.4f iou %.3f\n",
                                                        m.epoch, m.loss_total, m.train_iou);
                                        });
    mpt::write_metrics_csv((out / "metrics.csv").string(), result.epochs);
    mpt::save_checkpoint((out / "tracker").string(), model.params(), cfg.model.to_json());
    std::printf("pretrained tracker -> %s\n", (out / "tracker").string().c_str());
    return 0;
}

int cmd_train(const mpt::RunConfig& cfg, const fs::path& out, const std::string& tracker_prefix) {
    if (!mpt::checkpoint_exists(tracker_prefix))
        throw std::runtime_error("missing pretrained tracker checkpoint: " + tracker_prefix);
    mpt::MptModel model(cfg.model);
    mpt::load_checkpoint(tracker_prefix, model.params(), "tracker.");
    auto result = mpt::train_mpt(model, cfg.train, cfg.train_scene,
                                 [](const mpt::EpochMetrics& m) {
                                     std::printf(
                                         "epoch %d loss %.4f (tr %.4f m %.4f w %.4f) iou %.3f "
                                         "acc %.3f lr %.2g\n",
                                         m.epoch, m.loss_total, m.loss_tr, m.loss_m, m.loss_w,
                                         m.train_iou, m.scoremap_acc, m.lr);
                                 });
    mpt::write_metrics_csv((out / "metrics.csv").string(), result.epochs);
    mpt::save_checkpoint((out / "model").string(), model.params(), cfg.model.to_json());
    std::printf("trained model -> %s\n", (out / "model").string().c_str());
    return 0;
}

int cmd_eval(const mpt::RunConfig& cfg, const fs::path& out, const std::string& ckpt,
             const std::string& mode, bool episode_logs, bool dump_traces) {
    auto model = model_from_checkpoint(ckpt);
    mpt::EvalConfig ec = cfg.eval;
    ec.scene = cfg.eval_scene;
    if (!mode.empty()) ec.mode = mpt::eval_mode_from_string(mode);
    fs::path log_dir;
    if (episode_logs) {
        log_dir = out / "episodes";
        fs::create_directories(log_dir);
    }
    const auto report = mpt::evaluate(*model, ec, log_dir.string(),
                                      ec.mode != mpt::EvalMode::kVision);
    write_json_file(out / "report.json", report.to_json());
    report.write_csv((out / "report.csv").string());
    if (dump_traces) {
        // Ground-truth trajectory of the first evaluation episode, in the
        // shared per-frame JSON-lines box format.
        const auto ep = mpt::simulate_episode(ec.scene, mpt::Rng::derive(ec.seed, 0, 0xe7));
        mpt::save_trajectory_file((out / "episode_0_gt.jsonl").string(), ep.gt);
    }
    std::printf("mode %s success %.3f auc %.3f precision %.3f\n", mpt::to_string(ec.mode),
                report.success_rate, report.auc, report.precision);
    return 0;
}

int cmd_ablate(const mpt::RunConfig& cfg, const fs::path& out, const std::string& selector,
               const std::string& tracker_prefix, const std::string& baseline_report) {
    const auto run_variant = [&](const mpt::RunConfig& rc, const fs::path& dir) {
        fs::create_directories(dir);
        if (!mpt::checkpoint_exists(tracker_prefix))
            throw std::runtime_error("missing pretrained tracker checkpoint: " + tracker_prefix);
        mpt::MptModel model(rc.model);
        mpt::load_checkpoint(tracker_prefix, model.params(), "tracker.");
        auto result = mpt::train_mpt(model, rc.train, rc.train_scene);
        mpt::write_metrics_csv((dir / "metrics.csv").string(), result.epochs);
        mpt::save_checkpoint((dir / "model").string(), model.params(), rc.model.to_json());
        mpt::EvalConfig ec = rc.eval;
        ec.scene = rc.eval_scene;
        const auto report = mpt::evaluate(model, ec);
        write_json_file(dir / "report.json", report.to_json());
        return report;
    };

    double full_success;
    if (!baseline_report.empty()) {
        std::ifstream f(baseline_report);
        if (!f) throw std::runtime_error("cannot open baseline report: " + baseline_report);
        full_success = json::parse(f).at("success_rate").get<double>();
    } else {
        full_success = run_variant(cfg, out / "full").success_rate;
    }
    const auto variant_cfg = mpt::apply_ablation(cfg, selector);
    const auto variant = run_variant(variant_cfg, out / selector);

    json j = {{"selector", selector},
              {"full_success", full_success},
              {"variant_success", variant.success_rate},
              {"delta", variant.success_rate - full_success}};
    write_json_file(out / "ablate_report.json", j.dump(2));
    std::printf("%s: full %.3f variant %.3f delta %+.3f\n", selector.c_str(), full_success,
                variant.success_rate, variant.success_rate - full_success);
    return 0;
}

int cmd_sweep(const mpt::RunConfig& cfg, const fs::path& out, const std::string& param,
              const std::string& values_csv, const std::string& tracker_prefix) {
    std::vector<double> values;
    std::stringstream ss(values_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) values.push_back(std::stod(tok));
    if (values.empty()) throw std::runtime_error("sweep: empty value list");

    std::ofstream csv(out / "sweep.csv", std::ios::trunc);
    csv << "value,success,auc\n";
    for (const double v : values) {
        const auto rc = mpt::apply_sweep_value(cfg, param, v);
        std::ostringstream tag;
        tag << param << "_" << v;
        const fs::path dir = out / tag.str();
        fs::create_directories(dir);
        if (!mpt::checkpoint_exists(tracker_prefix))
            throw std::runtime_error("missing pretrained tracker checkpoint: " + tracker_prefix);
        mpt::MptModel model(rc.model);
        mpt::load_checkpoint(tracker_prefix, model.params(), "tracker.");
        auto result = mpt::train_mpt(model, rc.train, rc.train_scene);
        mpt::write_metrics_csv((dir / "metrics.csv").string(), result.epochs);
        mpt::EvalConfig ec = rc.eval;
        ec.scene = rc.eval_scene;
        const auto report = mpt::evaluate(model, ec);
        write_json_file(dir / "report.json", report.to_json());
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", v, report.success_rate,
                      report.auc);
        csv << buf;
        std::printf("%s=%g success %.3f auc %.3f\n", param.c_str(), v, report.success_rate,
                    report.auc);
    }
    return 0;
}

int cmd_gradcheck() {
    // Small end-to-end configuration; operator-level checks live in the test
    // suite, this command verifies the assembled pipeline.
    mpt::ModelConfig mc;
    mc.traj_len = 4;
    mc.channels = 16;
    mc.grid_h = 4;
    mc.grid_w = 4;
    mc.app_channels = 4;
    mc.decoder_mlp_hidden = 24;
    mc.head_hidden = 24;
    mc.size_head_hidden = 8;
    mc.init_seed = 7;
    mpt::MptModel model(mc);
    {
        // exercise the paths behind the zero-initialized output projections
        mpt::Rng rng(93);
        for (auto& p : model.params().all()) {
            const bool is_out =
                p.name.rfind("decoder.", 0) == 0 &&
                (p.name.ends_with(".o.w") || p.name.ends_with(".o.b") ||
                 p.name.ends_with(".mlp.fc2.w") || p.name.ends_with(".mlp.fc2.b"));
            if (is_out)
                for (std::size_t i = 0; i < p.value.size(); ++i)
                    p.value[i] = rng.trunc_normal(0.02);
        }
    }
    model.apply_freeze_mode(mpt::FreezeMode::kAll);

    mpt::SceneConfig sc;
    sc.grid_h = mc.grid_h;
    sc.grid_w = mc.grid_w;
    sc.app_channels = mc.app_channels;
    sc.episode_len = 12;
    const auto ep = mpt::simulate_episode(sc, 3);
    const auto region = mpt::region_around(ep.gt[6], sc.region_scale, 0.05);
    const auto obs = mpt::render_observation(ep, 6, region);
    const auto gt_norm = mpt::normalize_to_region(ep.gt[6], region);
    const auto window = mpt::window_from_history(ep.gt, static_cast<std::size_t>(mc.traj_len));
    const auto window_norm = mpt::normalize_to_region(window, region);

    mpt::LossWeights lw;
    {
        mpt::Tape t0(false);
        const auto out0 = model.joint_forward(t0, obs, ep.target_appearance, window_norm);
        lw.weight_label_override =
            mpt::iou(mpt::box_from_tensor(t0.value(out0.motion_box)), gt_norm);
    }
    const auto forward = [&](mpt::Tape& t) {
        const auto out = model.joint_forward(t, obs, ep.target_appearance, window_norm);
        return mpt::total_loss(t, out, gt_norm, mc.grid_h, mc.grid_w, lw).total;
    };
    std::vector<mpt::Parameter*> params;
    for (auto& p : model.params().all()) params.push_back(&p);
    const auto res = mpt::grad_check(forward, params, 1e-6);
    std::printf("full pipeline: max relative error %.3g (worst %s[%zu])\n", res.max_rel_error,
                res.worst_param.c_str(), res.worst_index);
    const bool ok = res.finite && res.max_rel_error < 1e-4;
    std::printf("%s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"motion-prompt tracking harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "runs/out", mode, selector, values, checkpoint,
                tracker = "runs/pretrain/tracker", baseline_report, sweep_param;
    std::uint64_t seed = 0;
    bool episode_logs = false, dump_traces = false;

    app.add_option("--config", config_path, "run config JSON");
    auto* seed_opt = app.add_option("--seed", seed, "run seed");
    app.add_option("--out", out_dir, "output directory");

    auto* pre = app.add_subcommand("pretrain", "train the toy visual tracker");
    auto* tr = app.add_subcommand("train", "prompt-learn the motion modules");
    tr->add_option("--tracker", tracker, "pretrained tracker checkpoint prefix");
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    ev->add_option("--checkpoint", checkpoint, "model checkpoint prefix")->required();
    ev->add_option("--mode", mode, "vision|motion|joint|no_weight");
    ev->add_flag("--episode-logs", episode_logs, "write per-frame JSON-lines logs");
    ev->add_flag("--dump-traces", dump_traces, "write ground-truth trajectory files");
    auto* ab = app.add_subcommand("ablate", "train and compare an ablation variant");
    ab->add_option("--selector", selector, "ablation selector")->required();
    ab->add_option("--tracker", tracker, "pretrained tracker checkpoint prefix");
    ab->add_option("--baseline-report", baseline_report, "existing full-model report.json");
    auto* sw = app.add_subcommand("sweep", "train/eval across parameter values");
    sw->add_option("--param", sweep_param, "alpha|T|cutmix_prob|sparseness")->required();
    sw->add_option("--values", values, "comma-separated values")->required();
    sw->add_option("--tracker", tracker, "pretrained tracker checkpoint prefix");
    auto* gc = app.add_subcommand("gradcheck", "finite-difference pipeline check");
    for (auto* sub : {pre, tr, ev, ab, sw, gc}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load_run_config(config_path, seed_opt->count() > 0, seed);
        const fs::path out(out_dir);
        fs::create_directories(out);

        std::string command;
        for (int i = 1; i < argc; ++i) {
            if (i > 1) command += ' ';
            command += argv[i];
        }
        echo_config(out, cfg, command);

        if (app.got_subcommand(gc)) return cmd_gradcheck();
        if (app.got_subcommand(pre)) return cmd_pretrain(cfg, out);
        if (app.got_subcommand(tr)) return cmd_train(cfg, out, tracker);
        if (app.got_subcommand(ev))
            return cmd_eval(cfg, out, checkpoint, mode, episode_logs, dump_traces);
        if (app.got_subcommand(ab))
            return cmd_ablate(cfg, out, selector, tracker, baseline_report);
        if (app.got_subcommand(sw)) return cmd_sweep(cfg, out, sweep_param, values, tracker);
        return 1;
    } catch (const std::exception& ex) {
        json err = {{"error", {{"type", "runtime"}, {"message", ex.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
