// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/runconfig.hpp"

#include <stdexcept>

#include <json.hpp>

namespace mpt {

using nlohmann::json;

void RunConfig::reseed(std::uint64_t s) {
    seed = s;
    model.init_seed = Rng::derive(s, 1);
    pretrain.seed = Rng::derive(s, 2);
    train.seed = Rng::derive(s, 3);
    eval.seed = Rng::derive(s, 4);
}

std::string RunConfig::to_json() const {
    json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["seed"] = seed;
    j["model"] = json::parse(model.to_json());
    j["pretrain_scene"] = json::parse(pretrain_scene.to_json());
    j["train_scene"] = json::parse(train_scene.to_json());
    j["eval_scene"] = json::parse(eval_scene.to_json());
    j["pretrain"] = json::parse(pretrain.to_json());
    j["train"] = json::parse(train.to_json());
    j["eval"] = json::parse(eval.to_json());
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.contains("schema_version") && j["schema_version"].get<int>() != kConfigSchemaVersion)
        throw std::runtime_error("unsupported config schema version");
    RunConfig c = desk_defaults();
    if (j.contains("seed")) c.reseed(j["seed"].get<std::uint64_t>());
    if (j.contains("model")) c.model = ModelConfig::from_json(j["model"].dump());
    if (j.contains("pretrain_scene"))
        c.pretrain_scene = SceneConfig::from_json(j["pretrain_scene"].dump());
    if (j.contains("train_scene")) c.train_scene = SceneConfig::from_json(j["train_scene"].dump());
    if (j.contains("eval_scene")) c.eval_scene = SceneConfig::from_json(j["eval_scene"].dump());
    if (j.contains("pretrain")) c.pretrain = TrainConfig::from_json(j["pretrain"].dump());
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"].dump());
    if (j.contains("eval")) c.eval = EvalConfig::from_json(j["eval"].dump());
    c.eval.scene = c.eval_scene;
    return c;
}

RunConfig RunConfig::desk_defaults() {
    RunConfig c;

    // Easy scenes for pretraining the stub visual tracker.
    c.pretrain_scene.n_distractors = 0;
    c.pretrain_scene.occlusion_prob = 0.1;
    c.pretrain_scene.obs_noise = 0.02;

    // Prompt learning sees a difficulty mix so vision traces span qualities.
    c.train_scene.n_distractors = 2;
    c.train_scene.eps_app = 0.0;
    c.train_scene.eps_app_max = 0.6;
    c.train_scene.occlusion_prob = 0.3;

    // The evaluation suite: identical-appearance distractors plus occlusion.
    c.eval_scene.n_distractors = 2;
    c.eval_scene.eps_app = 0.0;
    c.eval_scene.eps_app_max = -1.0;
    c.eval_scene.occlusion_prob = 0.3;

    c.pretrain.epochs = 10;
    c.pretrain.pairs_per_epoch = 2000;
    c.pretrain.batch_size = 16;
    c.pretrain.base_lr = 3e-3;
    c.pretrain.lr_decay_epoch = 7;
    c.pretrain.lambda_m = 0.0;
    c.pretrain.cutmix_prob = 0.0;
    c.pretrain.threads = 2;

    // Desk-scale prompt-learning budget (paper-scale values stay reachable
    // through config files).
    c.train.epochs = 12;
    c.train.pairs_per_epoch = 1024;
    c.train.batch_size = 16;
    c.train.lr_decay_epoch = 9;
    c.train.base_lr = 1.5e-3;
    c.train.quality_mix_prob = 0.5;
    c.train.threads = 2;

    c.eval.episodes = 100;
    c.eval.mode = EvalMode::kJoint;
    c.eval.threads = 2;
    c.eval.scene = c.eval_scene;

    c.reseed(1);
    return c;
}

std::vector<std::string> ablation_selectors() {
    return {"wo_spe",        "wo_tpe",       "wo_point",  "tpe_init_random",
            "tpe_init_linear", "tpe_nonlearn", "loss_tr_only", "loss_tr_m",
            "no_weight",     "finetune_all", "finetune_head"};
}

RunConfig apply_ablation(const RunConfig& base, const std::string& selector) {
    RunConfig c = base;
    if (selector == "wo_spe") {
        c.model.spe_mode = SpeMode::kLearnedLinear;
    } else if (selector == "wo_tpe") {
        c.model.tpe_mode = TpeMode::kZeros;
    } else if (selector == "wo_point") {
        c.model.point_embeddings = false;
    } else if (selector == "tpe_init_random") {
        c.model.tpe_mode = TpeMode::kRandomInit;
    } else if (selector == "tpe_init_linear") {
        c.model.tpe_mode = TpeMode::kLinearInit;
    } else if (selector == "tpe_nonlearn") {
        c.model.tpe_mode = TpeMode::kLogInitFrozen;
    } else if (selector == "loss_tr_only") {
        c.train.lambda_m = 0.0;
    } else if (selector == "loss_tr_m") {
        c.train.loss_weight_term = false;
    } else if (selector == "no_weight") {
        c.model.weight_mechanism = false;
    } else if (selector == "finetune_all") {
        c.train.freeze_mode = FreezeMode::kAll;
    } else if (selector == "finetune_head") {
        c.train.freeze_mode = FreezeMode::kHead;
    } else {
        throw std::invalid_argument("unknown ablation selector: " + selector);
    }
    return c;
}

RunConfig apply_sweep_value(const RunConfig& base, const std::string& param, double value) {
    RunConfig c = base;
    if (param == "alpha") {
        c.model.tpe_alpha = value;
    } else if (param == "T") {
        c.model.traj_len = static_cast<int>(value);
    } else if (param == "cutmix_prob") {
        c.train.cutmix_prob = value;
    } else if (param == "sparseness") {
        c.train.sparseness_max = static_cast<int>(value);
    } else {
        throw std::invalid_argument("unknown sweep parameter: " + param);
    }
    return c;
}

}  // namespace mpt
