// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/model_config.hpp"

#include <stdexcept>

#include <json.hpp>

namespace mpt {

using nlohmann::json;

const char* to_string(SpeMode m) {
    switch (m) {
        case SpeMode::kFourier: return "fourier";
        case SpeMode::kLearnedLinear: return "learned_linear";
    }
    return "fourier";
}

const char* to_string(TpeMode m) {
    switch (m) {
        case TpeMode::kLogInit: return "log_init";
        case TpeMode::kZeros: return "zeros";
        case TpeMode::kRandomInit: return "random_init";
        case TpeMode::kLinearInit: return "linear_init";
        case TpeMode::kLogInitFrozen: return "log_init_frozen";
    }
    return "log_init";
}

SpeMode spe_mode_from_string(const std::string& s) {
    if (s == "fourier") return SpeMode::kFourier;
    if (s == "learned_linear") return SpeMode::kLearnedLinear;
    throw std::invalid_argument("unknown spe mode: " + s);
}

TpeMode tpe_mode_from_string(const std::string& s) {
    if (s == "log_init") return TpeMode::kLogInit;
    if (s == "zeros") return TpeMode::kZeros;
    if (s == "random_init") return TpeMode::kRandomInit;
    if (s == "linear_init") return TpeMode::kLinearInit;
    if (s == "log_init_frozen") return TpeMode::kLogInitFrozen;
    throw std::invalid_argument("unknown tpe mode: " + s);
}

std::string ModelConfig::to_json() const {
    json j = {{"traj_len", traj_len},
              {"channels", channels},
              {"app_channels", app_channels},
              {"grid_h", grid_h},
              {"grid_w", grid_w},
              {"heads", heads},
              {"decoder_blocks", decoder_blocks},
              {"decoder_mlp_hidden", decoder_mlp_hidden},
              {"head_hidden", head_hidden},
              {"size_head_hidden", size_head_hidden},
              {"spe_sigma", spe_sigma},
              {"tpe_alpha", tpe_alpha},
              {"tpe_n", tpe_n},
              {"spe_mode", to_string(spe_mode)},
              {"tpe_mode", to_string(tpe_mode)},
              {"point_embeddings", point_embeddings},
              {"weight_mechanism", weight_mechanism},
              {"softargmax_tau", softargmax_tau},
              {"pool_tau", pool_tau},
              {"init_seed", init_seed}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    ModelConfig c;
    c.traj_len = j.value("traj_len", c.traj_len);
    c.channels = j.value("channels", c.channels);
    c.app_channels = j.value("app_channels", c.app_channels);
    c.grid_h = j.value("grid_h", c.grid_h);
    c.grid_w = j.value("grid_w", c.grid_w);
    c.heads = j.value("heads", c.heads);
    c.decoder_blocks = j.value("decoder_blocks", c.decoder_blocks);
    c.decoder_mlp_hidden = j.value("decoder_mlp_hidden", c.decoder_mlp_hidden);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.size_head_hidden = j.value("size_head_hidden", c.size_head_hidden);
    c.spe_sigma = j.value("spe_sigma", c.spe_sigma);
    c.tpe_alpha = j.value("tpe_alpha", c.tpe_alpha);
    c.tpe_n = j.value("tpe_n", c.tpe_n);
    if (j.contains("spe_mode")) c.spe_mode = spe_mode_from_string(j["spe_mode"].get<std::string>());
    if (j.contains("tpe_mode")) c.tpe_mode = tpe_mode_from_string(j["tpe_mode"].get<std::string>());
    c.point_embeddings = j.value("point_embeddings", c.point_embeddings);
    c.weight_mechanism = j.value("weight_mechanism", c.weight_mechanism);
    c.softargmax_tau = j.value("softargmax_tau", c.softargmax_tau);
    c.pool_tau = j.value("pool_tau", c.pool_tau);
    c.init_seed = j.value("init_seed", c.init_seed);
    return c;
}

}  // namespace mpt
