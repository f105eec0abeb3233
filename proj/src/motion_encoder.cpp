// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/motion_encoder.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mpt {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

SpatialPe::SpatialPe(const Tensor* proj) : proj_(proj) {
    if (proj_ != nullptr && proj_->rows() != 2)
        throw std::invalid_argument("spatial PE projection must be 2 x C/2");
}

Tensor SpatialPe::draw_projection(int channels, double sigma, std::uint64_t seed) {
    if (channels % 2 != 0) throw std::invalid_argument("spatial PE needs an even channel count");
    Rng rng(seed);
    Tensor proj(2, static_cast<std::size_t>(channels) / 2);
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = rng.normal(0.0, sigma);
    return proj;
}

void SpatialPe::map_point(double x, double y, double* out) const {
    const std::size_t half = proj_->cols();
    for (std::size_t j = 0; j < half; ++j) {
        const double phase = kTwoPi * (proj_->at(0, j) * x + proj_->at(1, j) * y);
        out[j] = std::sin(phase);
        out[half + j] = std::cos(phase);
    }
}

Tensor SpatialPe::map_points(const std::vector<std::pair<double, double>>& pts) const {
    Tensor out(pts.size(), static_cast<std::size_t>(channels()));
    for (std::size_t r = 0; r < pts.size(); ++r)
        map_point(pts[r].first, pts[r].second, out.data() + r * out.cols());
    return out;
}

Tensor SpatialPe::dense_grid_map(int h, int w) const {
    std::vector<std::pair<double, double>> centers;
    centers.reserve(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            centers.emplace_back((c + 0.5) / static_cast<double>(w),
                                 (r + 0.5) / static_cast<double>(h));
    return map_points(centers);
}

Tensor temporal_pe_table(int traj_len, int channels, double alpha, double n) {
    if (channels % 2 != 0) throw std::invalid_argument("temporal PE needs an even channel count");
    if (traj_len < 1) throw std::invalid_argument("temporal PE needs at least one row");
    Tensor table(static_cast<std::size_t>(traj_len), static_cast<std::size_t>(channels));
    const int d = channels;
    for (int t = 0; t < traj_len; ++t) {
        const double warped = alpha * std::log10(static_cast<double>(t) + 1.0);
        for (int i = 0; i < d / 2; ++i) {
            const double angle = warped / std::pow(n, 2.0 * i / static_cast<double>(d));
            table.at(t, 2 * i) = std::sin(angle);
            table.at(t, 2 * i + 1) = std::cos(angle);
        }
    }
    return table;
}

Tensor temporal_pe_table_linear(int traj_len, int channels, double alpha, double n) {
    if (channels % 2 != 0) throw std::invalid_argument("temporal PE needs an even channel count");
    Tensor table(static_cast<std::size_t>(traj_len), static_cast<std::size_t>(channels));
    const int d = channels;
    for (int t = 0; t < traj_len; ++t) {
        const double warped =
            alpha * (static_cast<double>(t) + 1.0) / static_cast<double>(traj_len);
        for (int i = 0; i < d / 2; ++i) {
            const double angle = warped / std::pow(n, 2.0 * i / static_cast<double>(d));
            table.at(t, 2 * i) = std::sin(angle);
            table.at(t, 2 * i + 1) = std::cos(angle);
        }
    }
    return table;
}

double instantaneous_frequency(double t, int i, double alpha, double n, int d) {
    return alpha / (std::numbers::ln10 * (t + 1.0) * std::pow(n, 2.0 * i / static_cast<double>(d)));
}

MotionEncoder::MotionEncoder(ParamStore& store, const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    const auto c = static_cast<std::size_t>(cfg.channels);

    if (cfg.spe_mode == SpeMode::kFourier) {
        spe_proj_ = &store.create(
            "encoder.spe_proj",
            SpatialPe::draw_projection(cfg.channels, cfg.spe_sigma,
                                       Rng::derive(cfg.init_seed, 0x5be)),
            /*frozen=*/true);
        spe_ = SpatialPe(&spe_proj_->value);
    } else {
        coord_proj_ = Linear::create(store, "encoder.coord_proj", 2, c, rng, 1.0);
    }

    Tensor tpe_init;
    bool tpe_frozen = false;
    switch (cfg.tpe_mode) {
        case TpeMode::kLogInit:
            tpe_init = temporal_pe_table(cfg.traj_len, cfg.channels, cfg.tpe_alpha, cfg.tpe_n);
            break;
        case TpeMode::kZeros:
            tpe_init = Tensor(cfg.traj_len, c);
            tpe_frozen = true;
            break;
        case TpeMode::kRandomInit:
            tpe_init = trunc_normal_init(cfg.traj_len, c, rng, 0.02);
            break;
        case TpeMode::kLinearInit:
            tpe_init =
                temporal_pe_table_linear(cfg.traj_len, cfg.channels, cfg.tpe_alpha, cfg.tpe_n);
            break;
        case TpeMode::kLogInitFrozen:
            tpe_init = temporal_pe_table(cfg.traj_len, cfg.channels, cfg.tpe_alpha, cfg.tpe_n);
            tpe_frozen = true;
            break;
    }
    tpe_ = &store.create("encoder.tpe", std::move(tpe_init), tpe_frozen);

    const bool point_frozen = !cfg.point_embeddings;
    point_tl_ = &store.create("encoder.point_tl",
                              point_frozen ? Tensor(1, c) : trunc_normal_init(1, c, rng),
                              point_frozen);
    point_br_ = &store.create("encoder.point_br",
                              point_frozen ? Tensor(1, c) : trunc_normal_init(1, c, rng),
                              point_frozen);
    rep_tl_ = &store.create("encoder.rep_tl", trunc_normal_init(1, c, rng));
    rep_br_ = &store.create("encoder.rep_br", trunc_normal_init(1, c, rng));
    rep_w_ = &store.create("encoder.rep_w", trunc_normal_init(1, c, rng));
}

Var MotionEncoder::lift_points(Tape& t,
                               const std::vector<std::pair<double, double>>& pts) const {
    if (cfg_.spe_mode == SpeMode::kFourier) return t.input(spe_.map_points(pts));
    Tensor coords(pts.size(), 2);
    for (std::size_t r = 0; r < pts.size(); ++r) {
        coords.at(r, 0) = pts[r].first;
        coords.at(r, 1) = pts[r].second;
    }
    return coord_proj_.apply(t, t.input(std::move(coords)));
}

Var MotionEncoder::encode(Tape& t, const Trajectory& normalized) const {
    const auto T = static_cast<std::size_t>(cfg_.traj_len);
    if (normalized.length() != T)
        throw std::invalid_argument("encode: trajectory must hold exactly " + std::to_string(T) +
                                    " boxes, got " + std::to_string(normalized.length()));
    std::vector<std::pair<double, double>> tl, br;
    tl.reserve(T);
    br.reserve(T);
    for (const Box& b : normalized.boxes) {
        if (!b.finite()) throw std::invalid_argument("encode: non-finite trajectory box");
        tl.emplace_back(b.x1, b.y1);
        br.emplace_back(b.x2, b.y2);
    }

    const Var tpe = t.param(*tpe_);
    Var tl_tokens = t.add(lift_points(t, tl), tpe);
    Var br_tokens = t.add(lift_points(t, br), tpe);
    if (cfg_.point_embeddings) {
        tl_tokens = t.add_row(tl_tokens, t.param(*point_tl_));
        br_tokens = t.add_row(br_tokens, t.param(*point_br_));
    }
    return t.concat_rows(
        {tl_tokens, br_tokens, t.param(*rep_tl_), t.param(*rep_br_), t.param(*rep_w_)});
}

Var MotionEncoder::motion_positional(Tape& t) const {
    const Var tpe = t.param(*tpe_);
    const Var zeros = t.input(Tensor(3, static_cast<std::size_t>(cfg_.channels)));
    return t.concat_rows({tpe, tpe, zeros});
}

const Tensor& MotionEncoder::dense_map() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(spe_proj_->value.data());
    for (std::size_t i = 0; i < spe_proj_->value.size() * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    if (h != dense_map_stamp_ || dense_map_cache_.empty()) {
        dense_map_cache_ = spe_.dense_grid_map(cfg_.grid_h, cfg_.grid_w);
        dense_map_stamp_ = h;
    }
    return dense_map_cache_;
}

Var MotionEncoder::dense_spatial_map(Tape& t) const {
    if (cfg_.spe_mode == SpeMode::kFourier) return t.input(dense_map());
    std::vector<std::pair<double, double>> centers;
    centers.reserve(static_cast<std::size_t>(cfg_.grid_h) * cfg_.grid_w);
    for (int r = 0; r < cfg_.grid_h; ++r)
        for (int c = 0; c < cfg_.grid_w; ++c)
            centers.emplace_back((c + 0.5) / static_cast<double>(cfg_.grid_w),
                                 (r + 0.5) / static_cast<double>(cfg_.grid_h));
    return lift_points(t, centers);
}

}  // namespace mpt
