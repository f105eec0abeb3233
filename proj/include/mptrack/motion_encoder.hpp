// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include "mptrack/autograd.hpp"
#include "mptrack/geometry.hpp"
#include "mptrack/model_config.hpp"
#include "mptrack/nn.hpp"
#include "mptrack/rng.hpp"

namespace mpt {

/// Fixed Gaussian Fourier-feature map from normalized 2-D coordinates to the
/// C-dimensional embedding space: [sin(2*pi*B^T p), cos(2*pi*B^T p)] with
/// B ~ N(0, sigma^2), frozen after construction. The projection may live in a
/// frozen checkpoint parameter; this view reads through the pointer so loaded
/// values take effect.
class SpatialPe {
public:
    SpatialPe() = default;
    explicit SpatialPe(const Tensor* proj);

    static Tensor draw_projection(int channels, double sigma, std::uint64_t seed);  // [2, C/2]

    int channels() const { return proj_ ? static_cast<int>(proj_->cols()) * 2 : 0; }
    const Tensor& proj() const { return *proj_; }

    /// One point -> C-vector, every entry in [-1, 1].
    void map_point(double x, double y, double* out) const;

    Tensor map_points(const std::vector<std::pair<double, double>>& pts) const;  // [n, C]

    /// Dense map over grid cell centers ((col+0.5)/W, (row+0.5)/H),
    /// row-major over (row, col). [HW, C]
    Tensor dense_grid_map(int h, int w) const;

private:
    const Tensor* proj_ = nullptr;
};

/// Log-warped sinusoidal table: row t holds interleaved
/// sin/cos of alpha*log10(t+1) / n^(2i/d). Learnable after construction.
Tensor temporal_pe_table(int traj_len, int channels, double alpha, double n);

/// Linear-warp variant: alpha*(t+1)/T replaces alpha*log10(t+1) in the angle.
Tensor temporal_pe_table_linear(int traj_len, int channels, double alpha, double n);

/// d(angle)/dt of the table's sin component at (t, i):
/// alpha / (ln(10) * (t+1) * n^(2i/d)). Strictly decreasing in t; its maximum
/// over the grid sits at (0,0) and equals pi for the default alpha.
double instantaneous_frequency(double t, int i, double alpha, double n, int d);

/// Trajectory -> (2T+3) x C motion tokens:
/// [tl_0..tl_{T-1}, br_0..br_{T-1}, rep_tl, rep_br, rep_w].
/// Corner tokens are spatial PE + point embedding + temporal PE row t; the
/// three representative tokens carry no positional encoding.
class MotionEncoder {
public:
    MotionEncoder(ParamStore& store, const ModelConfig& cfg, Rng& rng);

    Var encode(Tape& t, const Trajectory& normalized) const;

    /// (2T+3) x C positional tensor for decoder cross-attention queries:
    /// temporal rows repeated for both corner groups, zeros for rep tokens.
    Var motion_positional(Tape& t) const;

    /// Dense spatial map for the visual stream, same coordinate lift as the
    /// trajectory tokens. [HW, C]
    Var dense_spatial_map(Tape& t) const;

    const SpatialPe& spatial_pe() const { return spe_; }
    Parameter& tpe_table() { return *tpe_; }
    const ModelConfig& config() const { return cfg_; }

private:
    Var lift_points(Tape& t, const std::vector<std::pair<double, double>>& pts) const;
    const Tensor& dense_map(void) const;

    ModelConfig cfg_;
    SpatialPe spe_;
    Parameter* spe_proj_ = nullptr;  // frozen; rides in checkpoints
    Linear coord_proj_;              // used only in learned-linear mode
    Parameter* tpe_ = nullptr;
    Parameter* point_tl_ = nullptr;
    Parameter* point_br_ = nullptr;
    Parameter* rep_tl_ = nullptr;
    Parameter* rep_br_ = nullptr;
    Parameter* rep_w_ = nullptr;
    // dense-map cache refreshes when the (frozen) projection changes, e.g.
    // after a checkpoint load
    mutable Tensor dense_map_cache_;
    mutable std::uint64_t dense_map_stamp_ = 0;
};

}  // namespace mpt
