// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <string>
#include <vector>

namespace mpt {

/// Axis-aligned bounding box in corner form. Coordinates are pixels in the
/// image frame or unitless after normalization to a search region.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }

    static Box from_center(double cx, double cy, double w, double h) {
        return Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    }

    bool ordered() const { return x1 <= x2 && y1 <= y2; }
    bool finite() const;

    /// Clamped into [0,1]^4 (normalized frame only).
    Box clamped01() const;
};

/// Square crop window in image pixels; the frame every trajectory is
/// normalized into before encoding.
struct SearchRegion {
    double cx = 0.0;
    double cy = 0.0;
    double side = 1.0;  // > 0
};

/// Ordered box history: index 0 = oldest, index T-1 = most recent.
struct Trajectory {
    std::vector<Box> boxes;

    std::size_t length() const { return boxes.size(); }
};

double iou(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);

Box normalize_to_region(const Box& b, const SearchRegion& r);
Box denormalize_from_region(const Box& b, const SearchRegion& r);

Trajectory normalize_to_region(const Trajectory& traj, const SearchRegion& r);

/// Search region around a box: square of side k * max(w, h), centered on it.
SearchRegion region_around(const Box& b, double k = 4.0, double min_side = 1e-6);

/// Takes the last `target_len` boxes; shorter histories are left-padded by
/// replicating the oldest available box. `history` is chronological.
Trajectory window_from_history(const std::vector<Box>& history, std::size_t target_len);

/// Rasterization oracle: IoU measured on an R x R grid of cell centers over
/// the pair's bounding hull. Axis-aligned boxes factorize per axis, so this
/// runs in O(R) while agreeing exactly with the full R^2 center count.
double raster_iou(const Box& a, const Box& b, std::size_t resolution);
double raster_giou(const Box& a, const Box& b, std::size_t resolution);

/// Trajectory file: one JSON record per line, {"frame","x1","y1","x2","y2"},
/// image-frame pixels.
void save_trajectory_file(const std::string& path, const std::vector<Box>& boxes,
                          int first_frame = 0);
std::vector<Box> load_trajectory_file(const std::string& path);

}  // namespace mpt
