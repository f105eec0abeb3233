// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mpt {

using nlohmann::json;

bool Box::finite() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2);
}

Box Box::clamped01() const {
    const auto cl = [](double v) { return std::min(std::max(v, 0.0), 1.0); };
    return Box{cl(x1), cl(y1), cl(x2), cl(y2)};
}

double iou(const Box& a, const Box& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    const double inter = std::max(iw, 0.0) * std::max(ih, 0.0);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double giou(const Box& a, const Box& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    const double inter = std::max(iw, 0.0) * std::max(ih, 0.0);
    const double uni = a.area() + b.area() - inter;
    const double hull_w = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
    const double hull_h = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
    const double hull = hull_w * hull_h;
    if (hull <= 0.0) return 0.0;
    const double i = uni > 0.0 ? inter / uni : 0.0;
    return i - (hull - uni) / hull;
}

Box normalize_to_region(const Box& b, const SearchRegion& r) {
    if (!(r.side > 0.0)) throw std::invalid_argument("search region side must be positive");
    if (!b.finite() || !std::isfinite(r.cx) || !std::isfinite(r.cy) || !std::isfinite(r.side))
        throw std::invalid_argument("normalize_to_region: non-finite input");
    const double ox = r.cx - 0.5 * r.side;
    const double oy = r.cy - 0.5 * r.side;
    const double inv = 1.0 / r.side;
    return Box{(b.x1 - ox) * inv, (b.y1 - oy) * inv, (b.x2 - ox) * inv, (b.y2 - oy) * inv};
}

Box denormalize_from_region(const Box& b, const SearchRegion& r) {
    const double ox = r.cx - 0.5 * r.side;
    const double oy = r.cy - 0.5 * r.side;
    return Box{ox + b.x1 * r.side, oy + b.y1 * r.side, ox + b.x2 * r.side, oy + b.y2 * r.side};
}

Trajectory normalize_to_region(const Trajectory& traj, const SearchRegion& r) {
    Trajectory out;
    out.boxes.reserve(traj.boxes.size());
    for (const Box& b : traj.boxes) out.boxes.push_back(normalize_to_region(b, r));
    return out;
}

SearchRegion region_around(const Box& b, double k, double min_side) {
    const double side = std::max(k * std::max(b.width(), b.height()), min_side);
    return SearchRegion{b.cx(), b.cy(), side};
}

Trajectory window_from_history(const std::vector<Box>& history, std::size_t target_len) {
    if (history.empty()) throw std::invalid_argument("window_from_history: empty history");
    Trajectory out;
    out.boxes.resize(target_len);
    for (std::size_t i = 0; i < target_len; ++i) {
        // Right-aligned: slot target_len-1 holds the newest box.
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(history.size()) -
                                   static_cast<std::ptrdiff_t>(target_len) +
                                   static_cast<std::ptrdiff_t>(i);
        out.boxes[i] = history[static_cast<std::size_t>(std::max<std::ptrdiff_t>(src, 0))];
    }
    return out;
}

namespace {

// Counts grid columns (cell centers) falling inside [lo, hi) of a 1-D box
// extent, over a domain [d0, d0 + R*h).
std::size_t axis_count(double lo, double hi, double d0, double h, std::size_t r) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < r; ++i) {
        const double x = d0 + (static_cast<double>(i) + 0.5) * h;
        if (x >= lo && x <= hi) ++n;
    }
    return n;
}

struct RasterCounts {
    double inter = 0.0, uni = 0.0, hull = 0.0, area_a = 0.0, area_b = 0.0;
};

RasterCounts raster_counts(const Box& a, const Box& b, std::size_t r) {
    const double hx1 = std::min(a.x1, b.x1), hx2 = std::max(a.x2, b.x2);
    const double hy1 = std::min(a.y1, b.y1), hy2 = std::max(a.y2, b.y2);
    const double w = std::max(hx2 - hx1, 1e-300);
    const double h = std::max(hy2 - hy1, 1e-300);
    const double cw = w / static_cast<double>(r);
    const double ch = h / static_cast<double>(r);
    const double cell = cw * ch;

    const double ax = static_cast<double>(axis_count(a.x1, a.x2, hx1, cw, r));
    const double ay = static_cast<double>(axis_count(a.y1, a.y2, hy1, ch, r));
    const double bx = static_cast<double>(axis_count(b.x1, b.x2, hx1, cw, r));
    const double by = static_cast<double>(axis_count(b.y1, b.y2, hy1, ch, r));
    const double ix = static_cast<double>(
        axis_count(std::max(a.x1, b.x1), std::min(a.x2, b.x2), hx1, cw, r));
    const double iy = static_cast<double>(
        axis_count(std::max(a.y1, b.y1), std::min(a.y2, b.y2), hy1, ch, r));

    RasterCounts out;
    out.area_a = ax * ay * cell;
    out.area_b = bx * by * cell;
    out.inter = ix * iy * cell;
    out.uni = out.area_a + out.area_b - out.inter;
    out.hull = static_cast<double>(r) * static_cast<double>(r) * cell;
    return out;
}

}  // namespace

double raster_iou(const Box& a, const Box& b, std::size_t resolution) {
    const RasterCounts c = raster_counts(a, b, resolution);
    if (c.uni <= 0.0) return 0.0;
    return c.inter / c.uni;
}

double raster_giou(const Box& a, const Box& b, std::size_t resolution) {
    const RasterCounts c = raster_counts(a, b, resolution);
    if (c.hull <= 0.0) return 0.0;
    const double i = c.uni > 0.0 ? c.inter / c.uni : 0.0;
    return i - (c.hull - c.uni) / c.hull;
}

void save_trajectory_file(const std::string& path, const std::vector<Box>& boxes,
                          int first_frame) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open trajectory file for writing: " + path);
    int frame = first_frame;
    for (const Box& b : boxes) {
        json rec = {{"frame", frame++}, {"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}};
        f << rec.dump() << "\n";
    }
}

std::vector<Box> load_trajectory_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open trajectory file: " + path);
    std::vector<Box> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        out.push_back(Box{rec.at("x1").get<double>(), rec.at("y1").get<double>(),
                          rec.at("x2").get<double>(), rec.at("y2").get<double>()});
    }
    return out;
}

}  // namespace mpt
