// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace mpt {

using nlohmann::json;

std::string SceneConfig::to_json() const {
    json j = {{"episode_len", episode_len},
              {"n_distractors", n_distractors},
              {"eps_app", eps_app},
              {"eps_app_max", eps_app_max},
              {"occlusion_prob", occlusion_prob},
              {"occl_min", occl_min},
              {"occl_max", occl_max},
              {"size_min", size_min},
              {"size_max", size_max},
              {"speed_min", speed_min},
              {"speed_max", speed_max},
              {"near_spawn_frac", near_spawn_frac},
              {"near_spawn_radius", near_spawn_radius},
              {"accel_noise", accel_noise},
              {"obs_noise", obs_noise},
              {"region_scale", region_scale},
              {"grid_h", grid_h},
              {"grid_w", grid_w},
              {"app_channels", app_channels}};
    return j.dump();
}

SceneConfig SceneConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    SceneConfig c;
    c.episode_len = j.value("episode_len", c.episode_len);
    c.n_distractors = j.value("n_distractors", c.n_distractors);
    c.eps_app = j.value("eps_app", c.eps_app);
    c.eps_app_max = j.value("eps_app_max", c.eps_app_max);
    c.occlusion_prob = j.value("occlusion_prob", c.occlusion_prob);
    c.occl_min = j.value("occl_min", c.occl_min);
    c.occl_max = j.value("occl_max", c.occl_max);
    c.size_min = j.value("size_min", c.size_min);
    c.size_max = j.value("size_max", c.size_max);
    c.speed_min = j.value("speed_min", c.speed_min);
    c.speed_max = j.value("speed_max", c.speed_max);
    c.near_spawn_frac = j.value("near_spawn_frac", c.near_spawn_frac);
    c.near_spawn_radius = j.value("near_spawn_radius", c.near_spawn_radius);
    c.accel_noise = j.value("accel_noise", c.accel_noise);
    c.obs_noise = j.value("obs_noise", c.obs_noise);
    c.region_scale = j.value("region_scale", c.region_scale);
    c.grid_h = j.value("grid_h", c.grid_h);
    c.grid_w = j.value("grid_w", c.grid_w);
    c.app_channels = j.value("app_channels", c.app_channels);
    return c;
}

namespace {

Tensor unit_appearance(int channels, Rng& rng) {
    Tensor a(1, static_cast<std::size_t>(channels));
    double norm2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        norm2 += a[i] * a[i];
    }
    const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-12));
    a.scale_inplace(inv);
    return a;
}

Entity random_entity(const SceneConfig& cfg, Rng& rng, Tensor appearance) {
    Entity e;
    e.w = rng.uniform(cfg.size_min, cfg.size_max);
    e.h = rng.uniform(cfg.size_min, cfg.size_max);
    e.px = rng.uniform(e.w / 2, 1.0 - e.w / 2);
    e.py = rng.uniform(e.h / 2, 1.0 - e.h / 2);
    const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
    const double heading = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    e.vx = speed * std::cos(heading);
    e.vy = speed * std::sin(heading);
    e.appearance = std::move(appearance);
    return e;
}

void reflect_axis(double& p, double& v, double half_extent) {
    const double lo = half_extent;
    const double hi = 1.0 - half_extent;
    if (hi <= lo) {  // entity larger than arena; pin to center
        p = 0.5;
        v = 0.0;
        return;
    }
    // Fold the coordinate back into [lo, hi], flipping velocity per bounce.
    while (p < lo || p > hi) {
        if (p < lo) {
            p = 2.0 * lo - p;
            v = -v;
        } else {
            p = 2.0 * hi - p;
            v = -v;
        }
    }
}

void step_entity(Entity& e, const SceneConfig& cfg, Rng& rng) {
    e.vx += cfg.accel_noise * rng.normal();
    e.vy += cfg.accel_noise * rng.normal();
    e.px += e.vx;
    e.py += e.vy;
    reflect_axis(e.px, e.vx, e.w / 2);
    reflect_axis(e.py, e.vy, e.h / 2);
}

}  // namespace

Scene::Scene(const SceneConfig& config, std::uint64_t seed) : cfg(config), rng(seed) {
    Tensor target_app = unit_appearance(cfg.app_channels, rng);
    double eps = cfg.eps_app;
    if (cfg.eps_app_max >= cfg.eps_app) eps = rng.uniform(cfg.eps_app, cfg.eps_app_max);

    target = random_entity(cfg, rng, target_app);
    for (int i = 0; i < cfg.n_distractors; ++i) {
        Tensor app = target_app;
        if (eps > 0.0) {
            Tensor noise = unit_appearance(cfg.app_channels, rng);
            double norm2 = 0.0;
            for (std::size_t j = 0; j < app.size(); ++j) {
                app[j] += eps * noise[j];
                norm2 += app[j] * app[j];
            }
            app.scale_inplace(1.0 / std::sqrt(std::max(norm2, 1e-12)));
        }
        Entity d = random_entity(cfg, rng, std::move(app));
        if (rng.uniform() < cfg.near_spawn_frac) {
            // Crossing spawn: start separated, then intercept the target's
            // constant-velocity path mid-episode so vision sees a transient
            // identity confusion that the trajectory history can resolve.
            const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            const double rad = rng.uniform(0.25, 0.5);
            d.px = std::clamp(target.px + rad * std::cos(ang), d.w / 2, 1.0 - d.w / 2);
            d.py = std::clamp(target.py + rad * std::sin(ang), d.h / 2, 1.0 - d.h / 2);
            const double t_hit = rng.uniform(0.2, 0.7) * cfg.episode_len;
            const double ix = std::clamp(target.px + target.vx * t_hit, 0.1, 0.9);
            const double iy = std::clamp(target.py + target.vy * t_hit, 0.1, 0.9);
            const double dist = std::hypot(ix - d.px, iy - d.py);
            const double speed =
                std::clamp(dist / t_hit, cfg.speed_min, cfg.speed_max * 1.5);
            const double heading = std::atan2(iy - d.py, ix - d.px);
            d.vx = speed * std::cos(heading);
            d.vy = speed * std::sin(heading);
        }
        distractors.push_back(d);
    }

    if (rng.bernoulli(cfg.occlusion_prob) && cfg.episode_len > cfg.occl_min + 2) {
        const int len = cfg.occl_min +
                        static_cast<int>(rng.below(
                            static_cast<std::uint64_t>(cfg.occl_max - cfg.occl_min + 1)));
        const int latest = std::max(cfg.episode_len - len - 1, 1);
        const int start = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(latest)));
        occlusions.emplace_back(start, std::min(start + len, cfg.episode_len));
    }
}

bool Scene::target_occluded() const {
    for (const auto& [s, e] : occlusions)
        if (frame >= s && frame < e) return true;
    return false;
}

void Scene::step() {
    step_entity(target, cfg, rng);
    for (Entity& d : distractors) step_entity(d, cfg, rng);
    ++frame;
}

Episode simulate_episode(const SceneConfig& cfg, std::uint64_t seed) {
    Scene scene(cfg, seed);
    Episode ep;
    ep.cfg = cfg;
    ep.seed = seed;
    ep.target_appearance = scene.target.appearance;
    for (const Entity& d : scene.distractors) ep.distractor_appearances.push_back(d.appearance);

    for (int f = 0; f < cfg.episode_len; ++f) {
        ep.gt.push_back(scene.target.box());
        std::vector<Box> dboxes;
        for (const Entity& d : scene.distractors) dboxes.push_back(d.box());
        ep.distractor_boxes.push_back(std::move(dboxes));
        ep.occluded.push_back(scene.target_occluded());
        scene.step();
    }
    return ep;
}

namespace {

double overlap_1d(double a1, double a2, double b1, double b2) {
    return std::max(0.0, std::min(a2, b2) - std::max(a1, b1));
}

void splat_entity(Tensor& obs, const Box& ebox, const Tensor& appearance,
                  const SearchRegion& region, int gh, int gw) {
    const double ox = region.cx - 0.5 * region.side;
    const double oy = region.cy - 0.5 * region.side;
    const double cw = region.side / gw;
    const double ch = region.side / gh;
    const double inv_cell = 1.0 / (cw * ch);

    // Cell index range the entity can touch.
    const int c0 = std::max(0, static_cast<int>(std::floor((ebox.x1 - ox) / cw)));
    const int c1 = std::min(gw - 1, static_cast<int>(std::floor((ebox.x2 - ox) / cw)));
    const int r0 = std::max(0, static_cast<int>(std::floor((ebox.y1 - oy) / ch)));
    const int r1 = std::min(gh - 1, static_cast<int>(std::floor((ebox.y2 - oy) / ch)));

    for (int r = r0; r <= r1; ++r) {
        const double cy1 = oy + r * ch;
        const double hy = overlap_1d(ebox.y1, ebox.y2, cy1, cy1 + ch);
        if (hy <= 0.0) continue;
        for (int c = c0; c <= c1; ++c) {
            const double cx1 = ox + c * cw;
            const double hx = overlap_1d(ebox.x1, ebox.x2, cx1, cx1 + cw);
            if (hx <= 0.0) continue;
            const double wgt = hx * hy * inv_cell;
            double* cell = obs.data() + (static_cast<std::size_t>(r) * gw + c) * obs.cols();
            for (std::size_t k = 0; k < obs.cols(); ++k) cell[k] += wgt * appearance[k];
        }
    }
}

}  // namespace

Tensor render_observation(const Episode& ep, int frame, const SearchRegion& region,
                          bool with_noise) {
    if (frame < 0 || frame >= ep.length()) throw std::out_of_range("render: bad frame index");
    const int gh = ep.cfg.grid_h;
    const int gw = ep.cfg.grid_w;
    Tensor obs(static_cast<std::size_t>(gh) * gw, static_cast<std::size_t>(ep.cfg.app_channels));

    if (!ep.occluded[static_cast<std::size_t>(frame)])
        splat_entity(obs, ep.gt[static_cast<std::size_t>(frame)], ep.target_appearance, region,
                     gh, gw);
    for (std::size_t d = 0; d < ep.distractor_appearances.size(); ++d)
        splat_entity(obs, ep.distractor_boxes[static_cast<std::size_t>(frame)][d],
                     ep.distractor_appearances[d], region, gh, gw);

    if (with_noise && ep.cfg.obs_noise > 0.0) {
        Rng rng(Rng::derive(ep.seed, static_cast<std::uint64_t>(frame), 0x0b5));
        for (std::size_t i = 0; i < obs.size(); ++i) obs[i] += ep.cfg.obs_noise * rng.normal();
    }
    return obs;
}

bool inject_appearance_blob(Tensor& obs, const Episode& ep, int frame,
                            const SearchRegion& region, Rng& rng, int max_tries) {
    const int gh = ep.cfg.grid_h;
    const int gw = ep.cfg.grid_w;
    const Box& gt = ep.gt[static_cast<std::size_t>(frame)];
    const double ox = region.cx - 0.5 * region.side;
    const double oy = region.cy - 0.5 * region.side;
    const double cw = region.side / gw;
    const double ch = region.side / gh;

    for (int attempt = 0; attempt < max_tries; ++attempt) {
        const double bx = ox + rng.uniform(0.0, region.side - gt.width());
        const double by = oy + rng.uniform(0.0, region.side - gt.height());
        const Box blob{bx, by, bx + gt.width(), by + gt.height()};

        // Reject any placement whose cells touch ground-truth cells.
        const auto cell_range = [&](double lo, double hi, double o, double csz, int n) {
            const int a = std::max(0, static_cast<int>(std::floor((lo - o) / csz)));
            const int b = std::min(n - 1, static_cast<int>(std::floor((hi - o) / csz)));
            return std::pair<int, int>{a, b};
        };
        const auto [bc0, bc1] = cell_range(blob.x1, blob.x2, ox, cw, gw);
        const auto [br0, br1] = cell_range(blob.y1, blob.y2, oy, ch, gh);
        const auto [gc0, gc1] = cell_range(gt.x1, gt.x2, ox, cw, gw);
        const auto [gr0, gr1] = cell_range(gt.y1, gt.y2, oy, ch, gh);
        const bool cells_overlap = bc0 <= gc1 && gc0 <= bc1 && br0 <= gr1 && gr0 <= br1;
        if (cells_overlap) continue;

        splat_entity(obs, blob, ep.target_appearance, region, gh, gw);
        return true;
    }
    return false;
}

std::pair<int, int> argmax_with_tiebreak(const Tensor& score_map, int grid_w) {
    if (score_map.size() == 0) throw std::invalid_argument("argmax: empty map");
    std::size_t best = 0;
    for (std::size_t i = 1; i < score_map.size(); ++i)
        if (score_map[i] > score_map[best]) best = i;
    return {static_cast<int>(best) / grid_w, static_cast<int>(best) % grid_w};
}

}  // namespace mpt
