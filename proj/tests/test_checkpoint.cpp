// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include <doctest.h>

#include <filesystem>

#include "mptrack/checkpoint.hpp"
#include "mptrack/losses.hpp"
#include "mptrack/rng.hpp"

using namespace mpt;

TEST_CASE("checkpoint round-trip is bit-exact") {
    const auto dir = std::filesystem::temp_directory_path() / "mpt_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string prefix = (dir / "params").string();

    Rng rng(55);
    ParamStore a;
    Parameter& p1 = a.create("m.w", Tensor::from_rows(2, 3, {1.5, -2.25, 1e-300, 0.1, 7.0, -0.0}));
    Parameter& p2 = a.create("m.b", Tensor::from_rows(1, 3, {rng.normal(), rng.normal(),
                                                             rng.normal()}),
                             true);
    save_checkpoint(prefix, a, "{\"tag\": 3}");
    CHECK(checkpoint_exists(prefix));

    ParamStore b;
    b.create("m.w", Tensor(2, 3));
    b.create("m.b", Tensor(1, 3));
    const std::string cfg = load_checkpoint(prefix, b);
    CHECK(cfg.find("\"tag\"") != std::string::npos);
    CHECK(b.find("m.w")->value.bit_equal(p1.value));
    CHECK(b.find("m.b")->value.bit_equal(p2.value));
    CHECK(a.checksum() == b.checksum());

    // Filtered load only touches matching records.
    ParamStore c;
    c.create("m.w", Tensor(2, 3));
    c.create("m.b", Tensor(1, 3));
    load_checkpoint(prefix, c, "m.b");
    CHECK(c.find("m.b")->value.bit_equal(p2.value));
    CHECK(!c.find("m.w")->value.bit_equal(p1.value));

    // Shape mismatch is an error.
    ParamStore d;
    d.create("m.w", Tensor(3, 2));
    d.create("m.b", Tensor(1, 3));
    CHECK_THROWS(load_checkpoint(prefix, d));

    std::filesystem::remove_all(dir);
}

TEST_CASE("missing checkpoint reported") {
    CHECK(!checkpoint_exists("/nonexistent/prefix"));
    ParamStore s;
    CHECK_THROWS(load_checkpoint("/nonexistent/prefix", s));
}

TEST_CASE("checkpoint restores a model built with a different init seed") {
    // Every piece of learned or drawn state must ride in the checkpoint: a
    // model reconstructed from different init randomness and then loaded has
    // to produce bit-identical outputs.
    ModelConfig mc;
    mc.traj_len = 4;
    mc.channels = 16;
    mc.grid_h = 4;
    mc.grid_w = 4;
    mc.app_channels = 4;
    mc.decoder_mlp_hidden = 16;
    mc.head_hidden = 16;
    mc.size_head_hidden = 8;
    mc.init_seed = 5;
    MptModel a(mc);

    const auto dir = std::filesystem::temp_directory_path() / "mpt_ckpt_model";
    std::filesystem::create_directories(dir);
    const std::string prefix = (dir / "m").string();
    save_checkpoint(prefix, a.params(), mc.to_json());

    ModelConfig mc2 = mc;
    mc2.init_seed = 999;
    MptModel b(mc2);
    load_checkpoint(prefix, b.params());

    SceneConfig sc;
    sc.grid_h = 4;
    sc.grid_w = 4;
    sc.app_channels = 4;
    sc.episode_len = 10;
    const Episode ep = simulate_episode(sc, 3);
    const SearchRegion region = region_around(ep.gt[5], sc.region_scale, 0.05);
    const Tensor obs = render_observation(ep, 5, region);
    std::vector<Box> hist(ep.gt.begin(), ep.gt.begin() + 5);
    const Trajectory win = normalize_to_region(window_from_history(hist, 4), region);

    Tape ta, tb;
    const auto oa = a.joint_forward(ta, obs, ep.target_appearance, win);
    const auto ob = b.joint_forward(tb, obs, ep.target_appearance, win);
    CHECK(ta.value(oa.box).bit_equal(tb.value(ob.box)));
    CHECK(ta.value(oa.score).bit_equal(tb.value(ob.score)));
    CHECK(oa.weight_value == ob.weight_value);
    std::filesystem::remove_all(dir);
}
