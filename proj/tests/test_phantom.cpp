#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "mrc/phantom.hpp"

using namespace mrc;
using namespace mrc::test;

namespace {

PhantomConfig small_cfg(uint64_t seed = 1) {
    PhantomConfig cfg;
    cfg.width = 64;
    cfg.height = 64;
    cfg.amplitude_px = 3.0;
    cfg.contrasted_frames = 4;
    cfg.live_frames = 3;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_SUITE("phantom") {

TEST_CASE("zero amplitude: all truth flows zero, frame 0 equals reference") {
    PhantomConfig cfg = small_cfg();
    cfg.amplitude_px = 0.0;
    PhantomDataset ds = generate_phantom(cfg);
    for (const auto& ff : ds.truth_flows)
        for (const auto& v : ff.d) {
            CHECK(v.x == 0.0);
            CHECK(v.y == 0.0);
        }
    const Frame& ref = ds.sequence.reference();
    const Frame& f0 = ds.sequence.frames[0];
    REQUIRE(f0.pixels.size() == ref.pixels.size());
    for (size_t i = 0; i < ref.pixels.size(); ++i) CHECK(f0.pixels[i] == ref.pixels[i]);
}

TEST_CASE("displacement formula: gamma=1 at t=T/2 is uniform (0, 0.4A sin(pi+phi))") {
    PhantomConfig cfg = small_cfg();
    cfg.gamma = 1.0;
    double t = cfg.period_frames / 2.0;
    double expect_y = 0.4 * cfg.amplitude_px * std::sin(M_PI + cfg.phase);
    for (double y : {0.0, 17.0, 63.0})
        for (double x : {0.0, 31.0}) {
            Vec2 d = phantom_displacement(cfg, x, y, t);
            CHECK(std::abs(d.x) < 1e-12);
            CHECK(d.y == doctest::Approx(expect_y).epsilon(1e-12));
        }
}

TEST_CASE("displacement formula: gamma=0, y=h/2, t=T/4 gives horizontal A/2") {
    PhantomConfig cfg = small_cfg();
    cfg.gamma = 0.0;
    Vec2 d = phantom_displacement(cfg, 10.0, cfg.height / 2.0, cfg.period_frames / 4.0);
    CHECK(d.x == doctest::Approx(cfg.amplitude_px / 2.0).epsilon(1e-12));
}

TEST_CASE("amplitude exceeding a quarter frame is a config error") {
    PhantomConfig cfg = small_cfg();
    cfg.amplitude_px = 16.0; // min(64,64)/4
    CHECK_THROWS_AS(generate_phantom(cfg), ConfigError);
}

TEST_CASE("gamma outside [0,1] and too few contrasted frames are config errors") {
    PhantomConfig bad = small_cfg();
    bad.gamma = 1.5;
    CHECK_THROWS_AS(generate_phantom(bad), ConfigError);
    bad = small_cfg();
    bad.contrasted_frames = 2;
    CHECK_THROWS_AS(generate_phantom(bad), ConfigError);
}

TEST_CASE("gt centerlines equal the displaced, rounded reference centerline") {
    PhantomDataset ds = generate_phantom(small_cfg());
    int n_frames = static_cast<int>(ds.sequence.frames.size());
    int n_contrasted = ds.sequence.contrasted_count();
    REQUIRE(static_cast<int>(ds.gt_centerlines.size()) == n_frames - n_contrasted);
    for (size_t q = 0; q < ds.gt_centerlines.size(); ++q) {
        const FlowField& ff = ds.truth_flows[n_contrasted + q];
        VesselMask expect = make_mask(ff.width, ff.height, MaskKind::Centerline);
        for (int y = 0; y < ff.height; ++y)
            for (int x = 0; x < ff.width; ++x) {
                if (!ds.reference_centerline.at(x, y)) continue;
                const Vec2& d = ff.at(x, y);
                long tx = std::lround(x + d.x), ty = std::lround(y + d.y);
                if (expect.in_bounds(static_cast<int>(tx), static_cast<int>(ty)))
                    expect.set(static_cast<int>(tx), static_cast<int>(ty));
            }
        CHECK(ds.gt_centerlines[q].bits == expect.bits);
    }
}

TEST_CASE("photometric consistency: live frame at p+d reproduces reference texture") {
    PhantomConfig cfg = small_cfg();
    PhantomDataset ds = generate_phantom(cfg);
    int live0 = ds.sequence.contrasted_count();
    const Frame& live = ds.sequence.frames[live0];
    const FlowField& ff = ds.truth_flows[live0];
    // the reference frame darkens vessels with a smooth edge profile that
    // extends ~1 px beyond the mask, so compare texture only where the
    // dilated mask is clear
    VesselMask clear_of_vessels = dilate(ds.reference_mask, 3);
    double worst = 0.0;
    int n = 0;
    for (int y = 8; y < cfg.height - 8; ++y)
        for (int x = 8; x < cfg.width - 8; ++x) {
            if (clear_of_vessels.at(x, y)) continue; // texture-only comparison
            const Vec2& d = ff.at(x, y);
            double sx = x + d.x, sy = y + d.y;
            if (sx < 1 || sy < 1 || sx > cfg.width - 2 || sy > cfg.height - 2) continue;
            double err = std::abs(live.sample(sx, sy) - ds.sequence.reference().at(x, y));
            worst = std::max(worst, err);
            ++n;
        }
    REQUIRE(n > 500);
    CHECK(worst <= 0.02);
}

TEST_CASE("centerline is a subset of the mask; flows zero at the reference frame") {
    PhantomDataset ds = generate_phantom(small_cfg());
    for (int y = 0; y < ds.reference_mask.height; ++y)
        for (int x = 0; x < ds.reference_mask.width; ++x)
            if (ds.reference_centerline.at(x, y)) CHECK(ds.reference_mask.at(x, y) == 1);
    const FlowField& ref_flow = ds.truth_flows[ds.sequence.reference_index];
    for (const auto& v : ref_flow.d) {
        CHECK(v.x == 0.0);
        CHECK(v.y == 0.0);
    }
}

TEST_CASE("determinism and seed sensitivity") {
    PhantomDataset a = generate_phantom(small_cfg(5));
    PhantomDataset b = generate_phantom(small_cfg(5));
    PhantomDataset c = generate_phantom(small_cfg(6));
    CHECK(a.sequence.frames[0].pixels == b.sequence.frames[0].pixels);
    CHECK(a.sequence.frames[0].pixels != c.sequence.frames[0].pixels);
}

TEST_CASE("save/load round-trip of flow fields and config") {
    auto dir = temp_dir("phantom_io");
    PhantomConfig cfg = small_cfg();
    PhantomDataset ds = generate_phantom(cfg);
    save_phantom(ds, dir);

    FluoroSequence seq = load_sequence(dir, dir / "manifest.txt");
    CHECK(seq.frames.size() == ds.sequence.frames.size());
    CHECK(seq.contrasted_count() == ds.sequence.contrasted_count());

    FlowField ff = load_flow_field(dir / "truth_flow_0005.f64");
    REQUIRE(ff.width == cfg.width);
    REQUIRE(ff.height == cfg.height);
    const FlowField& orig = ds.truth_flows[5];
    for (size_t i = 0; i < orig.d.size(); ++i) {
        CHECK(ff.d[i].x == orig.d[i].x);
        CHECK(ff.d[i].y == orig.d[i].y);
    }

    {
        std::ofstream pc(dir / "phantom_config.txt");
        pc << "# phantom settings\nwidth=64\nheight=64\namplitude_px=3\n"
              "contrasted_frames=4\nlive_frames=3\nseed=1\n";
    }
    PhantomConfig cfg2 = phantom_config_from_file(dir / "phantom_config.txt");
    CHECK(cfg2.amplitude_px == cfg.amplitude_px);
    CHECK(cfg2.seed == cfg.seed);
    CHECK(cfg2.live_frames == cfg.live_frames);
    CHECK_THROWS_AS([&] {
        std::ofstream pc(dir / "bad.txt");
        pc << "no_such_key=1\n";
        pc.close();
        phantom_config_from_file(dir / "bad.txt");
    }(), ConfigError);
}

} // TEST_SUITE
