#include <cmath>

#include <gtest/gtest.h>

#include "scio/dataset.hpp"
#include "scio/infer.hpp"
#include "support.hpp"

using namespace scio;
using scio::testing::exhaustive_min;

namespace {

constexpr GridSize kGrid{64, 48};

void expect_trace_invariants(const SearchResult& r, double x0, double y0, const SearchConfig& sc) {
    EXPECT_LE(r.trace.evaluations(), sc.steps);
    double last = r.trace.initial_objective;
    for (const auto& p : r.trace.probes) {
        EXPECT_LE(std::hypot(p.dx, p.dy), sc.delta);
        if (p.accepted) {
            EXPECT_LT(p.objective, last);
            last = p.objective;
        }
    }
    EXPECT_EQ(r.trace.final_objective, last);
    EXPECT_LE(r.trace.final_objective, r.trace.initial_objective);
    EXPECT_LE(std::hypot(r.x - x0, r.y - y0), sc.delta);
    const auto best = r.trace.best_so_far();
    for (std::size_t i = 1; i < best.size(); ++i) EXPECT_LE(best[i], best[i - 1]);
}

Tensor<float> blank_features() { return Tensor<float>(kFeatureChannels, kGrid, 0.0f); }

TrainResult untrained_models(const SkeletonSpec& s, std::uint64_t seed) {
    TrainResult r;
    for (const auto& g : s.groups) r.groups.push_back(g.name);
    const ArchConfig arch{3 + kFeatureChannels, {4}, 1};
    for (std::size_t i = 0; i < s.groups.size(); ++i) {
        NetPair np;
        np.phi = init_params<float>(arch, seed + 2 * i);
        np.gamma = init_params<float>(arch, seed + 2 * i + 1);
        r.nets.push_back(std::move(np));
    }
    return r;
}

}  // namespace

TEST(Objective, StubReturningAnchorIsZeroEverywhere) {
    const GaussianParams g;
    const auto ha = encode_keypoint<float>({20, 20, 1, Visibility::Visible}, g, kGrid);
    const auto hb = encode_keypoint<float>({25, 22, 1, Visibility::Visible}, g, kGrid);
    const auto hc = encode_keypoint<float>({30, 24, 1, Visibility::Visible}, g, kGrid);
    auto gamma = [&](const Tensor<float>&) {
        Tensor<float> y(1, kGrid);
        y.set_channel<float>(0, ha.values());
        return y;
    };
    const auto f = blank_features();
    for (double x : {0.0, 10.5, 40.25, 63.0})
        EXPECT_EQ(objective(gamma, ha, hb, hc, f, {x, 12.0, 1, Visibility::Visible}, g), 0.0);
}

TEST(Objective, PureAndSensitiveToCandidate) {
    const GaussianParams g;
    const auto net = init_params<float>(ArchConfig{11, {4}, 1}, 3);
    const auto ha = encode_keypoint<float>({20, 20, 1, Visibility::Visible}, g, kGrid);
    const auto hb = encode_keypoint<float>({25, 22, 1, Visibility::Visible}, g, kGrid);
    const auto hc = encode_keypoint<float>({30, 24, 1, Visibility::Visible}, g, kGrid);
    const auto f = blank_features();
    const Keypoint c{33.5, 25.0, 1, Visibility::Visible};
    EXPECT_EQ(objective(net, ha, hb, hc, f, c, g), objective(net, ha, hb, hc, f, c, g));
    VerificationObjective<ConvNetParams<float>> obj(net, ha, hb, hc, f, g);
    const double first = obj(33.5, 25.0);
    obj(10.0, 10.0);
    EXPECT_EQ(obj(33.5, 25.0), first);
    EXPECT_NE(obj(10.0, 10.0), first);
    try {
        objective(net, ha, hb, hc, f, {-1.0, 3.0, 1, Visibility::Visible}, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::OutOfBounds);
    }
}

TEST(Search, StationaryStartIsReturned) {
    const SearchConfig sc;
    auto f = [](double x, double y) { return (x - 30) * (x - 30) + (y - 20) * (y - 20); };
    const auto r = compass_search(f, 30.0, 20.0, sc, kGrid);
    EXPECT_EQ(r.x, 30.0);
    EXPECT_EQ(r.y, 20.0);
    ASSERT_GE(r.trace.evaluations(), 8);
    for (const auto& p : r.trace.probes) EXPECT_FALSE(p.accepted);
    // one failed compass round per step size: 4, 2, 1, 0.5, 0.25
    EXPECT_EQ(r.trace.evaluations(), 40);
    expect_trace_invariants(r, 30, 20, sc);
}

TEST(Search, QuadraticThreePixelsEast) {
    const SearchConfig sc;
    auto f = [](double x, double y) { return (x - 33) * (x - 33) + (y - 20) * (y - 20); };
    const auto r = compass_search(f, 30.0, 20.0, sc, kGrid);
    EXPECT_LT(std::hypot(r.x - 33.0, r.y - 20.0), 0.5);
    EXPECT_LE(r.trace.final_objective, exhaustive_min(f, 30, 20, sc.delta, kGrid) + 0.25);
    expect_trace_invariants(r, 30, 20, sc);
}

TEST(Search, MinimumOutsideDiscStaysOnBoundary) {
    const SearchConfig sc;
    auto f = [](double x, double y) { return (x - 50) * (x - 50) + (y - 20) * (y - 20); };
    const auto r = compass_search(f, 30.0, 20.0, sc, kGrid);
    EXPECT_LE(std::hypot(r.x - 30.0, r.y - 20.0), sc.delta);
    EXPECT_GT(r.x, 37.0);
    expect_trace_invariants(r, 30, 20, sc);
}

TEST(Search, ClippedToGrid) {
    const SearchConfig sc;
    auto f = [](double x, double y) { return x + y; };
    const auto r = compass_search(f, 2.0, 1.0, sc, kGrid);
    EXPECT_GE(r.x, 0.0);
    EXPECT_GE(r.y, 0.0);
    for (const auto& p : r.trace.probes) {
        EXPECT_GE(2.0 + p.dx, 0.0);
        EXPECT_GE(1.0 + p.dy, 0.0);
    }
    EXPECT_NEAR(r.x + r.y, 0.0, 0.5);
}

TEST(Search, MatchesExhaustiveGridOnRandomSmoothObjectives) {
    Rng rng(2024);
    const SearchConfig sc;
    int good = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = scio::testing::smooth_trial(rng, trial);
        const auto r = compass_search(t.f, t.x0, t.y0, sc, kGrid);
        if (scio::testing::near_oracle(r.trace.final_objective, exhaustive_min(t.f, t.x0, t.y0, sc.delta, kGrid))) ++good;
        expect_trace_invariants(r, t.x0, t.y0, sc);
    }
    EXPECT_GE(good, 190);
}

TEST(Search, RejectsBadConfigAndStart) {
    SearchConfig sc;
    sc.steps = 0;
    auto f = [](double, double) { return 0.0; };
    EXPECT_THROW(compass_search(f, 5, 5, sc, kGrid), Error);
    sc = {};
    sc.shrink = 1.0;
    EXPECT_THROW(compass_search(f, 5, 5, sc, kGrid), Error);
    try {
        compass_search(f, 64.0, 5, SearchConfig{}, kGrid);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::OutOfBounds);
    }
}

TEST(Search, BudgetHonoured) {
    SearchConfig sc;
    sc.steps = 5;
    auto f = [](double x, double) { return -x; };
    const auto r = compass_search(f, 30.0, 20.0, sc, kGrid);
    EXPECT_EQ(r.trace.evaluations(), 5);
}

TEST(Search, DefaultsAndFirstStep) {
    const SearchConfig sc;
    EXPECT_EQ(sc.delta, 8.0);
    EXPECT_EQ(sc.steps, 50);
    EXPECT_EQ(sc.confidence_gate, 0.5);
    EXPECT_EQ(sc.first_step(), 4.0);
}

TEST(Refine, ConfidentTerminalsAreLeftAlone) {
    const auto skel = coco17_preset();
    DatasetConfig cfg;
    cfg.render.corruption = CorruptionConfig::none();
    const auto s = generate_sample(3, 0, cfg);
    const auto models = untrained_models(skel, 5);
    RefineOptions opt;
    opt.search.confidence_gate = 0.5;
    const auto r = refine_pose(models, s.obs_heatmaps, s.feature_map, skel, opt);
    EXPECT_EQ(r.keypoints, decode_all(s.obs_heatmaps));
    for (const auto& g : r.groups) EXPECT_FALSE(g.refined);
}

TEST(Refine, RefineAllStaysInsideDisc) {
    const auto skel = coco17_preset();
    DatasetConfig cfg;
    cfg.render.corruption = CorruptionConfig::none();
    const auto models = untrained_models(skel, 7);
    RefineOptions opt;
    opt.search.confidence_gate = 1.0;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto s = generate_sample(3, i, cfg);
        const auto r = refine_pose(models, s.obs_heatmaps, s.feature_map, skel, opt);
        for (const auto& g : r.groups) {
            ASSERT_TRUE(g.refined);
            EXPECT_LE(std::hypot(g.result.x - g.init.x, g.result.y - g.init.y), opt.search.delta);
            EXPECT_LE(g.trace.final_objective, g.trace.initial_objective);
            const int t = skel.groups[static_cast<std::size_t>(g.group)].terminal;
            EXPECT_DOUBLE_EQ(g.result.confidence,
                             clamp_unit(sample_bilinear(s.obs_heatmaps.heatmap(t), g.result.x, g.result.y)));
        }
        for (int k = 0; k < skel.num_keypoints(); ++k)
            if (!skel.is_terminal(k)) {
                EXPECT_EQ(r.keypoints[static_cast<std::size_t>(k)], decode_subpixel(s.obs_heatmaps.heatmap(k)));
            }
    }
}

TEST(Refine, MissingModelRejected) {
    const auto skel = coco17_preset();
    DatasetConfig cfg;
    const auto s = generate_sample(3, 0, cfg);
    TrainResult empty;
    try {
        refine_pose(empty, s.obs_heatmaps, s.feature_map, skel, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingModel);
    }
    auto partial = untrained_models(skel, 1);
    partial.groups[3] = "tail";
    EXPECT_THROW(refine_pose(partial, s.obs_heatmaps, s.feature_map, skel, {}), Error);
}

TEST(Refine, CanvasMapping) {
    const std::vector<Keypoint> kps{{16, 12, 0.5, Visibility::Visible}};
    const auto c = to_canvas(kps, kGrid, {256, 192});
    EXPECT_EQ(c[0].x, 64.0);
    EXPECT_EQ(c[0].y, 48.0);
    EXPECT_EQ(c[0].confidence, 0.5);
}
