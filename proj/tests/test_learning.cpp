#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "belpm/learning.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace belpm;

namespace {

EmbeddedDataset henon_embed(std::size_t n_pairs, std::size_t horizon = 1, double noise = 0.0,
                            std::uint64_t seed = 0) {
    TimeSeries s = generate_henon(HenonParams{}, 900 + n_pairs + 2 + horizon);
    s = add_noise(s, noise, seed);
    TimeSeries w;
    w.values.assign(s.values.begin() + 900, s.values.end());
    const auto ds = embed(w, 3, 1, horizon);
    return split(ds, n_pairs, ds.size() - n_pairs, 0).train;
}

// Points on a circle padded with two constant coordinates, so that every
// input shares the same max/min; target cos(theta).
EmbeddedDataset circle(std::size_t n) {
    EmbeddedDataset ds;
    ds.dim = 4;
    for (std::size_t j = 0; j < n; ++j) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
        ds.inputs.push_back({std::cos(th), std::sin(th), 10.0, -10.0});
        ds.targets.push_back(std::cos(th));
    }
    return ds;
}

SdBatch full_batch(const NeighborCache& cache, const Vector& targets) {
    return {cache, targets, PunishmentMode::Supervised, std::nullopt, std::nullopt};
}

}  // namespace

TEST(HeuristicInit, EquidistantSamples) {
    const double c = 2.5;
    EmbeddedDataset ds;
    for (std::size_t i = 0; i < 6; ++i) {
        Vector x(6, 0.0);
        x[i] = c;
        ds.inputs.push_back(x);
        ds.targets.push_back(static_cast<double>(i));
    }
    const auto m = make_model(ds, 2, 3);
    const auto p = heuristic_b_init(m);
    const double expect = 1.0 / (c * std::sqrt(2.0) + kKernelEps);
    for (double b : p.b_a) EXPECT_NEAR(b, expect, 1e-15);
    for (double b : p.b_o) EXPECT_NEAR(b, expect, 1e-15);
}

TEST(HeuristicInit, ScalesInverselyWithInputs) {
    std::mt19937_64 rng(2);
    const auto ds = testutil::random_dataset(rng, 40, 3);
    auto scaled = ds;
    for (auto& x : scaled.inputs)
        for (double& v : x) v *= 4.0;
    const auto p1 = heuristic_b_init(make_model(ds, 3, 4));
    const auto p2 = heuristic_b_init(make_model(scaled, 3, 4));
    for (std::size_t m = 0; m < 3; ++m) EXPECT_NEAR(p2.b_a[m] * 4.0 / p1.b_a[m], 1.0, 1e-9);
    for (std::size_t m = 0; m < 4; ++m) EXPECT_NEAR(p2.b_o[m] * 4.0 / p1.b_o[m], 1.0, 1e-9);
}

TEST(HeuristicInit, MatchesDistanceMatrixOracle) {
    const auto ds = henon_embed(10);
    const std::size_t k_a = 3, k_o = 4;
    const auto p = heuristic_b_init(make_model(ds, k_a, k_o));
    // brute-force distance matrix, sorted rows without the diagonal
    Vector mean_bl(k_a, 0.0), mean_mo(k_o, 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Vector dbl, dmo;
        const auto& a = ds.inputs[i];
        for (std::size_t j = 0; j < ds.size(); ++j) {
            if (i == j) continue;
            const auto& b = ds.inputs[j];
            double ss = 0.0;
            for (int t = 0; t < 3; ++t) ss += (a[t] - b[t]) * (a[t] - b[t]);
            const double da = std::max({a[0], a[1], a[2]}) - std::max({b[0], b[1], b[2]});
            const double di = std::min({a[0], a[1], a[2]}) - std::min({b[0], b[1], b[2]});
            dmo.push_back(std::sqrt(ss));
            dbl.push_back(std::sqrt(ss) + std::sqrt(da * da + di * di));
        }
        std::sort(dbl.begin(), dbl.end());
        std::sort(dmo.begin(), dmo.end());
        for (std::size_t m = 0; m < k_a; ++m) mean_bl[m] += dbl[m] / 10.0;
        for (std::size_t m = 0; m < k_o; ++m) mean_mo[m] += dmo[m] / 10.0;
    }
    for (std::size_t m = 0; m < k_a; ++m) EXPECT_NEAR(p.b_a[m], 1.0 / (mean_bl[m] + kKernelEps), 1e-9);
    for (std::size_t m = 0; m < k_o; ++m) EXPECT_NEAR(p.b_o[m], 1.0 / (mean_mo[m] + kKernelEps), 1e-9);
}

TEST(BatchResponses, ConstantTargets) {
    std::mt19937_64 rng(6);
    auto ds = testutil::random_dataset(rng, 15, 3);
    std::fill(ds.targets.begin(), ds.targets.end(), 2.0);
    auto m = make_model(ds, 3, 4);
    const auto r = batch_responses(m);
    for (std::size_t j = 0; j < ds.size(); ++j) {
        EXPECT_NEAR(r.r_a[j], 2.0, 1e-14);
        EXPECT_NEAR(r.r_o[j], 0.0, 1e-14);
    }
}

TEST(BatchResponses, IdentityWeightsGivePrimary) {
    std::mt19937_64 rng(7);
    auto m = make_model(testutil::random_dataset(rng, 15, 2), 3, 4);
    const auto r = batch_responses(m);
    EXPECT_EQ(r.r, r.r_a);
}

TEST(BatchResponses, MatchSingleQueryForwardCalls) {
    std::mt19937_64 rng(8);
    auto m = make_model(testutil::random_dataset(rng, 6, 2), 2, 3);
    m.b_a = {0.7, 1.9};
    m.b_o = {0.3, 1.1, 2.2};
    m.weights.w = {0.9, 0.5, 0.1};
    const auto r = batch_responses(m);
    const Vector pe = compute_expected_punishments(m);
    for (std::size_t j = 0; j < 6; ++j) {
        const auto& mem = m.memory;
        EXPECT_NEAR(r.r_a[j], bl_forward(mem.s_u[j], mem.th_u[j], m, j).output, 1e-14);
        EXPECT_NEAR(mem.p_a_e[j], pe[j], 1e-14);
        EXPECT_NEAR(r.r_o[j], mo_forward(mem.s_u[j], m, j).output, 1e-14);
        EXPECT_NEAR(r.r[j], cm_combine(r.r_a[j], r.r_o[j], m.weights.w), 1e-14);
    }
}

TEST(SdStep, ZeroPunishmentLeavesParameters) {
    std::mt19937_64 rng(9);
    auto ds = testutil::random_dataset(rng, 12, 2);
    std::fill(ds.targets.begin(), ds.targets.end(), 1.0);
    auto m = make_model(ds, 2, 3);
    const auto cache = build_training_cache(m);
    batch_responses(m, cache);
    const Vector before = m.b_a;
    SdState st;
    const auto res = sd_step(m, full_batch(cache, m.memory.r_u), 0.05, 0.05, st);
    EXPECT_EQ(m.b_a, before);
    EXPECT_FALSE(res.accepted_a);
}

TEST(SdStep, SingleNeighborHasZeroGradient) {
    std::mt19937_64 rng(10);
    auto m = make_model(testutil::random_dataset(rng, 12, 2), 1, 3);
    const auto cache = build_training_cache(m);
    batch_responses(m, cache);
    m.weights.w_a = {1.0, -0.7, 0.2};
    const SdBatch batch = full_batch(cache, m.memory.r_u);
    const auto g = gradients(m, batch);
    EXPECT_EQ(g.b_a[0], 0.0);
    const Vector before = m.b_a;
    SdState st;
    sd_step(m, batch, 0.05, 0.05, st);
    EXPECT_EQ(m.b_a, before);
}

TEST(SdStep, FiveSampleGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    auto m = make_model(testutil::random_dataset(rng, 5, 2), 2, 2);
    m.b_a = {0.8, 1.6};
    m.b_o = {0.5, 2.0};
    const auto cache = build_training_cache(m);
    batch_responses(m, cache);
    m.weights.w_a = {0.9, -1.2, 0.05};
    m.weights.w_o = {1.3, -0.1};
    const SdBatch batch = full_batch(cache, m.memory.r_u);
    const auto g = gradients(m, batch);
    const double d = 1e-6;
    for (std::size_t i = 0; i < 2; ++i) {
        auto up = m, dn = m;
        up.b_a[i] += d;
        dn.b_a[i] -= d;
        const double fd = (loss_a(up, batch) - loss_a(dn, batch)) / (2 * d);
        EXPECT_LE(std::abs(fd - g.b_a[i]) / std::max(std::abs(fd), 1e-7), 1e-4);
        up = m;
        dn = m;
        up.b_o[i] += d;
        dn.b_o[i] -= d;
        const double fo = (loss_o(up, batch) - loss_o(dn, batch)) / (2 * d);
        EXPECT_LE(std::abs(fo - g.b_o[i]) / std::max(std::abs(fo), 1e-7), 1e-4);
    }
}

TEST(SdStep, RandomModelsGradientSuite) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        for (auto mode : {PunishmentMode::Supervised, PunishmentMode::SelfReferenced}) {
            const auto res = testutil::check_gradients(seed, mode);
            EXPECT_LT(res.worst_rel, 1e-4) << "seed " << seed;
            EXPECT_GT(res.compared, 0u);
        }
    }
}

TEST(SdStep, NeverIncreasesLoss) {
    const auto ds = henon_embed(200);
    auto m = make_model(ds, 5, 10);
    const auto cache = build_training_cache(m);
    const auto p = heuristic_b_init(m, cache);
    m.b_a = p.b_a;
    m.b_o = p.b_o;
    auto resp = batch_responses(m, cache);
    lse_fit_all(m, resp);
    SdState st;
    for (int i = 0; i < 10; ++i) {
        const auto r = sd_step(m, full_batch(cache, m.memory.r_u), 0.5, 0.5, st);
        EXPECT_LE(r.loss_a_after, r.loss_a_before);
        EXPECT_LE(r.loss_o_after, r.loss_o_before);
        for (double b : m.b_a) EXPECT_GE(b, 0.0);
    }
}

TEST(SdStep, NonParametricKernelUnsupported) {
    std::mt19937_64 rng(1);
    auto m = make_model(testutil::random_dataset(rng, 10, 2), 2, 2, Kernel{KernelKind::Inversion});
    const auto cache = build_training_cache(m);
    batch_responses(m, cache);
    EXPECT_THROW(gradients(m, full_batch(cache, m.memory.r_u)), UnsupportedKernelError);
}

TEST(Phase1, ZeroEpochsIsHeuristicPlusOneLse) {
    const auto ds = henon_embed(120);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto res = train_phase1(ds, {}, ModelConfig{3, 6, {}}, cfg);
    auto ref = make_model(ds, 3, 6);
    const auto p = heuristic_b_init(ref);
    EXPECT_EQ(res.model.b_a, p.b_a);
    EXPECT_EQ(res.model.b_o, p.b_o);
    ref.b_a = p.b_a;
    ref.b_o = p.b_o;
    const auto resp = batch_responses(ref);
    lse_fit_all(ref, resp);
    EXPECT_EQ(res.model.weights.w, ref.weights.w);
    EXPECT_EQ(res.model.weights.w_a, ref.weights.w_a);
    EXPECT_TRUE(res.history.epochs.empty());
}

TEST(Phase1, LseOnlyFitsRepresentableData) {
    TrainConfig cfg;
    cfg.method = TrainMethod::LseLinearHeuristicKernel;
    cfg.epochs = 3;
    const auto res = train_phase1(circle(24), {}, ModelConfig{2, 2, {}}, cfg);
    ASSERT_TRUE(res.history.epochs.back().train_nmse.has_value());
    EXPECT_LT(*res.history.epochs.back().train_nmse, 1e-6);
    EXPECT_TRUE(res.history.ridge_used);  // r_a and r_o are collinear here
}

TEST(Phase1, LseVariantIsDeterministic) {
    const auto ds = henon_embed(150);
    TrainConfig cfg;
    cfg.method = TrainMethod::LseLinearHeuristicKernel;
    cfg.epochs = 4;
    const auto a = train_phase1(ds, {}, ModelConfig{}, cfg);
    const auto b = train_phase1(ds, {}, ModelConfig{}, cfg);
    EXPECT_EQ(a.model.weights.w, b.model.weights.w);
    EXPECT_EQ(a.model.b_a, b.model.b_a);
}

TEST(Phase1, LossANonIncreasingOnHenon) {
    TrainConfig cfg;
    cfg.epochs = 30;
    const auto res = train_phase1(henon_embed(800), {}, ModelConfig{}, cfg);
    ASSERT_EQ(res.history.epochs.size(), 30u);
    std::size_t ok = 0;
    for (std::size_t e = 1; e < res.history.epochs.size(); ++e)
        ok += res.history.epochs[e].loss_a <= res.history.epochs[e - 1].loss_a;
    EXPECT_GE(static_cast<double>(ok) / 29.0, 0.8);
}

TEST(Phase1, AllMethodsAndModesRun) {
    const auto ds = henon_embed(200);
    const auto val = henon_embed(260);
    for (auto method : {TrainMethod::SdAll, TrainMethod::SdNonlinearLseInit, TrainMethod::LseLinearHeuristicKernel,
                        TrainMethod::HybridSdLse})
        for (auto mode : {TrainMode::Batch, TrainMode::Online}) {
            TrainConfig cfg;
            cfg.method = method;
            cfg.mode = mode;
            cfg.epochs = 5;
            const auto res = train_phase1(ds, val, ModelConfig{}, cfg);
            ASSERT_EQ(res.history.epochs.size(), 5u);
            ASSERT_TRUE(res.history.epochs.back().val_nmse.has_value());
            EXPECT_LT(*res.history.epochs.back().val_nmse, 1.0) << method_name(method) << ' ' << mode_name(mode);
        }
}

TEST(Phase1, OnlineModeDeterministicPerSeed) {
    const auto ds = henon_embed(150);
    TrainConfig cfg;
    cfg.mode = TrainMode::Online;
    cfg.epochs = 3;
    cfg.seed = 5;
    EXPECT_EQ(train_phase1(ds, {}, ModelConfig{}, cfg).model.b_a, train_phase1(ds, {}, ModelConfig{}, cfg).model.b_a);
}

TEST(Phase1, NonParametricKernelNeedsLseOnly) {
    const auto ds = henon_embed(100);
    TrainConfig cfg;
    EXPECT_THROW(train_phase1(ds, {}, ModelConfig{3, 6, Kernel{KernelKind::Inversion}}, cfg), ArgumentError);
    cfg.method = TrainMethod::LseLinearHeuristicKernel;
    cfg.phase2_epochs = 0;
    cfg.epochs = 2;
    EXPECT_NO_THROW(train_phase1(ds, {}, ModelConfig{3, 6, Kernel{KernelKind::Inversion}}, cfg));
}

TEST(Phase2, EmptyStreamLeavesModel) {
    TrainConfig cfg;
    cfg.epochs = 2;
    const auto p1 = train_phase1(henon_embed(100), {}, ModelConfig{}, cfg);
    const auto p2 = train_phase2(p1.model, {}, {}, cfg);
    EXPECT_EQ(p2.model.b_a, p1.model.b_a);
    EXPECT_EQ(p2.model.b_o, p1.model.b_o);
    EXPECT_TRUE(p2.predictions.empty());
}

TEST(Phase2, IdentityCombinationHasNoPunishment) {
    TrainConfig cfg;
    cfg.epochs = 2;
    auto model = train_phase1(henon_embed(100), {}, ModelConfig{}, cfg).model;
    model.weights.w = {1.0, 0.0, 0.0};
    const auto stream = henon_embed(140).inputs;
    const auto p2 = train_phase2(model, stream, {}, cfg, 2);
    EXPECT_EQ(p2.model.b_a, model.b_a);
}

TEST(Phase2, PredictsBeforeUpdating) {
    TrainConfig cfg;
    cfg.epochs = 3;
    const auto model = train_phase1(henon_embed(150), {}, ModelConfig{}, cfg).model;
    const auto stream = henon_embed(60, 1, 0.0).inputs;
    const auto p2 = train_phase2(model, stream, {}, cfg, 1);
    ASSERT_EQ(p2.predictions.size(), 1u);
    EXPECT_NEAR(p2.predictions[0][0], belpm_predict(stream[0], model), 1e-14);
    EXPECT_NE(p2.model.b_a, model.b_a);
}

TEST(Phase2, SecondPhaseDoesNotHurtNoisyHenon) {
    TimeSeries s = add_noise(generate_henon(HenonParams{}, 1910), 0.1, 3);
    TimeSeries w;
    w.values.assign(s.values.begin() + 900, s.values.end());
    const auto parts = split(embed(w, 3, 1, 2), 800, 100, 0);
    const TrainConfig cfg;
    const auto p1 = train_phase1(parts.train, {}, ModelConfig{}, cfg);
    const double flp = nmse(belpm_predict_all(p1.model, parts.test.inputs), parts.test.targets);
    const auto p2 = train_phase2(p1.model, parts.test.inputs, parts.test.targets, cfg);
    const double slp = nmse(p2.predictions.back(), parts.test.targets);
    EXPECT_LE(slp, flp + 1e-3);
}
