#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "belpm/wknn.hpp"
#include "test_util.hpp"

using namespace belpm;

namespace {
EmbeddedDataset line3(Vector targets = {0, 1, 4}) {
    EmbeddedDataset ds;
    ds.inputs = {{0.0}, {1.0}, {2.0}};
    ds.targets = std::move(targets);
    return ds;
}
}  // namespace

TEST(KnnSearch, NearestTwo) {
    const auto nb = knn_search(Vector{0.9}, line3().inputs, 2);
    EXPECT_EQ(nb.indices, (std::vector<std::size_t>{1, 0}));
    EXPECT_NEAR(nb.distances[0], 0.1, 1e-15);
    EXPECT_NEAR(nb.distances[1], 0.9, 1e-15);
}

TEST(KnnSearch, ExcludeSkipsSelf) {
    const auto nb = knn_search(Vector{1.0}, line3().inputs, 1, 1);
    ASSERT_EQ(nb.size(), 1u);
    EXPECT_EQ(nb.indices[0], 0u);  // 0 and 2 tie at distance 1, lower index wins
    EXPECT_EQ(nb.distances[0], 1.0);
}

TEST(KnnSearch, TiesByIndex) {
    const std::vector<Vector> same{{2.0, 2.0}, {2.0, 2.0}, {2.0, 2.0}};
    const auto nb = knn_search(Vector{0.0, 0.0}, same, 2);
    EXPECT_EQ(nb.indices, (std::vector<std::size_t>{0, 1}));
}

TEST(KnnSearch, ArgumentErrors) {
    const auto ds = line3();
    EXPECT_THROW(knn_search(Vector{0.0}, ds.inputs, 4), ArgumentError);
    EXPECT_THROW(knn_search(Vector{0.0}, ds.inputs, 0), ArgumentError);
    EXPECT_THROW(knn_search(Vector{0.0}, ds.inputs, 3, 0), ArgumentError);
    EXPECT_THROW(knn_search(Vector{0.0, 1.0}, ds.inputs, 1), ArgumentError);
}

TEST(WknnPredict, SingleNeighborIsItsTarget) {
    const Vector b{1.0};
    EXPECT_EQ(wknn_predict(Vector{1.8}, line3(), 1, Kernel{KernelKind::Exponential}, b), 4.0);
}

TEST(WknnPredict, SymmetricPairAverages) {
    EmbeddedDataset ds;
    ds.inputs = {{-1.0}, {1.0}};
    ds.targets = {1.0, 3.0};
    EXPECT_DOUBLE_EQ(wknn_predict(Vector{0.0}, ds, 2, Kernel{KernelKind::Inversion}, {}), 2.0);
}

TEST(WknnPredict, InversionEqualDistances) {
    EXPECT_DOUBLE_EQ(wknn_predict(Vector{1.5}, line3(), 2, Kernel{KernelKind::Inversion}, {}), 2.5);
}

TEST(WknnPredict, DegenerateWeightsRaise) {
    const Vector b{1e6};
    EXPECT_THROW(wknn_predict(Vector{100.0}, line3(), 2, Kernel{KernelKind::Exponential}, b), NumericError);
}

TEST(WknnPredict, ParameterCountChecked) {
    const Vector b{1.0, 1.0, 1.0};
    EXPECT_THROW(wknn_predict(Vector{0.0}, line3(), 2, Kernel{KernelKind::Exponential}, b), ArgumentError);
}

TEST(WknnProperties, ConvexCombinationOfNeighborTargets) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto ds = testutil::random_dataset(rng, 30, 3);
        const Vector q = testutil::random_vector(rng, 3, -1, 1);
        const std::size_t k = 1 + trial % 7;
        for (const Kernel kernel : {Kernel{KernelKind::Inversion}, Kernel{KernelKind::RankWeighted},
                                    Kernel{KernelKind::GaussianFixed}, Kernel{KernelKind::Exponential}}) {
            const Vector b{2.0};
            const double y = wknn_predict(q, ds, k, kernel, b);
            const auto nb = knn_search(q, ds.inputs, k);
            double lo = 1e300, hi = -1e300;
            for (auto i : nb.indices) {
                lo = std::min(lo, ds.targets[i]);
                hi = std::max(hi, ds.targets[i]);
            }
            EXPECT_GE(y, lo - 1e-12);
            EXPECT_LE(y, hi + 1e-12);
        }
    }
}

TEST(WknnProperties, KOneReturnsTrainingTargetAtTrainingInput) {
    std::mt19937_64 rng(5);
    const auto ds = testutil::random_dataset(rng, 40, 2);
    for (std::size_t i = 0; i < ds.size(); ++i)
        EXPECT_EQ(wknn_predict(ds.inputs[i], ds, 1, Kernel{KernelKind::Inversion}, {}), ds.targets[i]);
}

TEST(WknnProperties, InvariantToTrainingOrder) {
    std::mt19937_64 rng(17);
    const auto ds = testutil::random_dataset(rng, 50, 3);
    std::vector<std::size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    EmbeddedDataset shuffled = ds;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.inputs[i] = ds.inputs[perm[i]];
        shuffled.targets[i] = ds.targets[perm[i]];
    }
    const Vector b{1.5};
    for (int t = 0; t < 50; ++t) {
        const Vector q = testutil::random_vector(rng, 3, -1, 1);
        EXPECT_NEAR(wknn_predict(q, ds, 5, Kernel{KernelKind::Exponential}, b),
                    wknn_predict(q, shuffled, 5, Kernel{KernelKind::Exponential}, b), 1e-12);
    }
}
