#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "belpm/lse.hpp"
#include "test_util.hpp"

using namespace belpm;

namespace {

// Explicit (A^T A)^{-1} A^T y with a full-pivoting LU.
Eigen::VectorXd normal_equations_oracle(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
    const Eigen::MatrixXd ata = a.transpose() * a;
    return ata.fullPivLu().solve(a.transpose() * y);
}

// Largest |A^T (y - A c)| relative to ||A||_F ||y||.
template <std::size_t P>
double orthogonality_defect(const std::vector<std::array<double, P>>& rows, const Vector& y,
                            const std::array<double, P>& c) {
    std::array<double, P> g{};
    double norm_a = 0.0, norm_y = 0.0;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        double r = y[n];
        for (std::size_t i = 0; i < P; ++i) r -= rows[n][i] * c[i];
        for (std::size_t i = 0; i < P; ++i) {
            g[i] += rows[n][i] * r;
            norm_a += rows[n][i] * rows[n][i];
        }
        norm_y += y[n] * y[n];
    }
    double worst = 0.0;
    for (double v : g) worst = std::max(worst, std::abs(v));
    return worst / std::max(std::sqrt(norm_a * norm_y), 1e-300);
}

}  // namespace

TEST(LseFitW, ExactLinearRecovery) {
    std::mt19937_64 rng(1);
    const Vector r_a = testutil::random_vector(rng, 20, -1, 1);
    const Vector r_o = testutil::random_vector(rng, 20, -1, 1);
    Vector r_u(20);
    for (std::size_t j = 0; j < 20; ++j) r_u[j] = 2.0 * r_a[j] + 1.0;
    const auto fit = lse_fit_w(r_a, r_o, r_u);
    EXPECT_FALSE(fit.ridge);
    EXPECT_NEAR(fit.coef[0], 2.0, 1e-10);
    EXPECT_NEAR(fit.coef[1], 0.0, 1e-10);
    EXPECT_NEAR(fit.coef[2], 1.0, 1e-10);
}

TEST(LseFitW, IdentityOnPrimary) {
    std::mt19937_64 rng(2);
    const Vector r_a = testutil::random_vector(rng, 15, -1, 1);
    const Vector r_o = testutil::random_vector(rng, 15, -1, 1);
    const auto fit = lse_fit_w(r_a, r_o, r_a);
    EXPECT_NEAR(fit.coef[0], 1.0, 1e-10);
    EXPECT_NEAR(fit.coef[1], 0.0, 1e-10);
    EXPECT_NEAR(fit.coef[2], 0.0, 1e-10);
}

TEST(LseFitWa, RecoversResidualDefinition) {
    std::mt19937_64 rng(3);
    const Vector r_u = testutil::random_vector(rng, 30, -1, 1);
    const Vector r_a = testutil::random_vector(rng, 30, -1, 1);
    Vector pe(30);
    for (std::size_t j = 0; j < 30; ++j) pe[j] = r_u[j] - r_a[j];
    const auto fit = lse_fit_wa(r_u, r_a, pe);
    EXPECT_NEAR(fit.coef[0], 1.0, 1e-10);
    EXPECT_NEAR(fit.coef[1], -1.0, 1e-10);
    EXPECT_NEAR(fit.coef[2], 0.0, 1e-10);
}

TEST(LseFitWo, ZeroTargetGivesZeroWeights) {
    std::mt19937_64 rng(4);
    const Vector r_o = testutil::random_vector(rng, 12, -1, 1);
    const auto fit = lse_fit_wo(r_o, Vector(12, 0.0));
    EXPECT_EQ(fit.coef[0], 0.0);
    EXPECT_EQ(fit.coef[1], 0.0);
}

TEST(LseSolve, RankDeficientTakesRidgePath) {
    const Vector r_a{1, 2, 3, 4};
    const Vector r_o{2, 4, 6, 8};  // collinear with r_a
    const Vector r_u{3, 5, 7, 9};
    const auto fit = lse_fit_w(r_a, r_o, r_u);
    EXPECT_TRUE(fit.ridge);
    for (std::size_t j = 0; j < r_u.size(); ++j)
        EXPECT_NEAR(fit.coef[0] * r_a[j] + fit.coef[1] * r_o[j] + fit.coef[2], r_u[j], 1e-6);
}

TEST(LseSolve, ArgumentErrors) {
    EXPECT_THROW(lse_fit_w(Vector{1, 2, 3}, Vector{1, 2}, Vector{1, 2, 3}), ArgumentError);
    EXPECT_THROW(lse_fit_w(Vector{1, 2}, Vector{1, 2}, Vector{1, 2}), ArgumentError);
}

TEST(LseSolve, MatchesNormalEquationsOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 20;
        std::vector<std::array<double, 3>> rows3(n);
        std::vector<std::array<double, 2>> rows2(n);
        Eigen::MatrixXd a3(n, 3), a2(n, 2);
        const Vector y = testutil::random_vector(rng, n, -2, 2);
        const Vector c0 = testutil::random_vector(rng, n, -1, 1);
        const Vector c1 = testutil::random_vector(rng, n, -1, 1);
        for (std::size_t j = 0; j < n; ++j) {
            rows3[j] = {c0[j], c1[j], 1.0};
            rows2[j] = {c0[j], 1.0};
            a3.row(j) << c0[j], c1[j], 1.0;
            a2.row(j) << c0[j], 1.0;
        }
        const Eigen::VectorXd ey = Eigen::Map<const Eigen::VectorXd>(y.data(), n);

        const auto f3 = lse_solve<3>(rows3, y);
        const auto o3 = normal_equations_oracle(a3, ey);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(f3.coef[i], o3(i), 1e-8);
        EXPECT_LT(orthogonality_defect(rows3, y, f3.coef), 1e-8);

        const auto f2 = lse_solve<2>(rows2, y);
        const auto o2 = normal_equations_oracle(a2, ey);
        for (int i = 0; i < 2; ++i) EXPECT_NEAR(f2.coef[i], o2(i), 1e-8);
        EXPECT_LT(orthogonality_defect(rows2, y, f2.coef), 1e-8);
    }
}
