#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "belpm/error.hpp"

namespace belpm {

/// Tikhonov term added to the normal matrix when it is rank deficient.
inline constexpr double kRidgeLambda = 1e-8;

template <std::size_t P>
struct LseFit {
    std::array<double, P> coef{};
    bool ridge = false;  // true when the ridge fallback was needed
};

namespace detail {

/// In-place Cholesky solve of a small SPD system. Returns false when a pivot
/// falls below `tol`.
template <std::size_t P>
bool cholesky_solve(std::array<std::array<double, P>, P> a, std::array<double, P>& x, double tol) {
    for (std::size_t j = 0; j < P; ++j) {
        double d = a[j][j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j][k] * a[j][k];
        if (!(d > tol)) return false;
        a[j][j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < P; ++i) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
            a[i][j] = s / a[j][j];
        }
    }
    for (std::size_t i = 0; i < P; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    for (std::size_t i = P; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < P; ++k) s -= a[k][i] * x[k];
        x[i] = s / a[i][i];
    }
    return true;
}

}  // namespace detail

/// Least squares fit of y against the design rows via the normal equations.
/// Falls back to (A^T A + lambda I) when A^T A is numerically singular.
template <std::size_t P>
LseFit<P> lse_solve(std::span<const std::array<double, P>> rows, std::span<const double> y) {
    if (rows.size() != y.size()) throw ArgumentError("lse: design rows and targets differ in length");
    if (rows.size() < P) throw ArgumentError("lse: need at least " + std::to_string(P) + " equations");

    std::array<std::array<double, P>, P> ata{};
    std::array<double, P> aty{};
    for (std::size_t n = 0; n < rows.size(); ++n) {
        for (std::size_t i = 0; i < P; ++i) {
            aty[i] += rows[n][i] * y[n];
            for (std::size_t j = 0; j <= i; ++j) ata[i][j] += rows[n][i] * rows[n][j];
        }
    }
    for (std::size_t i = 0; i < P; ++i)
        for (std::size_t j = i + 1; j < P; ++j) ata[i][j] = ata[j][i];

    double scale = 0.0;
    for (std::size_t i = 0; i < P; ++i) scale = std::max(scale, ata[i][i]);
    const double tol = 1e-13 * std::max(scale, 1.0);

    LseFit<P> fit;
    fit.coef = aty;
    if (detail::cholesky_solve(ata, fit.coef, tol)) return fit;

    fit.ridge = true;
    for (std::size_t i = 0; i < P; ++i) ata[i][i] += kRidgeLambda;
    fit.coef = aty;
    if (!detail::cholesky_solve(ata, fit.coef, 0.0)) throw NumericError("lse: ridge system not positive definite");
    for (double c : fit.coef)
        if (!std::isfinite(c)) throw NumericError("lse: non-finite coefficient");
    return fit;
}

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b, std::size_t c, const char* who) {
    if (a != b || a != c) throw ArgumentError(std::string(who) + ": vectors differ in length");
}
}  // namespace detail

/// Fits r_u ~ w1 r_a + w2 r_o + w3.
inline LseFit<3> lse_fit_w(std::span<const double> r_a, std::span<const double> r_o, std::span<const double> r_u) {
    detail::require_same_length(r_a.size(), r_o.size(), r_u.size(), "lse_fit_w");
    std::vector<std::array<double, 3>> rows(r_a.size());
    for (std::size_t j = 0; j < rows.size(); ++j) rows[j] = {r_a[j], r_o[j], 1.0};
    return lse_solve<3>(rows, r_u);
}

/// Fits p_a_e ~ wa1 r_u + wa2 r_a + wa3.
inline LseFit<3> lse_fit_wa(std::span<const double> r_u, std::span<const double> r_a,
                            std::span<const double> p_a_e) {
    detail::require_same_length(r_u.size(), r_a.size(), p_a_e.size(), "lse_fit_wa");
    std::vector<std::array<double, 3>> rows(r_u.size());
    for (std::size_t j = 0; j < rows.size(); ++j) rows[j] = {r_u[j], r_a[j], 1.0};
    return lse_solve<3>(rows, p_a_e);
}

/// Fits p_o_e ~ wo1 r_o + wo2.
inline LseFit<2> lse_fit_wo(std::span<const double> r_o, std::span<const double> p_o_e) {
    detail::require_same_length(r_o.size(), p_o_e.size(), p_o_e.size(), "lse_fit_wo");
    std::vector<std::array<double, 2>> rows(r_o.size());
    for (std::size_t j = 0; j < rows.size(); ++j) rows[j] = {r_o[j], 1.0};
    return lse_solve<2>(rows, p_o_e);
}

}  // namespace belpm
