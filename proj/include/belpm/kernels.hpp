#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "belpm/error.hpp"

namespace belpm {

/// Guard for singular kernel evaluations (zero distance, degenerate contexts).
inline constexpr double kKernelEps = 1e-12;

enum class KernelKind {
    GaussianFixed,  // exp(-d^2/2) / sqrt(2 pi)
    Inversion,      // 1 / |d|
    RankWeighted,   // (max(d) - (d_j - min(d))) / max(d) over the neighbor context
    Exponential,    // exp(-d b)
    Rational,       // (1 + (d b)^2)^-z
};

struct Kernel {
    KernelKind kind = KernelKind::Exponential;
    double z = 1.0;  // Rational exponent

    /// True for the families that consume a per-node parameter b.
    bool parametric() const noexcept { return kind == KernelKind::Exponential || kind == KernelKind::Rational; }
};

inline std::string_view kernel_name(KernelKind kind) noexcept {
    switch (kind) {
        case KernelKind::GaussianFixed: return "gaussian";
        case KernelKind::Inversion: return "inversion";
        case KernelKind::RankWeighted: return "rank";
        case KernelKind::Exponential: return "exponential";
        case KernelKind::Rational: return "rational";
    }
    return "unknown";
}

inline KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "gaussian") return KernelKind::GaussianFixed;
    if (name == "inversion") return KernelKind::Inversion;
    if (name == "rank") return KernelKind::RankWeighted;
    if (name == "exponential") return KernelKind::Exponential;
    if (name == "rational") return KernelKind::Rational;
    throw ArgumentError("unknown kernel '" + std::string(name) + "'");
}

inline void validate(const Kernel& k) {
    if (!(k.z > 0.0) || !std::isfinite(k.z)) throw ArgumentError("kernel: rational exponent z must be positive");
}

/// Kernel value at distance d. `b` is ignored by the non-parametric families;
/// RankWeighted reads the full neighbor distance set from `context`.
inline double eval(const Kernel& k, double d, double b, std::span<const double> context = {}) {
    switch (k.kind) {
        case KernelKind::GaussianFixed:
            return std::exp(-0.5 * d * d) / std::sqrt(2.0 * std::numbers::pi);
        case KernelKind::Inversion: {
            const double ad = std::abs(d);
            return ad < kKernelEps ? 1.0 / kKernelEps : 1.0 / ad;
        }
        case KernelKind::RankWeighted: {
            if (context.empty()) throw ArgumentError("rank kernel: distance context required");
            const auto [lo, hi] = std::minmax_element(context.begin(), context.end());
            if (*hi < kKernelEps || *hi - *lo < kKernelEps) return 1.0;
            return (*hi - (d - *lo)) / *hi;
        }
        case KernelKind::Exponential:
            return std::exp(-d * b);
        case KernelKind::Rational: {
            const double u = d * b;
            return std::pow(1.0 + u * u, -k.z);
        }
    }
    return 0.0;
}

/// dK/db for the parametric families.
inline double eval_grad_b(const Kernel& k, double d, double b) {
    switch (k.kind) {
        case KernelKind::Exponential:
            return -d * std::exp(-d * b);
        case KernelKind::Rational: {
            const double u = d * b;
            return -2.0 * k.z * d * d * b * std::pow(1.0 + u * u, -k.z - 1.0);
        }
        default:
            throw UnsupportedKernelError("kernel '" + std::string(kernel_name(k.kind)) +
                                         "' has no trainable parameter");
    }
}

struct KernelPropertyReport {
    bool non_negative = true;
    bool max_at_zero = true;
    bool monotone = true;  // only checked when requested
    std::vector<std::string> failures;

    bool passed() const noexcept { return failures.empty(); }
};

/// Checks K >= 0, K(0) >= K(d) and (optionally) monotone non-increase on a
/// sorted copy of `grid`. Works on any callable double(double).
template <typename Fn>
KernelPropertyReport check_kernel_properties(Fn&& kernel, std::span<const double> grid, bool require_monotone) {
    if (grid.empty()) throw ArgumentError("check_kernel_properties: empty grid");
    std::vector<double> pts(grid.begin(), grid.end());
    for (double d : pts)
        if (!(d >= 0.0)) throw ArgumentError("check_kernel_properties: grid distances must be non-negative");
    std::sort(pts.begin(), pts.end());

    KernelPropertyReport rep;
    const double at_zero = kernel(0.0);
    double prev = at_zero;
    for (double d : pts) {
        const double v = kernel(d);
        if (!(v >= 0.0)) {
            rep.non_negative = false;
            rep.failures.push_back("negative value at d=" + std::to_string(d));
        }
        if (v > at_zero) {
            rep.max_at_zero = false;
            rep.failures.push_back("maximum at 0 violated at d=" + std::to_string(d));
        }
        if (require_monotone && v > prev) {
            rep.monotone = false;
            rep.failures.push_back("not non-increasing at d=" + std::to_string(d));
        }
        prev = v;
    }
    return rep;
}

inline KernelPropertyReport check_kernel_properties(const Kernel& k, double b, std::span<const double> grid) {
    if (k.kind == KernelKind::RankWeighted) {
        // The rank kernel is defined relative to the grid itself; include 0 so K(0) is in range.
        std::vector<double> ctx(grid.begin(), grid.end());
        ctx.push_back(0.0);
        return check_kernel_properties([&](double d) { return eval(k, d, b, ctx); }, grid, true);
    }
    return check_kernel_properties([&](double d) { return eval(k, d, b); }, grid, k.parametric());
}

}  // namespace belpm
