#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "belpm/error.hpp"

namespace belpm {

using Vector = std::vector<double>;

/// Uniformly sampled scalar sequence.
struct TimeSeries {
    Vector values;
    double dt = 0.01;           // seconds between samples
    double origin_time = 0.0;   // time of values[0], seconds

    std::size_t size() const noexcept { return values.size(); }
    double time_at(std::size_t i) const noexcept { return origin_time + dt * static_cast<double>(i); }
};

inline void validate(const TimeSeries& s) {
    if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw ArgumentError("time series: dt must be positive");
    if (s.values.empty()) throw ArgumentError("time series: must contain at least one sample");
    for (std::size_t i = 0; i < s.values.size(); ++i)
        if (!std::isfinite(s.values[i]))
            throw ArgumentError("time series: non-finite value at index " + std::to_string(i));
}

struct LorenzParams {
    double a = 10.0;
    double b = 28.0;
    double c = 8.0 / 3.0;
    std::array<double, 3> initial_state{-15.0, 0.0, 0.0};
};

struct HenonParams {
    double a = 1.4;
    double b = 0.3;
    std::array<double, 2> initial_state{0.0, 0.0};
};

/// Sampling period used to index Henon iterations in seconds (100 iterations per second).
inline constexpr double kHenonDt = 0.01;

/// Any state component beyond this magnitude counts as divergence.
inline constexpr double kDivergenceBound = 1e6;

using LorenzState = std::array<double, 3>;
using HenonState = std::array<double, 2>;

inline LorenzState lorenz_derivative(const LorenzState& s, const LorenzParams& p) noexcept {
    const auto [x, y, z] = s;
    return {p.a * (y - x), p.b * x - y - x * z, x * y - p.c * z};
}

namespace detail {

inline LorenzState axpy(const LorenzState& s, double h, const LorenzState& k) noexcept {
    return {s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]};
}

inline LorenzState rk4_step(const LorenzState& s, double h, const LorenzParams& p) noexcept {
    const LorenzState k1 = lorenz_derivative(s, p);
    const LorenzState k2 = lorenz_derivative(axpy(s, 0.5 * h, k1), p);
    const LorenzState k3 = lorenz_derivative(axpy(s, 0.5 * h, k2), p);
    const LorenzState k4 = lorenz_derivative(axpy(s, h, k3), p);
    LorenzState out;
    for (std::size_t i = 0; i < 3; ++i) out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

template <std::size_t N>
bool diverged(const std::array<double, N>& s) noexcept {
    for (double v : s)
        if (!std::isfinite(v) || std::abs(v) > kDivergenceBound) return true;
    return false;
}

}  // namespace detail

/// Integrates the Lorenz system with classical RK4 at step `dt` and returns the
/// x-component. The first `warmup` samples are generated and then discarded, so
/// values[0] is x(warmup * dt) and origin_time records that instant.
inline TimeSeries generate_lorenz(const LorenzParams& params, double dt, std::size_t n,
                                  std::size_t warmup = 0) {
    if (!(dt > 0.0)) throw ArgumentError("generate_lorenz: dt must be positive");
    if (n < 1) throw ArgumentError("generate_lorenz: n must be >= 1");
    TimeSeries out;
    out.dt = dt;
    out.origin_time = dt * static_cast<double>(warmup);
    out.values.reserve(n);
    LorenzState s = params.initial_state;
    const std::size_t total = warmup + n;
    for (std::size_t i = 0; i < total; ++i) {
        if (i > 0) {
            s = detail::rk4_step(s, dt, params);
            if (detail::diverged(s)) throw GenerationError("generate_lorenz: trajectory diverged", i);
        }
        if (i >= warmup) out.values.push_back(s[0]);
    }
    return out;
}

inline HenonState henon_step(const HenonState& s, const HenonParams& p) noexcept {
    return {1.0 - p.a * s[0] * s[0] + s[1], p.b * s[0]};
}

/// Iterates the Henon map; values[0] is the x-component of the initial state
/// (after `warmup` discarded iterations).
inline TimeSeries generate_henon(const HenonParams& params, std::size_t n, std::size_t warmup = 0) {
    if (n < 1) throw ArgumentError("generate_henon: n must be >= 1");
    TimeSeries out;
    out.dt = kHenonDt;
    out.origin_time = kHenonDt * static_cast<double>(warmup);
    out.values.reserve(n);
    HenonState s = params.initial_state;
    const std::size_t total = warmup + n;
    for (std::size_t i = 0; i < total; ++i) {
        if (i > 0) {
            s = henon_step(s, params);
            if (detail::diverged(s)) throw GenerationError("generate_henon: orbit diverged", i);
        }
        if (i >= warmup) out.values.push_back(s[0]);
    }
    return out;
}

/// Adds i.i.d. zero-mean Gaussian noise. Deterministic for a fixed seed.
inline TimeSeries add_noise(const TimeSeries& series, double stddev, std::uint64_t seed) {
    if (!(stddev >= 0.0) || !std::isfinite(stddev)) throw ArgumentError("add_noise: stddev must be >= 0");
    TimeSeries out = series;
    if (stddev == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, stddev);
    for (double& v : out.values) v += noise(rng);
    return out;
}

/// Delay-embedded supervised pairs for one prediction horizon.
///
/// inputs[j] = [x(t), x(t-L), ..., x(t-(R-1)L)] (most recent sample first),
/// targets[j] = x(t+h).
struct EmbeddedDataset {
    std::vector<Vector> inputs;
    Vector targets;
    std::size_t dim = 1;
    std::size_t lag = 1;
    std::size_t horizon = 1;

    std::size_t size() const noexcept { return targets.size(); }
    bool empty() const noexcept { return targets.empty(); }
};

inline std::size_t min_embed_length(std::size_t dim, std::size_t lag, std::size_t horizon) noexcept {
    return (dim - 1) * lag + horizon + 1;
}

inline EmbeddedDataset embed(const TimeSeries& series, std::size_t dim, std::size_t lag, std::size_t horizon) {
    if (dim < 1 || lag < 1 || horizon < 1) throw ArgumentError("embed: dim, lag and horizon must all be >= 1");
    const std::size_t need = min_embed_length(dim, lag, horizon);
    if (series.size() < need)
        throw ArgumentError("embed: series too short (length " + std::to_string(series.size()) +
                            ", minimum " + std::to_string(need) + ")");
    EmbeddedDataset ds;
    ds.dim = dim;
    ds.lag = lag;
    ds.horizon = horizon;
    const std::size_t first = (dim - 1) * lag;
    const std::size_t count = series.size() - first - horizon;
    ds.inputs.reserve(count);
    ds.targets.reserve(count);
    for (std::size_t t = first; t < first + count; ++t) {
        Vector in(dim);
        for (std::size_t r = 0; r < dim; ++r) in[r] = series.values[t - r * lag];
        ds.inputs.push_back(std::move(in));
        ds.targets.push_back(series.values[t + horizon]);
    }
    return ds;
}

/// Contiguous copy of pairs [begin, begin + count).
inline EmbeddedDataset slice(const EmbeddedDataset& ds, std::size_t begin, std::size_t count) {
    if (begin > ds.size() || count > ds.size() - begin) throw ArgumentError("slice: range exceeds dataset");
    EmbeddedDataset out;
    out.dim = ds.dim;
    out.lag = ds.lag;
    out.horizon = ds.horizon;
    out.inputs.assign(ds.inputs.begin() + static_cast<std::ptrdiff_t>(begin),
                      ds.inputs.begin() + static_cast<std::ptrdiff_t>(begin + count));
    out.targets.assign(ds.targets.begin() + static_cast<std::ptrdiff_t>(begin),
                       ds.targets.begin() + static_cast<std::ptrdiff_t>(begin + count));
    return out;
}

struct DatasetSplit {
    EmbeddedDataset train;
    EmbeddedDataset test;
    EmbeddedDataset val;
};

/// Order-preserving prefix split: train, then test, then validation.
inline DatasetSplit split(const EmbeddedDataset& ds, std::size_t n_train, std::size_t n_test, std::size_t n_val) {
    if (n_train + n_test + n_val > ds.size())
        throw ArgumentError("split: requested " + std::to_string(n_train + n_test + n_val) + " pairs but dataset has " +
                            std::to_string(ds.size()));
    return {slice(ds, 0, n_train), slice(ds, n_train, n_test), slice(ds, n_train + n_test, n_val)};
}

}  // namespace belpm
