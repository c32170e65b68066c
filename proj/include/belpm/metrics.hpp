#pragma once

#include <cmath>
#include <span>
#include <string>

#include "belpm/error.hpp"

namespace belpm {

/// Undefined metric: the target sequence has no variance.
class UndefinedMetricError : public NumericError {
public:
    explicit UndefinedMetricError(const std::string& what) : NumericError(what) {}
};

inline constexpr double kMetricEps = 1e-12;

inline double sum_squared_error(std::span<const double> predicted, std::span<const double> target) {
    if (predicted.size() != target.size())
        throw ArgumentError("metric: predicted has " + std::to_string(predicted.size()) + " values, target has " +
                            std::to_string(target.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double e = target[i] - predicted[i];
        acc += e * e;
    }
    return acc;
}

/// Mean square error.
inline double mse(std::span<const double> predicted, std::span<const double> target) {
    const double sse = sum_squared_error(predicted, target);
    if (target.empty()) throw ArgumentError("mse: empty sequences");
    return sse / static_cast<double>(target.size());
}

/// Sum of squared errors over the target's sum of squared deviations from its mean.
inline double nmse(std::span<const double> predicted, std::span<const double> target) {
    const double sse = sum_squared_error(predicted, target);
    if (target.size() < 2) throw ArgumentError("nmse: need at least two samples");
    double mean = 0.0;
    for (double y : target) mean += y;
    mean /= static_cast<double>(target.size());
    double var = 0.0;
    for (double y : target) var += (y - mean) * (y - mean);
    if (var < kMetricEps) throw UndefinedMetricError("nmse: target is constant");
    return sse / var;
}

}  // namespace belpm
