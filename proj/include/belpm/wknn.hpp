#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "belpm/error.hpp"
#include "belpm/kernels.hpp"
#include "belpm/series.hpp"

namespace belpm {

/// k nearest training samples, ascending by distance, ties broken by index.
struct NeighborSet {
    std::vector<std::size_t> indices;
    Vector distances;

    std::size_t size() const noexcept { return indices.size(); }
};

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ArgumentError("euclidean: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Selects the k smallest entries of a precomputed distance vector.
inline NeighborSet select_k_smallest(std::span<const double> distances, std::size_t k,
                                     std::optional<std::size_t> exclude = std::nullopt) {
    const std::size_t n = distances.size();
    const std::size_t available = (exclude && *exclude < n) ? n - 1 : n;
    if (k < 1 || k > available)
        throw ArgumentError("knn: k=" + std::to_string(k) + " outside [1, " + std::to_string(available) + "]");

    std::vector<std::size_t> order;
    order.reserve(available);
    for (std::size_t i = 0; i < n; ++i)
        if (!exclude || i != *exclude) order.push_back(i);

    const auto closer = [&](std::size_t a, std::size_t b) {
        return distances[a] < distances[b] || (distances[a] == distances[b] && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);

    NeighborSet out;
    out.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    out.distances.reserve(k);
    for (std::size_t i : out.indices) out.distances.push_back(distances[i]);
    return out;
}

/// Exact linear-scan k-NN under the Euclidean norm. `exclude` drops one
/// training index from consideration (leave-one-out).
inline NeighborSet knn_search(std::span<const double> query, const std::vector<Vector>& inputs, std::size_t k,
                              std::optional<std::size_t> exclude = std::nullopt) {
    Vector d(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].size() != query.size())
            throw ArgumentError("knn_search: dimension mismatch at training index " + std::to_string(i));
        d[i] = euclidean(query, inputs[i]);
    }
    return select_k_smallest(d, k, exclude);
}

/// Kernel weights for a neighbor set. `b` holds either one shared parameter or
/// one per neighbor rank.
inline Vector kernel_weights(const Kernel& kernel, const NeighborSet& nb, std::span<const double> b) {
    const std::size_t k = nb.size();
    if (kernel.parametric() && b.size() != 1 && b.size() != k)
        throw ArgumentError("kernel parameters: expected 1 or " + std::to_string(k) + " values, got " +
                            std::to_string(b.size()));
    Vector w(k);
    for (std::size_t m = 0; m < k; ++m) {
        const double bm = b.empty() ? 0.0 : (b.size() == 1 ? b[0] : b[m]);
        w[m] = eval(kernel, nb.distances[m], bm, nb.distances);
    }
    return w;
}

/// Weighted k-NN regression: sum(w_j r_j) / sum(w_j) over the k nearest neighbors.
inline double wknn_predict(std::span<const double> query, const EmbeddedDataset& ds, std::size_t k,
                           const Kernel& kernel, std::span<const double> b) {
    const NeighborSet nb = knn_search(query, ds.inputs, k);
    const Vector w = kernel_weights(kernel, nb, b);
    // Centered on the nearest target so a single neighbor reproduces it exactly.
    const double base = ds.targets[nb.indices[0]];
    double num = 0.0, den = 0.0;
    for (std::size_t m = 0; m < nb.size(); ++m) {
        num += w[m] * (ds.targets[nb.indices[m]] - base);
        den += w[m];
    }
    if (!(den >= kKernelEps)) throw NumericError("wknn_predict: degenerate kernel weights (sum below epsilon)");
    return base + num / den;
}

inline Vector wknn_predict_all(const EmbeddedDataset& train, const EmbeddedDataset& queries, std::size_t k,
                               const Kernel& kernel, std::span<const double> b) {
    Vector out;
    out.reserve(queries.size());
    for (const auto& q : queries.inputs) out.push_back(wknn_predict(q, train, k, kernel, b));
    return out;
}

}  // namespace belpm
