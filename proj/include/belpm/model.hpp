#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "belpm/error.hpp"
#include "belpm/kernels.hpp"
#include "belpm/series.hpp"
#include "belpm/wknn.hpp"

namespace belpm {

using MaxMin = std::array<double, 2>;

/// Thalamus output: [max, min] of the input plus the input itself.
struct ThOutput {
    MaxMin max_min{0.0, 0.0};
    Vector agg;
};

inline ThOutput th_forward(std::span<const double> input) {
    if (input.empty()) throw ArgumentError("th_forward: empty input");
    const auto [lo, hi] = std::minmax_element(input.begin(), input.end());
    return {{*hi, *lo}, Vector(input.begin(), input.end())};
}

/// Sensory cortex. A fixed linear layer that passes its input through unchanged.
inline Vector cx_forward(std::span<const double> agg) { return Vector(agg.begin(), agg.end()); }

/// Stored training samples as seen by the amygdala and orbitofrontal parts.
struct TrainingMemory {
    std::vector<Vector> s_u;   // cortex outputs
    std::vector<MaxMin> th_u;  // thalamus max/min outputs
    Vector r_u;                // targets
    Vector p_a_e;              // expected punishments r_u - r_a (leave-one-out)

    std::size_t size() const noexcept { return r_u.size(); }
    std::size_t dim() const noexcept { return s_u.empty() ? 0 : s_u.front().size(); }
};

inline TrainingMemory make_memory(const EmbeddedDataset& ds) {
    TrainingMemory mem;
    mem.s_u.reserve(ds.size());
    mem.th_u.reserve(ds.size());
    for (const auto& in : ds.inputs) {
        ThOutput th = th_forward(in);
        mem.s_u.push_back(cx_forward(th.agg));
        mem.th_u.push_back(th.max_min);
    }
    mem.r_u = ds.targets;
    return mem;
}

/// Linear weights of the combination and reinforcement nodes.
struct LinearWeights {
    std::array<double, 3> w{1.0, 0.0, 0.0};     // r = w1 r_a + w2 r_o + w3
    std::array<double, 3> w_a{1.0, -1.0, 0.0};  // p_a = wa1 r_u + wa2 r_a + wa3
    std::array<double, 2> w_o{1.0, 0.0};        // p_o = wo1 r_o + wo2
};

struct BelpmModel {
    TrainingMemory memory;
    std::size_t k_a = 5;
    std::size_t k_o = 10;
    Kernel kernel;
    Vector b_a;  // one parameter per amygdala neighbor rank
    Vector b_o;  // one parameter per orbitofrontal neighbor rank
    LinearWeights weights;

    // Embedding the memory was built with; informational.
    std::size_t lag = 1;
    std::size_t horizon = 1;

    /// Kernel parameters plus the eight linear weights; does not depend on the input dimension.
    std::size_t parameter_count() const noexcept { return b_a.size() + b_o.size() + 8; }
};

inline void validate(const BelpmModel& m) {
    const std::size_t n = m.memory.size();
    if (m.memory.s_u.size() != n || m.memory.th_u.size() != n)
        throw ArgumentError("model: training memory lists have inconsistent lengths");
    if (!m.memory.p_a_e.empty() && m.memory.p_a_e.size() != n)
        throw ArgumentError("model: expected punishments do not match the training memory");
    if (m.k_a < 1 || m.k_o < 1) throw ArgumentError("model: k_a and k_o must be >= 1");
    if (n < 2 || m.k_a > n - 1 || m.k_o > n - 1)
        throw ArgumentError("model: k_a=" + std::to_string(m.k_a) + ", k_o=" + std::to_string(m.k_o) +
                            " need at most N_u-1=" + std::to_string(n == 0 ? 0 : n - 1) + " neighbors");
    if (m.b_a.size() != m.k_a || m.b_o.size() != m.k_o)
        throw ArgumentError("model: kernel parameter vectors must have k_a and k_o entries");
    for (double v : m.b_a)
        if (!std::isfinite(v)) throw ArgumentError("model: non-finite b_a");
    for (double v : m.b_o)
        if (!std::isfinite(v)) throw ArgumentError("model: non-finite b_o");
    validate(m.kernel);
}

/// Builds an untrained model over a training dataset. Kernel parameters start
/// at 1 and expected punishments are left empty.
inline BelpmModel make_model(const EmbeddedDataset& train, std::size_t k_a, std::size_t k_o, Kernel kernel = {}) {
    BelpmModel m;
    m.memory = make_memory(train);
    m.k_a = k_a;
    m.k_o = k_o;
    m.kernel = kernel;
    m.b_a.assign(k_a, 1.0);
    m.b_o.assign(k_o, 1.0);
    m.lag = train.lag;
    m.horizon = train.horizon;
    validate(m);
    return m;
}

/// Amygdala distance: cortex-output distance plus thalamus max/min distance.
inline double bl_distance(std::span<const double> s_q, const MaxMin& th_q, std::span<const double> s_j,
                          const MaxMin& th_j) {
    return euclidean(s_j, s_q) + std::hypot(th_j[0] - th_q[0], th_j[1] - th_q[1]);
}

inline NeighborSet bl_neighbors(std::span<const double> s_q, const MaxMin& th_q, const TrainingMemory& mem,
                                std::size_t k, std::optional<std::size_t> exclude = std::nullopt) {
    Vector d(mem.size());
    for (std::size_t j = 0; j < mem.size(); ++j) d[j] = bl_distance(s_q, th_q, mem.s_u[j], mem.th_u[j]);
    return select_k_smallest(d, k, exclude);
}

inline NeighborSet mo_neighbors(std::span<const double> s_q, const TrainingMemory& mem, std::size_t k,
                                std::optional<std::size_t> exclude = std::nullopt) {
    return knn_search(s_q, mem.s_u, k, exclude);
}

/// Outputs of the four-layer adaptive network shared by BL and MO.
struct LayerTrace {
    NeighborSet neighbors;
    Vector n1;      // kernel values per neighbor rank
    Vector n2;      // normalized kernel values
    Vector n3;      // n2 times the neighbor's stored value
    Vector values;  // stored values of the neighbors (targets or expected punishments)
    double output = 0.0;
    bool degenerate = false;  // uniform fallback used because sum(n1) < eps
};

/// Kernel layer, normalization, product with `stored`, summation.
inline LayerTrace adaptive_layers(const Kernel& kernel, NeighborSet nb, std::span<const double> b,
                                  std::span<const double> stored) {
    LayerTrace t;
    const std::size_t k = nb.size();
    t.n1 = kernel_weights(kernel, nb, b);
    double sum = 0.0;
    for (double v : t.n1) sum += v;
    t.n2.resize(k);
    if (sum >= kKernelEps && std::isfinite(sum)) {
        for (std::size_t m = 0; m < k; ++m) t.n2[m] = t.n1[m] / sum;
    } else {
        t.degenerate = true;
        std::fill(t.n2.begin(), t.n2.end(), 1.0 / static_cast<double>(k));
    }
    t.values.resize(k);
    t.n3.resize(k);
    for (std::size_t m = 0; m < k; ++m) {
        t.values[m] = stored[nb.indices[m]];
        t.n3[m] = t.n2[m] * t.values[m];
        t.output += t.n3[m];
    }
    t.neighbors = std::move(nb);
    return t;
}

/// Basolateral amygdala: primary response r_a as a kernel-weighted average of
/// the k_a nearest training targets.
inline LayerTrace bl_forward(std::span<const double> s_q, const MaxMin& th_q, const BelpmModel& model,
                             std::optional<std::size_t> exclude = std::nullopt) {
    return adaptive_layers(model.kernel, bl_neighbors(s_q, th_q, model.memory, model.k_a, exclude), model.b_a,
                           model.memory.r_u);
}

/// Medial orbitofrontal: secondary response r_o as a kernel-weighted average
/// of the k_o nearest training samples' expected punishments.
inline LayerTrace mo_forward(std::span<const double> s_q, const BelpmModel& model,
                             std::optional<std::size_t> exclude = std::nullopt) {
    if (model.memory.p_a_e.size() != model.memory.size())
        throw ArgumentError("mo_forward: expected punishments not populated");
    return adaptive_layers(model.kernel, mo_neighbors(s_q, model.memory, model.k_o, exclude), model.b_o,
                           model.memory.p_a_e);
}

/// Leave-one-out residuals r_u[j] - r_a[j] over the training memory.
inline Vector compute_expected_punishments(const BelpmModel& model) {
    const auto& mem = model.memory;
    if (mem.size() <= model.k_a)
        throw ArgumentError("compute_expected_punishments: need more than k_a training samples");
    Vector pe(mem.size());
    for (std::size_t j = 0; j < mem.size(); ++j)
        pe[j] = mem.r_u[j] - bl_forward(mem.s_u[j], mem.th_u[j], model, j).output;
    return pe;
}

inline void refresh_expected_punishments(BelpmModel& model) {
    model.memory.p_a_e = compute_expected_punishments(model);
}

inline double cm_combine(double r_a, double r_o, const std::array<double, 3>& w) noexcept {
    return w[0] * r_a + w[1] * r_o + w[2];
}

/// Reinforcement against the known target (training inputs).
inline double cm_punishment_phase1(double r_u, double r_a, const std::array<double, 3>& w_a) noexcept {
    return w_a[0] * r_u + w_a[1] * r_a + w_a[2];
}

/// Weights of the reinforcement node when the model's own output stands in for the target.
inline constexpr std::array<double, 3> kPhase2PunishmentWeights{1.0, -1.0, 0.0};

inline double cm_punishment_phase2(double r, double r_a,
                                   const std::array<double, 3>& w_a = kPhase2PunishmentWeights) noexcept {
    return w_a[0] * r + w_a[1] * r_a + w_a[2];
}

inline double lo_punishment(double r_o, const std::array<double, 2>& w_o) noexcept {
    return w_o[0] * r_o + w_o[1];
}

struct ForwardTrace {
    ThOutput th;
    Vector s;
    LayerTrace bl;
    LayerTrace mo;
    double r_a = 0.0;
    double r_o = 0.0;
    double r = 0.0;
};

/// Full forward pass for an unseen input.
inline ForwardTrace belpm_forward(std::span<const double> input, const BelpmModel& model) {
    if (input.size() != model.memory.dim())
        throw ArgumentError("belpm_predict: input has dimension " + std::to_string(input.size()) + ", model expects " +
                            std::to_string(model.memory.dim()));
    ForwardTrace t;
    t.th = th_forward(input);
    t.s = cx_forward(t.th.agg);
    t.bl = bl_forward(t.s, t.th.max_min, model);
    t.mo = mo_forward(t.s, model);
    t.r_a = t.bl.output;
    t.r_o = t.mo.output;
    t.r = cm_combine(t.r_a, t.r_o, model.weights.w);
    return t;
}

inline double belpm_predict(std::span<const double> input, const BelpmModel& model) {
    return belpm_forward(input, model).r;
}

inline Vector belpm_predict_all(const BelpmModel& model, const std::vector<Vector>& inputs) {
    Vector out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) out.push_back(belpm_predict(in, model));
    return out;
}

}  // namespace belpm
