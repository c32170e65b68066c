#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "belpm/error.hpp"
#include "belpm/kernels.hpp"
#include "belpm/lse.hpp"
#include "belpm/metrics.hpp"
#include "belpm/model.hpp"

namespace belpm {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class TrainMethod {
    SdAll,                   // LSE once at start, then steepest descent on every parameter
    SdNonlinearLseInit,      // LSE once at start, then SD on kernel parameters only
    LseLinearHeuristicKernel,  // heuristic kernel parameters kept fixed, LSE every epoch
    HybridSdLse,             // LSE on linear weights alternating with SD on kernel parameters
};

enum class TrainMode { Batch, Online };

inline std::string_view method_name(TrainMethod m) noexcept {
    switch (m) {
        case TrainMethod::SdAll: return "sd_all";
        case TrainMethod::SdNonlinearLseInit: return "sd_nonlinear_lse_init";
        case TrainMethod::LseLinearHeuristicKernel: return "lse_linear_heuristic_kernel";
        case TrainMethod::HybridSdLse: return "hybrid_sd_lse";
    }
    return "unknown";
}

inline TrainMethod parse_method(std::string_view s) {
    if (s == "sd_all") return TrainMethod::SdAll;
    if (s == "sd_nonlinear_lse_init") return TrainMethod::SdNonlinearLseInit;
    if (s == "lse_linear_heuristic_kernel") return TrainMethod::LseLinearHeuristicKernel;
    if (s == "hybrid_sd_lse") return TrainMethod::HybridSdLse;
    throw ArgumentError("unknown training method '" + std::string(s) + "'");
}

inline std::string_view mode_name(TrainMode m) noexcept { return m == TrainMode::Batch ? "batch" : "online"; }

inline TrainMode parse_mode(std::string_view s) {
    if (s == "batch") return TrainMode::Batch;
    if (s == "online") return TrainMode::Online;
    throw ArgumentError("unknown training mode '" + std::string(s) + "'");
}

/// How kernel parameters are initialized: distance heuristic or a constant.
struct BInit {
    bool heuristic = true;
    double value = 1.0;
};

struct TrainConfig {
    TrainMethod method = TrainMethod::HybridSdLse;
    std::size_t epochs = 35;
    double eta_a0 = 0.05;
    double eta_o0 = 0.05;
    TrainMode mode = TrainMode::Batch;
    BInit b_init;
    std::size_t phase2_epochs = 10;
    std::uint64_t seed = 0;  // presentation order in online mode
};

inline bool uses_kernel_sd(TrainMethod m) noexcept { return m != TrainMethod::LseLinearHeuristicKernel; }

inline void validate(const TrainConfig& c) {
    if (!(c.eta_a0 > 0.0) || !(c.eta_o0 > 0.0)) throw ArgumentError("train config: learning rates must be positive");
    if (!c.b_init.heuristic && !(c.b_init.value >= 0.0))
        throw ArgumentError("train config: constant kernel parameter must be >= 0");
}

inline void validate(const TrainConfig& c, const BelpmModel& m) {
    validate(c);
    if ((uses_kernel_sd(c.method) || c.phase2_epochs > 0) && !m.kernel.parametric())
        throw ArgumentError("train config: kernel '" + std::string(kernel_name(m.kernel.kind)) +
                            "' has no trainable parameter; use exponential or rational, or method "
                            "lse_linear_heuristic_kernel with phase2_epochs = 0");
}

// ---------------------------------------------------------------------------
// Neighbor caches. Distances do not depend on any trainable parameter, so the
// neighbor sets of a fixed query set are computed once per training run.
// ---------------------------------------------------------------------------

struct SampleNeighbors {
    NeighborSet bl;
    NeighborSet mo;
};

using NeighborCache = std::vector<SampleNeighbors>;

/// Leave-one-out neighbor sets of every training sample.
inline NeighborCache build_training_cache(const BelpmModel& model) {
    const auto& mem = model.memory;
    NeighborCache cache(mem.size());
    for (std::size_t j = 0; j < mem.size(); ++j) {
        cache[j].bl = bl_neighbors(mem.s_u[j], mem.th_u[j], mem, model.k_a, j);
        cache[j].mo = mo_neighbors(mem.s_u[j], mem, model.k_o, j);
    }
    return cache;
}

/// Neighbor sets of unseen inputs (no exclusion).
inline NeighborCache build_query_cache(const BelpmModel& model, const std::vector<Vector>& inputs) {
    NeighborCache cache(inputs.size());
    for (std::size_t j = 0; j < inputs.size(); ++j) {
        if (inputs[j].size() != model.memory.dim()) throw ArgumentError("query dimension does not match model");
        const ThOutput th = th_forward(inputs[j]);
        const Vector s = cx_forward(th.agg);
        cache[j].bl = bl_neighbors(s, th.max_min, model.memory, model.k_a);
        cache[j].mo = mo_neighbors(s, model.memory, model.k_o);
    }
    return cache;
}

// ---------------------------------------------------------------------------
// Kernel-weighted averages and their parameter derivatives
// ---------------------------------------------------------------------------

/// Normalized kernel average of `stored` over a neighbor set, optionally with
/// d(average)/d(b_m) written to `grad` (zero under the uniform fallback).
inline double kernel_average(const Kernel& kernel, const NeighborSet& nb, std::span<const double> b,
                             std::span<const double> stored, std::span<double> grad = {}) {
    const std::size_t k = nb.size();
    const double base = stored[nb.indices[0]];
    Vector kv(k);
    double sum = 0.0, num = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
        kv[m] = eval(kernel, nb.distances[m], b[m], nb.distances);
        sum += kv[m];
        num += kv[m] * (stored[nb.indices[m]] - base);
    }
    if (!(sum >= kKernelEps) || !std::isfinite(sum)) {
        double avg = 0.0;
        for (std::size_t m = 0; m < k; ++m) avg += stored[nb.indices[m]];
        std::fill(grad.begin(), grad.end(), 0.0);
        return avg / static_cast<double>(k);
    }
    const double offset = num / sum;
    if (!grad.empty())
        for (std::size_t m = 0; m < k; ++m)
            grad[m] = eval_grad_b(kernel, nb.distances[m], b[m]) * (stored[nb.indices[m]] - base - offset) / sum;
    return base + offset;
}

inline double primary_response(const BelpmModel& model, const SampleNeighbors& nb, std::span<double> grad = {}) {
    return kernel_average(model.kernel, nb.bl, model.b_a, model.memory.r_u, grad);
}

inline double secondary_response(const BelpmModel& model, const SampleNeighbors& nb, std::span<double> grad = {}) {
    return kernel_average(model.kernel, nb.mo, model.b_o, model.memory.p_a_e, grad);
}

// ---------------------------------------------------------------------------
// Batch responses over the training set
// ---------------------------------------------------------------------------

struct Responses {
    Vector r_a;
    Vector r_o;
    Vector r;
};

/// Leave-one-out r_a for every training sample, refreshes the stored expected
/// punishments from it, then leave-one-out r_o and the combined output r.
inline Responses batch_responses(BelpmModel& model, const NeighborCache& cache) {
    const std::size_t n = model.memory.size();
    if (cache.size() != n) throw ArgumentError("batch_responses: cache does not match training memory");
    Responses out;
    out.r_a.resize(n);
    out.r_o.resize(n);
    out.r.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.r_a[j] = primary_response(model, cache[j]);
    model.memory.p_a_e.resize(n);
    for (std::size_t j = 0; j < n; ++j) model.memory.p_a_e[j] = model.memory.r_u[j] - out.r_a[j];
    for (std::size_t j = 0; j < n; ++j) {
        out.r_o[j] = secondary_response(model, cache[j]);
        out.r[j] = cm_combine(out.r_a[j], out.r_o[j], model.weights.w);
    }
    return out;
}

inline Responses batch_responses(BelpmModel& model) { return batch_responses(model, build_training_cache(model)); }

// ---------------------------------------------------------------------------
// Kernel parameter initialization
// ---------------------------------------------------------------------------

struct KernelParams {
    Vector b_a;
    Vector b_o;
};

/// b[m] = 1 / (mean m-th nearest leave-one-out distance + eps), separately for
/// the amygdala and orbitofrontal distance measures.
inline KernelParams heuristic_b_init(const BelpmModel& model, const NeighborCache& cache) {
    KernelParams p{Vector(model.k_a, 0.0), Vector(model.k_o, 0.0)};
    for (const auto& s : cache) {
        for (std::size_t m = 0; m < model.k_a; ++m) p.b_a[m] += s.bl.distances[m];
        for (std::size_t m = 0; m < model.k_o; ++m) p.b_o[m] += s.mo.distances[m];
    }
    const double n = static_cast<double>(cache.size());
    for (double& v : p.b_a) v = 1.0 / (v / n + kKernelEps);
    for (double& v : p.b_o) v = 1.0 / (v / n + kKernelEps);
    return p;
}

inline KernelParams heuristic_b_init(const BelpmModel& model) {
    return heuristic_b_init(model, build_training_cache(model));
}

// ---------------------------------------------------------------------------
// Linear weights
// ---------------------------------------------------------------------------

struct LseReport {
    bool ridge_w = false;
    bool ridge_wa = false;
    bool ridge_wo = false;
};

/// Residual of the final output, used as the orbitofrontal reinforcement target.
inline Vector output_residuals(const Vector& r_u, const Responses& resp, const std::array<double, 3>& w) {
    Vector pe(r_u.size());
    for (std::size_t j = 0; j < r_u.size(); ++j) pe[j] = r_u[j] - cm_combine(resp.r_a[j], resp.r_o[j], w);
    return pe;
}

/// Fits w, then w_a against the expected punishments, then w_o against the
/// residual of the refitted output.
inline LseReport lse_fit_all(BelpmModel& model, const Responses& resp) {
    const auto& mem = model.memory;
    LseReport rep;
    const auto fw = lse_fit_w(resp.r_a, resp.r_o, mem.r_u);
    model.weights.w = fw.coef;
    rep.ridge_w = fw.ridge;
    const auto fwa = lse_fit_wa(mem.r_u, resp.r_a, mem.p_a_e);
    model.weights.w_a = fwa.coef;
    rep.ridge_wa = fwa.ridge;
    const Vector p_o_e = output_residuals(mem.r_u, resp, model.weights.w);
    const auto fwo = lse_fit_wo(resp.r_o, p_o_e);
    model.weights.w_o = fwo.coef;
    rep.ridge_wo = fwo.ridge;
    return rep;
}

namespace detail {

/// One steepest-descent step with exact line search on 0.5 * ||X c - y||^2.
template <std::size_t P>
void sd_quadratic_step(std::array<double, P>& c, const std::vector<std::array<double, P>>& rows,
                       std::span<const double> y) {
    std::array<double, P> g{};
    for (std::size_t n = 0; n < rows.size(); ++n) {
        double res = -y[n];
        for (std::size_t i = 0; i < P; ++i) res += rows[n][i] * c[i];
        for (std::size_t i = 0; i < P; ++i) g[i] += res * rows[n][i];
    }
    double gg = 0.0, ghg = 0.0;
    for (std::size_t i = 0; i < P; ++i) gg += g[i] * g[i];
    for (const auto& row : rows) {
        double xg = 0.0;
        for (std::size_t i = 0; i < P; ++i) xg += row[i] * g[i];
        ghg += xg * xg;
    }
    if (!(ghg > 0.0) || !std::isfinite(gg / ghg)) return;
    const double alpha = gg / ghg;
    for (std::size_t i = 0; i < P; ++i) c[i] -= alpha * g[i];
}

}  // namespace detail

/// Steepest descent on the same least-squares objectives the LSE solves.
inline void sd_linear_step(BelpmModel& model, const Responses& resp) {
    const auto& mem = model.memory;
    const std::size_t n = mem.size();
    std::vector<std::array<double, 3>> a(n), b(n);
    std::vector<std::array<double, 2>> c(n);
    for (std::size_t j = 0; j < n; ++j) {
        a[j] = {resp.r_a[j], resp.r_o[j], 1.0};
        b[j] = {mem.r_u[j], resp.r_a[j], 1.0};
        c[j] = {resp.r_o[j], 1.0};
    }
    detail::sd_quadratic_step(model.weights.w, a, mem.r_u);
    detail::sd_quadratic_step(model.weights.w_a, b, mem.p_a_e);
    const Vector p_o_e = output_residuals(mem.r_u, resp, model.weights.w);
    detail::sd_quadratic_step(model.weights.w_o, c, p_o_e);
}

// ---------------------------------------------------------------------------
// Losses and analytic gradients with respect to the kernel parameters
// ---------------------------------------------------------------------------

/// Which reinforcement drives the amygdala loss.
enum class PunishmentMode {
    Supervised,      // p_a = w_a . [r_u, r_a, 1]  (training inputs, target known)
    SelfReferenced,  // p_a = r - r_a              (unlabeled inputs)
};

/// A set of queries for one descent step. Expected punishments stored in the
/// model are held fixed for the duration of the step.
struct SdBatch {
    std::span<const SampleNeighbors> samples;
    std::span<const double> targets;  // required for Supervised
    PunishmentMode mode = PunishmentMode::Supervised;
    // Loss levels the step size is normalized by. When absent, the batch's own
    // losses are used; single-sample steps pass the loss of the whole pass.
    std::optional<double> loss_ref_a;
    std::optional<double> loss_ref_o;
};

struct Punishments {
    Vector p_a;
    Vector p_o;
};

inline Punishments punishments(const BelpmModel& model, const SdBatch& batch) {
    const auto& wt = model.weights;
    Punishments p{Vector(batch.samples.size()), Vector(batch.samples.size())};
    for (std::size_t j = 0; j < batch.samples.size(); ++j) {
        const double r_a = primary_response(model, batch.samples[j]);
        const double r_o = secondary_response(model, batch.samples[j]);
        if (batch.mode == PunishmentMode::Supervised)
            p.p_a[j] = cm_punishment_phase1(batch.targets[j], r_a, wt.w_a);
        else
            p.p_a[j] = cm_punishment_phase2(cm_combine(r_a, r_o, wt.w), r_a);
        p.p_o[j] = lo_punishment(r_o, wt.w_o);
    }
    return p;
}

inline double half_sq_norm(std::span<const double> v) noexcept {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return 0.5 * acc;
}

inline double loss_a(const BelpmModel& model, const SdBatch& batch) {
    return half_sq_norm(punishments(model, batch).p_a);
}

inline double loss_o(const BelpmModel& model, const SdBatch& batch) {
    return half_sq_norm(punishments(model, batch).p_o);
}

struct Gradients {
    Vector b_a;
    Vector b_o;
    double loss_a = 0.0;
    double loss_o = 0.0;
};

/// Analytic gradients of 0.5||p_a||^2 w.r.t. b_a and 0.5||p_o||^2 w.r.t. b_o.
///
/// Supervised:     dp_a/db_a = w_a2 * dr_a/db_a
/// SelfReferenced: dp_a/db_a = (w1 - 1) * dr_a/db_a, since r = w1 r_a + w2 r_o + w3
/// Both:           dp_o/db_o = w_o1 * dr_o/db_o
inline Gradients gradients(const BelpmModel& model, const SdBatch& batch) {
    if (!model.kernel.parametric()) throw UnsupportedKernelError("gradients: kernel has no trainable parameter");
    if (batch.mode == PunishmentMode::Supervised && batch.targets.size() != batch.samples.size())
        throw ArgumentError("gradients: supervised batch needs one target per sample");
    const auto& wt = model.weights;
    Gradients g{Vector(model.k_a, 0.0), Vector(model.k_o, 0.0)};
    Vector ga(model.k_a), go(model.k_o);
    for (std::size_t j = 0; j < batch.samples.size(); ++j) {
        const double r_a = primary_response(model, batch.samples[j], ga);
        const double r_o = secondary_response(model, batch.samples[j], go);
        double p_a, dpa_dra;
        if (batch.mode == PunishmentMode::Supervised) {
            p_a = cm_punishment_phase1(batch.targets[j], r_a, wt.w_a);
            dpa_dra = wt.w_a[1];
        } else {
            p_a = cm_punishment_phase2(cm_combine(r_a, r_o, wt.w), r_a);
            dpa_dra = kPhase2PunishmentWeights[0] * wt.w[0] + kPhase2PunishmentWeights[1];
        }
        const double p_o = lo_punishment(r_o, wt.w_o);
        g.loss_a += 0.5 * p_a * p_a;
        g.loss_o += 0.5 * p_o * p_o;
        for (std::size_t m = 0; m < model.k_a; ++m) g.b_a[m] += p_a * dpa_dra * ga[m];
        for (std::size_t m = 0; m < model.k_o; ++m) g.b_o[m] += p_o * wt.w_o[0] * go[m];
    }
    return g;
}

// ---------------------------------------------------------------------------
// Steepest-descent step on the kernel parameters
// ---------------------------------------------------------------------------

/// Persistent step-size multipliers; halved whenever a step is rejected.
struct SdState {
    double scale_a = 1.0;
    double scale_o = 1.0;
};

struct SdStepResult {
    bool accepted_a = false;
    bool accepted_o = false;
    double loss_a_before = 0.0;
    double loss_a_after = 0.0;
    double loss_o_before = 0.0;
    double loss_o_after = 0.0;
    std::vector<std::string> events;
};

/// Per-coordinate learning rates eta0 * b_m^2 / L. A step of this size changes
/// log(b_m) by eta0 times the relative loss sensitivity, independent of the
/// distance and target scales of the data.
inline Vector learning_rates(double eta0, std::span<const double> b, double loss_ref) {
    Vector rates(b.size());
    for (std::size_t m = 0; m < b.size(); ++m) rates[m] = eta0 * b[m] * b[m] / loss_ref;
    return rates;
}

/// Floor for loss normalization: a tiny fraction of the training targets' spread.
inline double loss_floor(const TrainingMemory& mem) {
    if (mem.size() == 0) return kKernelEps;
    double mean = 0.0;
    for (double r : mem.r_u) mean += r;
    mean /= static_cast<double>(mem.size());
    double ss = 0.0;
    for (double r : mem.r_u) ss += (r - mean) * (r - mean);
    return std::max(1e-12 * 0.5 * ss, 1e-300);
}

namespace detail {

inline constexpr int kMaxBacktracks = 30;

/// Projected descent b <- max(0, b - t * rate * grad) on the parameters in
/// place, halving t until the loss does not increase. Returns true when a step
/// was taken.
template <typename LossFn>
bool descend(Vector& params, const Vector& grad, const Vector& rates, double loss0, LossFn&& loss,
             double& loss_after, double& scale, const char* label, std::vector<std::string>& events) {
    loss_after = loss0;
    for (double g : grad) {
        if (!std::isfinite(g)) {
            scale *= 0.5;
            events.push_back(std::string(label) + ": non-finite gradient, step rejected, learning rate halved");
            return false;
        }
    }
    bool moves = false;
    for (std::size_t m = 0; m < params.size(); ++m) moves = moves || (rates[m] * grad[m] != 0.0);
    if (!moves) return false;

    const Vector start = params;
    double t = scale;
    for (int attempt = 0; attempt <= kMaxBacktracks; ++attempt, t *= 0.5) {
        for (std::size_t m = 0; m < params.size(); ++m)
            params[m] = std::max(0.0, start[m] - t * rates[m] * grad[m]);
        const double l = loss();
        if (std::isfinite(l) && l <= loss0) {
            if (attempt > 0) {
                scale *= 0.5;
                events.push_back(std::string(label) + ": loss increased at full step, learning rate halved");
            }
            loss_after = l;
            return true;
        }
    }
    params = start;
    scale *= 0.5;
    events.push_back(std::string(label) + ": no descent step found, step rejected");
    return false;
}

}  // namespace detail

/// b <- b - eta * grad for the amygdala and orbitofrontal kernel parameters,
/// with the linear weights and stored expected punishments held fixed.
inline SdStepResult sd_step(BelpmModel& model, const SdBatch& batch, double eta_a0, double eta_o0, SdState& state,
                            bool update_a = true, bool update_o = true) {
    const Gradients g = gradients(model, batch);
    SdStepResult res;
    res.loss_a_before = res.loss_a_after = g.loss_a;
    res.loss_o_before = res.loss_o_after = g.loss_o;
    const double floor = loss_floor(model.memory);

    if (update_a && g.loss_a > 0.0) {
        const Vector rates = learning_rates(eta_a0, model.b_a, std::max(batch.loss_ref_a.value_or(g.loss_a), floor));
        res.accepted_a = detail::descend(model.b_a, g.b_a, rates, g.loss_a, [&] { return loss_a(model, batch); },
                                         res.loss_a_after, state.scale_a, "b_a", res.events);
    }
    if (update_o && g.loss_o > 0.0) {
        const Vector rates = learning_rates(eta_o0, model.b_o, std::max(batch.loss_ref_o.value_or(g.loss_o), floor));
        res.accepted_o = detail::descend(model.b_o, g.b_o, rates, g.loss_o, [&] { return loss_o(model, batch); },
                                         res.loss_o_after, state.scale_o, "b_o", res.events);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Phase 1
// ---------------------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double loss_a = 0.0;
    double loss_o = 0.0;
    std::optional<double> train_nmse;
    std::optional<double> val_nmse;
    Vector b_a;
    Vector b_o;
};

struct LearningHistory {
    std::vector<EpochRecord> epochs;
    std::vector<std::string> events;
    bool ridge_used = false;
};

struct Phase1Result {
    BelpmModel model;
    LearningHistory history;
};

namespace detail {

inline std::optional<double> try_nmse(std::span<const double> pred, std::span<const double> target) {
    if (target.size() < 2) return std::nullopt;
    try {
        return nmse(pred, target);
    } catch (const UndefinedMetricError&) {
        return std::nullopt;
    }
}

inline Vector predict_cached(const BelpmModel& model, const NeighborCache& cache) {
    Vector out(cache.size());
    for (std::size_t j = 0; j < cache.size(); ++j)
        out[j] = cm_combine(primary_response(model, cache[j]), secondary_response(model, cache[j]),
                            model.weights.w);
    return out;
}

inline void note_lse(LearningHistory& h, const LseReport& r, std::size_t epoch) {
    if (r.ridge_w || r.ridge_wa || r.ridge_wo) {
        h.ridge_used = true;
        h.events.push_back("epoch " + std::to_string(epoch) + ": rank-deficient LSE, ridge fallback used");
    }
}

}  // namespace detail

/// First learning phase over the model's own training memory.
inline Phase1Result train_phase1(BelpmModel model, const EmbeddedDataset& val, const TrainConfig& config) {
    validate(model);
    validate(config, model);
    const NeighborCache cache = build_training_cache(model);
    const NeighborCache val_cache = val.empty() ? NeighborCache{} : build_query_cache(model, val.inputs);
    const Vector& r_u = model.memory.r_u;

    if (config.b_init.heuristic) {
        KernelParams p = heuristic_b_init(model, cache);
        model.b_a = std::move(p.b_a);
        model.b_o = std::move(p.b_o);
    } else {
        model.b_a.assign(model.k_a, config.b_init.value);
        model.b_o.assign(model.k_o, config.b_init.value);
    }

    LearningHistory history;
    Responses resp = batch_responses(model, cache);
    detail::note_lse(history, lse_fit_all(model, resp), 0);

    const bool lse_each_epoch = config.method == TrainMethod::HybridSdLse ||
                                config.method == TrainMethod::LseLinearHeuristicKernel;
    const bool sd_kernel = uses_kernel_sd(config.method);

    SdState state;
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(cache.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t e = 1; e <= config.epochs; ++e) {
        resp = batch_responses(model, cache);
        if (lse_each_epoch)
            detail::note_lse(history, lse_fit_all(model, resp), e);
        else if (config.method == TrainMethod::SdAll)
            sd_linear_step(model, resp);

        const SdBatch full{cache, r_u, PunishmentMode::Supervised, std::nullopt, std::nullopt};
        const Punishments p = punishments(model, full);
        EpochRecord rec;
        rec.epoch = e;
        rec.loss_a = half_sq_norm(p.p_a);
        rec.loss_o = half_sq_norm(p.p_o);
        rec.train_nmse = detail::try_nmse(detail::predict_cached(model, cache), r_u);
        if (!val.empty()) rec.val_nmse = detail::try_nmse(detail::predict_cached(model, val_cache), val.targets);
        rec.b_a = model.b_a;
        rec.b_o = model.b_o;
        history.epochs.push_back(std::move(rec));

        if (!sd_kernel) continue;
        if (config.mode == TrainMode::Batch) {
            auto step = sd_step(model, full, config.eta_a0, config.eta_o0, state);
            for (auto& ev : step.events) history.events.push_back("epoch " + std::to_string(e) + ": " + ev);
        } else {
            const double ref_a = history.epochs.back().loss_a;
            const double ref_o = history.epochs.back().loss_o;
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t j : order) {
                const SdBatch one{std::span(cache).subspan(j, 1), std::span(r_u).subspan(j, 1),
                                  PunishmentMode::Supervised, ref_a, ref_o};
                auto step = sd_step(model, one, config.eta_a0, config.eta_o0, state);
                for (auto& ev : step.events) history.events.push_back("epoch " + std::to_string(e) + ": " + ev);
            }
        }
    }

    resp = batch_responses(model, cache);
    if (lse_each_epoch) detail::note_lse(history, lse_fit_all(model, resp), config.epochs + 1);
    return {std::move(model), std::move(history)};
}

struct ModelConfig {
    std::size_t k_a = 5;
    std::size_t k_o = 10;
    Kernel kernel;
};

inline Phase1Result train_phase1(const EmbeddedDataset& train, const EmbeddedDataset& val, const ModelConfig& mc,
                                 const TrainConfig& config) {
    return train_phase1(make_model(train, mc.k_a, mc.k_o, mc.kernel), val, config);
}

// ---------------------------------------------------------------------------
// Phase 2
// ---------------------------------------------------------------------------

struct Phase2Result {
    BelpmModel model;
    std::vector<Vector> predictions;  // per epoch, each made before that sample's update
    std::vector<std::optional<double>> epoch_nmse;
    std::vector<std::string> events;
};

/// Second learning phase: sequential adaptation of the kernel parameters on an
/// unlabeled stream, with the model's own output standing in for the target.
/// Linear weights stay frozen. `targets` (optional) only feed the NMSE trace.
inline Phase2Result train_phase2(BelpmModel model, const std::vector<Vector>& stream, std::span<const double> targets,
                                 const TrainConfig& config, std::optional<std::size_t> epochs = std::nullopt) {
    validate(config);
    const std::size_t n_epochs = epochs.value_or(config.phase2_epochs);
    Phase2Result out;
    if (stream.empty() || n_epochs == 0) {
        out.model = std::move(model);
        return out;
    }
    validate(model);
    if (!model.kernel.parametric()) throw UnsupportedKernelError("train_phase2: kernel has no trainable parameter");
    if (!targets.empty() && targets.size() != stream.size())
        throw ArgumentError("train_phase2: targets must match the stream length");
    if (model.memory.p_a_e.size() != model.memory.size()) refresh_expected_punishments(model);

    const NeighborCache train_cache = build_training_cache(model);
    const NeighborCache cache = build_query_cache(model, stream);
    SdState state;
    for (std::size_t e = 1; e <= n_epochs; ++e) {
        const SdBatch pass{cache, {}, PunishmentMode::SelfReferenced, std::nullopt, std::nullopt};
        const Punishments p = punishments(model, pass);
        const double ref_a = half_sq_norm(p.p_a);
        const double ref_o = half_sq_norm(p.p_o);
        Vector preds(stream.size());
        for (std::size_t t = 0; t < stream.size(); ++t) {
            preds[t] = cm_combine(primary_response(model, cache[t]), secondary_response(model, cache[t]),
                                  model.weights.w);
            const SdBatch one{std::span(cache).subspan(t, 1), {}, PunishmentMode::SelfReferenced, ref_a, ref_o};
            auto step = sd_step(model, one, config.eta_a0, config.eta_o0, state);
            for (auto& ev : step.events)
                out.events.push_back("epoch " + std::to_string(e) + " sample " + std::to_string(t) + ": " + ev);
        }
        // Stored expected punishments follow the adapted b_a once per pass.
        batch_responses(model, train_cache);
        out.epoch_nmse.push_back(targets.empty() ? std::nullopt : detail::try_nmse(preds, targets));
        out.predictions.push_back(std::move(preds));
    }
    out.model = std::move(model);
    return out;
}

}  // namespace belpm
