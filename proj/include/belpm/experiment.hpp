#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "belpm/io.hpp"
#include "belpm/learning.hpp"
#include "belpm/metrics.hpp"
#include "belpm/model.hpp"
#include "belpm/series.hpp"
#include "belpm/wknn.hpp"

namespace belpm {

enum class ChaoticSystem { Lorenz, Henon };

inline std::string_view system_name(ChaoticSystem s) noexcept { return s == ChaoticSystem::Lorenz ? "lorenz" : "henon"; }

inline ChaoticSystem parse_system(std::string_view s) {
    if (s == "lorenz") return ChaoticSystem::Lorenz;
    if (s == "henon") return ChaoticSystem::Henon;
    throw ArgumentError("unknown system '" + std::string(s) + "'");
}

struct BaselineConfig {
    bool enabled = true;
    std::optional<std::size_t> k;  // defaults to the model's k_a
    Kernel kernel{KernelKind::Inversion, 1.0};
    double b = 1.0;  // shared parameter for parametric kernels
};

struct ExperimentSpec {
    std::string name = "experiment";
    ChaoticSystem system = ChaoticSystem::Henon;
    double dt = 0.01;              // Lorenz integration/sampling step; Henon is fixed at 0.01
    std::size_t start_index = 0;   // first series sample used (e.g. 3200 = 32 s at dt 0.01)
    double noise_std = 0.0;
    std::size_t n_train = 800;
    std::size_t n_test = 100;
    std::size_t n_val = 0;
    std::vector<std::size_t> horizons{1};
    std::size_t dim = 3;
    std::size_t lag = 1;
    ModelConfig model;
    TrainConfig train;
    bool phase2 = false;
    BaselineConfig baseline;
    std::uint64_t seed = 0;  // noise seed
};

inline void validate(const ExperimentSpec& s) {
    if (s.horizons.empty()) throw ArgumentError("experiment: horizons must be non-empty");
    for (auto h : s.horizons)
        if (h < 1) throw ArgumentError("experiment: horizons must be >= 1");
    if (s.dim < 1 || s.lag < 1) throw ArgumentError("experiment: dim and lag must be >= 1");
    if (s.n_train < 2) throw ArgumentError("experiment: need at least two training samples");
    if (!(s.dt > 0.0)) throw ArgumentError("experiment: dt must be positive");
    if (!(s.noise_std >= 0.0)) throw ArgumentError("experiment: noise_std must be >= 0");
    validate(s.train);
}

struct MethodMetrics {
    std::optional<double> nmse;
    double mse = 0.0;
    double train_seconds = 0.0;
    double predict_seconds = 0.0;
};

struct HorizonResult {
    std::size_t horizon = 0;
    std::optional<MethodMetrics> belpm;     // after the first learning phase
    std::optional<MethodMetrics> belpm_slp;  // after the second learning phase
    std::optional<MethodMetrics> wknn;
    LearningHistory history;
    std::vector<std::optional<double>> phase2_nmse;
    Vector targets;
    Vector pred_belpm;
    Vector pred_slp;
    Vector pred_wknn;
    std::size_t parameter_count = 0;
    std::optional<std::string> error;
};

struct ExperimentReport {
    ExperimentSpec spec;
    std::vector<HorizonResult> horizons;
    double generate_seconds = 0.0;
};

// ---------------------------------------------------------------------------

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline MethodMetrics metrics_for(const Vector& pred, const Vector& target) {
    MethodMetrics m;
    m.mse = mse(pred, target);
    m.nmse = try_nmse(pred, target);
    return m;
}

}  // namespace detail

/// Series covering every horizon of the spec, noise included.
inline TimeSeries experiment_series(const ExperimentSpec& spec) {
    const std::size_t max_h = *std::max_element(spec.horizons.begin(), spec.horizons.end());
    const std::size_t total = spec.n_train + spec.n_test + spec.n_val;
    const std::size_t n = spec.start_index + total + (spec.dim - 1) * spec.lag + max_h;
    TimeSeries s = spec.system == ChaoticSystem::Lorenz ? generate_lorenz(LorenzParams{}, spec.dt, n)
                                                        : generate_henon(HenonParams{}, n);
    return add_noise(s, spec.noise_std, spec.seed);
}

/// Train/test/val pairs for one horizon drawn from the window starting at spec.start_index.
inline DatasetSplit experiment_split(const ExperimentSpec& spec, const TimeSeries& series, std::size_t horizon) {
    const std::size_t total = spec.n_train + spec.n_test + spec.n_val;
    const std::size_t len = total + (spec.dim - 1) * spec.lag + horizon;
    if (spec.start_index + len > series.size()) throw ArgumentError("experiment: series too short for window");
    TimeSeries window;
    window.dt = series.dt;
    window.origin_time = series.time_at(spec.start_index);
    window.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(spec.start_index),
                         series.values.begin() + static_cast<std::ptrdiff_t>(spec.start_index + len));
    return split(embed(window, spec.dim, spec.lag, horizon), spec.n_train, spec.n_test, spec.n_val);
}

inline HorizonResult run_horizon(const ExperimentSpec& spec, const TimeSeries& series, std::size_t horizon) {
    using detail::Clock;
    HorizonResult hr;
    hr.horizon = horizon;
    try {
        const DatasetSplit data = experiment_split(spec, series, horizon);
        hr.targets = data.test.targets;

        auto t0 = Clock::now();
        Phase1Result p1 = train_phase1(data.train, data.val, spec.model, spec.train);
        const double train_s = detail::seconds_since(t0);
        hr.history = std::move(p1.history);
        hr.parameter_count = p1.model.parameter_count();

        if (!data.test.empty()) {
            (void)belpm_predict_all(p1.model, data.test.inputs);  // warm-up
            t0 = Clock::now();
            hr.pred_belpm = belpm_predict_all(p1.model, data.test.inputs);
            MethodMetrics m = detail::metrics_for(hr.pred_belpm, hr.targets);
            m.predict_seconds = detail::seconds_since(t0);
            m.train_seconds = train_s;
            hr.belpm = m;

            if (spec.phase2) {
                t0 = Clock::now();
                Phase2Result p2 = train_phase2(p1.model, data.test.inputs, hr.targets, spec.train);
                const double adapt_s = detail::seconds_since(t0);
                hr.phase2_nmse = p2.epoch_nmse;
                for (auto& ev : p2.events) hr.history.events.push_back("phase2 " + ev);
                if (!p2.predictions.empty()) {
                    hr.pred_slp = p2.predictions.back();
                    MethodMetrics s = detail::metrics_for(hr.pred_slp, hr.targets);
                    s.train_seconds = train_s;
                    s.predict_seconds = adapt_s;
                    hr.belpm_slp = s;
                }
            }
        }

        if (spec.baseline.enabled && !data.test.empty()) {
            const std::size_t k = spec.baseline.k.value_or(spec.model.k_a);
            const Vector b{spec.baseline.b};
            (void)wknn_predict_all(data.train, data.test, k, spec.baseline.kernel, b);  // warm-up
            t0 = Clock::now();
            hr.pred_wknn = wknn_predict_all(data.train, data.test, k, spec.baseline.kernel, b);
            MethodMetrics m = detail::metrics_for(hr.pred_wknn, hr.targets);
            m.predict_seconds = detail::seconds_since(t0);
            hr.wknn = m;
        }
    } catch (const std::exception& e) {
        hr.error = e.what();
    }
    return hr;
}

/// Generate, embed, split, train, adapt, evaluate and compare against the
/// Wk-NN baseline for every horizon. Per-horizon failures are recorded in the
/// report rather than thrown.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
    validate(spec);
    ExperimentReport rep;
    rep.spec = spec;
    const auto t0 = detail::Clock::now();
    const TimeSeries series = experiment_series(spec);
    rep.generate_seconds = detail::seconds_since(t0);
    for (std::size_t h : spec.horizons) rep.horizons.push_back(run_horizon(spec, series, h));
    return rep;
}

struct StructureRow {
    std::size_t k_a = 0;
    std::size_t k_o = 0;
    std::optional<ExperimentReport> report;
    std::optional<std::string> error;
};

/// One experiment per (k_a, k_o); the baseline follows k_a unless pinned in the spec.
inline std::vector<StructureRow> compare_structures(const ExperimentSpec& spec,
                                                    const std::vector<std::pair<std::size_t, std::size_t>>& sweep) {
    if (sweep.empty()) throw ArgumentError("compare_structures: empty sweep");
    std::vector<StructureRow> rows;
    for (const auto& [ka, ko] : sweep) {
        StructureRow row{ka, ko, std::nullopt, std::nullopt};
        ExperimentSpec s = spec;
        s.model.k_a = ka;
        s.model.k_o = ko;
        try {
            ExperimentReport r = run_experiment(s);
            for (const auto& h : r.horizons)
                if (h.error && !row.error) row.error = h.error;
            row.report = std::move(r);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Spec / report serialization
// ---------------------------------------------------------------------------

inline json spec_to_json(const ExperimentSpec& s) {
    json j;
    j["name"] = s.name;
    j["system"] = std::string(system_name(s.system));
    j["dt"] = s.dt;
    j["start_index"] = s.start_index;
    j["noise_std"] = s.noise_std;
    j["n_train"] = s.n_train;
    j["n_test"] = s.n_test;
    j["n_val"] = s.n_val;
    j["horizons"] = s.horizons;
    j["dim"] = s.dim;
    j["lag"] = s.lag;
    j["seed"] = s.seed;
    j["phase2"] = s.phase2;
    j["model"] = {{"k_a", s.model.k_a},
                  {"k_o", s.model.k_o},
                  {"kernel", std::string(kernel_name(s.model.kernel.kind))},
                  {"rational_z", s.model.kernel.z}};
    j["train"] = {{"method", std::string(method_name(s.train.method))},
                  {"epochs", s.train.epochs},
                  {"eta_a0", s.train.eta_a0},
                  {"eta_o0", s.train.eta_o0},
                  {"mode", std::string(mode_name(s.train.mode))},
                  {"b_init", s.train.b_init.heuristic ? json("heuristic") : json(s.train.b_init.value)},
                  {"phase2_epochs", s.train.phase2_epochs},
                  {"seed", s.train.seed}};
    j["baseline"] = {{"enabled", s.baseline.enabled},
                     {"k", s.baseline.k.value_or(s.model.k_a)},
                     {"kernel", std::string(kernel_name(s.baseline.kernel.kind))},
                     {"b", s.baseline.b}};
    return j;
}

inline ExperimentSpec spec_from_json(const json& j) {
    if (!j.is_object()) throw ArgumentError("spec: expected a JSON object");
    ExperimentSpec s;
    try {
        s.name = j.value("name", s.name);
        if (j.contains("system")) s.system = parse_system(j["system"].get<std::string>());
        s.dt = j.value("dt", s.dt);
        s.start_index = j.value("start_index", s.start_index);
        if (j.contains("start_time")) {
            const double step = s.system == ChaoticSystem::Lorenz ? s.dt : kHenonDt;
            s.start_index = static_cast<std::size_t>(std::llround(j["start_time"].get<double>() / step));
        }
        s.noise_std = j.value("noise_std", s.noise_std);
        s.n_train = j.value("n_train", s.n_train);
        s.n_test = j.value("n_test", s.n_test);
        s.n_val = j.value("n_val", s.n_val);
        if (j.contains("horizons")) s.horizons = j["horizons"].get<std::vector<std::size_t>>();
        s.dim = j.value("dim", s.dim);
        s.lag = j.value("lag", s.lag);
        s.seed = j.value("seed", s.seed);
        s.phase2 = j.value("phase2", s.phase2);
        FullConfig fc{s.model, s.train};
        if (j.contains("model")) fc = parse_config(j["model"], fc);
        if (j.contains("train")) fc = parse_config(j["train"], fc);
        s.model = fc.model;
        s.train = fc.train;
        if (j.contains("baseline")) {
            const auto& b = j["baseline"];
            s.baseline.enabled = b.value("enabled", true);
            if (b.contains("k")) s.baseline.k = b["k"].get<std::size_t>();
            if (b.contains("kernel")) s.baseline.kernel.kind = parse_kernel_kind(b["kernel"].get<std::string>());
            s.baseline.kernel.z = b.value("rational_z", 1.0);
            s.baseline.b = b.value("b", 1.0);
        }
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("spec: ") + e.what());
    }
    validate(s);
    return s;
}

namespace detail {

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json metrics_json(const std::optional<MethodMetrics>& m, bool timing) {
    if (!m) return nullptr;
    json j{{"nmse", opt_json(m->nmse)}, {"mse", m->mse}};
    if (timing) {
        j["train_seconds"] = m->train_seconds;
        j["predict_seconds"] = m->predict_seconds;
    }
    return j;
}

}  // namespace detail

/// Machine-readable report. Timings are wall-clock and therefore excluded
/// unless requested, so that identical runs produce identical documents.
inline json report_to_json(const ExperimentReport& r, bool include_timing = false) {
    json j;
    j["schema"] = "belpm-report/1";
    j["spec"] = spec_to_json(r.spec);
    json hs = json::array();
    for (const auto& h : r.horizons) {
        json hj;
        hj["horizon"] = h.horizon;
        hj["error"] = h.error ? json(*h.error) : json(nullptr);
        hj["parameter_count"] = h.parameter_count;
        hj["belpm"] = detail::metrics_json(h.belpm, include_timing);
        hj["belpm_slp"] = detail::metrics_json(h.belpm_slp, include_timing);
        hj["wknn"] = detail::metrics_json(h.wknn, include_timing);
        json curve = json::array();
        for (const auto& e : h.history.epochs)
            curve.push_back({{"epoch", e.epoch},
                             {"loss_a", e.loss_a},
                             {"loss_o", e.loss_o},
                             {"train_nmse", detail::opt_json(e.train_nmse)},
                             {"val_nmse", detail::opt_json(e.val_nmse)}});
        hj["learning_curve"] = curve;
        json p2 = json::array();
        for (const auto& v : h.phase2_nmse) p2.push_back(detail::opt_json(v));
        hj["phase2_nmse"] = p2;
        hj["events"] = h.history.events;
        hs.push_back(hj);
    }
    j["horizons"] = hs;
    if (include_timing) j["generate_seconds"] = r.generate_seconds;
    return j;
}

inline json timing_to_json(const ExperimentReport& r) {
    json j;
    j["generate_seconds"] = r.generate_seconds;
    json hs = json::array();
    for (const auto& h : r.horizons)
        hs.push_back({{"horizon", h.horizon},
                      {"belpm", detail::metrics_json(h.belpm, true)},
                      {"belpm_slp", detail::metrics_json(h.belpm_slp, true)},
                      {"wknn", detail::metrics_json(h.wknn, true)}});
    j["horizons"] = hs;
    return j;
}

/// Per-horizon metrics table: horizon,method,nmse,mse.
inline void write_metrics_csv(std::ostream& out, const ExperimentReport& r) {
    out.precision(17);
    out << "horizon,method,nmse,mse\n";
    auto row = [&](std::size_t h, const char* name, const std::optional<MethodMetrics>& m) {
        if (!m) return;
        out << h << ',' << name << ',';
        if (m->nmse) out << *m->nmse;
        out << ',' << m->mse << '\n';
    };
    for (const auto& h : r.horizons) {
        row(h.horizon, "belpm", h.belpm);
        row(h.horizon, "belpm_slp", h.belpm_slp);
        row(h.horizon, "wknn", h.wknn);
    }
}

/// Plot-ready per-sample predictions for one horizon.
inline void write_predictions_csv(std::ostream& out, const HorizonResult& h) {
    out.precision(17);
    out << "index,target,belpm,belpm_slp,wknn\n";
    for (std::size_t i = 0; i < h.targets.size(); ++i) {
        out << i << ',' << h.targets[i] << ',';
        if (i < h.pred_belpm.size()) out << h.pred_belpm[i];
        out << ',';
        if (i < h.pred_slp.size()) out << h.pred_slp[i];
        out << ',';
        if (i < h.pred_wknn.size()) out << h.pred_wknn[i];
        out << '\n';
    }
}

/// Writes report.json, timing.json, metrics.csv and per-horizon history and
/// prediction CSVs into `dir`.
inline void write_report(const std::filesystem::path& dir, const ExperimentReport& r) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& name) { return detail::open_out((dir / name).string()); };
    open("report.json") << report_to_json(r).dump(2) << '\n';
    open("timing.json") << timing_to_json(r).dump(2) << '\n';
    {
        auto out = open("metrics.csv");
        write_metrics_csv(out, r);
    }
    for (const auto& h : r.horizons) {
        auto hist = open("history_h" + std::to_string(h.horizon) + ".csv");
        write_history_csv(hist, h.history);
        auto pred = open("predictions_h" + std::to_string(h.horizon) + ".csv");
        write_predictions_csv(pred, h);
    }
}

}  // namespace belpm
