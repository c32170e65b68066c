#pragma once

// CSV and JSON persistence for series, datasets, models, configs and histories.
// Requires nlohmann/json (json.hpp) on the include path.

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "belpm/error.hpp"
#include "belpm/learning.hpp"
#include "belpm/model.hpp"
#include "belpm/series.hpp"

namespace belpm {

using json = nlohmann::json;

inline constexpr const char* kModelVersion = "belpm-model/1";

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ArgumentError("csv line " + std::to_string(line_no) + ": '" + s + "' is not a number");
    }
    if (pos != s.size()) throw ArgumentError("csv line " + std::to_string(line_no) + ": '" + s + "' is not a number");
    return v;
}

/// Header plus numeric rows; every row must have the header's column count.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ArgumentError("csv line " + std::to_string(line_no) + ": expected " +
                                std::to_string(t.header.size()) + " columns, found " + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c, line_no));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw ArgumentError("csv: missing header row");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path + "'");
    return read_csv(in);
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write '" + path + "'");
    out.precision(17);
    return out;
}

}  // namespace detail

inline void write_series_csv(std::ostream& out, const TimeSeries& s) {
    out.precision(17);
    out << "t,value\n";
    for (std::size_t i = 0; i < s.size(); ++i) out << s.time_at(i) << ',' << s.values[i] << '\n';
}

inline TimeSeries read_series_csv(std::istream& in) {
    const auto t = detail::read_csv(in);
    if (t.header.size() != 2) throw ArgumentError("series csv: expected columns t,value");
    TimeSeries s;
    for (const auto& row : t.rows) s.values.push_back(row[1]);
    if (t.rows.size() >= 2) s.dt = t.rows[1][0] - t.rows[0][0];
    if (!t.rows.empty()) s.origin_time = t.rows[0][0];
    validate(s);
    return s;
}

inline void write_dataset_csv(std::ostream& out, const EmbeddedDataset& ds) {
    out.precision(17);
    for (std::size_t r = 0; r < ds.dim; ++r) out << "x" << r << ',';
    out << "target\n";
    for (std::size_t j = 0; j < ds.size(); ++j) {
        for (double v : ds.inputs[j]) out << v << ',';
        out << ds.targets[j] << '\n';
    }
}

/// R input columns followed by one target column.
inline EmbeddedDataset read_dataset_csv(std::istream& in) {
    const auto t = detail::read_csv(in);
    if (t.header.size() < 2) throw ArgumentError("dataset csv: need at least one input column and a target column");
    EmbeddedDataset ds;
    ds.dim = t.header.size() - 1;
    for (const auto& row : t.rows) {
        ds.inputs.emplace_back(row.begin(), row.end() - 1);
        ds.targets.push_back(row.back());
    }
    return ds;
}

inline EmbeddedDataset read_dataset_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path + "'");
    return read_dataset_csv(in);
}

/// A single column of values; the column named `prediction` or `target` is
/// preferred, otherwise the last column is used.
inline Vector read_column_csv(const std::string& path) {
    const auto t = detail::read_csv_file(path);
    std::size_t col = t.header.size() - 1;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == "prediction") col = i;
    Vector out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(row[col]);
    return out;
}

inline void write_history_csv(std::ostream& out, const LearningHistory& h) {
    out.precision(17);
    out << "epoch,loss_a,loss_o,train_nmse,val_nmse\n";
    for (const auto& e : h.epochs) {
        out << e.epoch << ',' << e.loss_a << ',' << e.loss_o << ',';
        if (e.train_nmse) out << *e.train_nmse;
        out << ',';
        if (e.val_nmse) out << *e.val_nmse;
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Model JSON
// ---------------------------------------------------------------------------

inline json model_to_json(const BelpmModel& m) {
    json mem;
    mem["s_u"] = m.memory.s_u;
    json th = json::array();
    for (const auto& t : m.memory.th_u) th.push_back({t[0], t[1]});
    mem["th_u"] = th;
    mem["r_u"] = m.memory.r_u;
    mem["p_a_e"] = m.memory.p_a_e;
    return {
        {"version", kModelVersion},
        {"k_a", m.k_a},
        {"k_o", m.k_o},
        {"kernel", {{"kind", std::string(kernel_name(m.kernel.kind))}, {"z", m.kernel.z}}},
        {"b_a", m.b_a},
        {"b_o", m.b_o},
        {"w", m.weights.w},
        {"w_a", m.weights.w_a},
        {"w_o", m.weights.w_o},
        {"embedding", {{"dim", m.memory.dim()}, {"lag", m.lag}, {"horizon", m.horizon}}},
        {"memory", mem},
    };
}

inline BelpmModel model_from_json(const json& j) {
    if (!j.contains("version") || !j["version"].is_string())
        throw ArgumentError("model json: missing version tag");
    if (j["version"].get<std::string>() != kModelVersion)
        throw ArgumentError("model json: unsupported version '" + j["version"].get<std::string>() + "'");
    try {
        BelpmModel m;
        m.k_a = j.at("k_a").get<std::size_t>();
        m.k_o = j.at("k_o").get<std::size_t>();
        m.kernel.kind = parse_kernel_kind(j.at("kernel").at("kind").get<std::string>());
        m.kernel.z = j.at("kernel").value("z", 1.0);
        m.b_a = j.at("b_a").get<Vector>();
        m.b_o = j.at("b_o").get<Vector>();
        m.weights.w = j.at("w").get<std::array<double, 3>>();
        m.weights.w_a = j.at("w_a").get<std::array<double, 3>>();
        m.weights.w_o = j.at("w_o").get<std::array<double, 2>>();
        if (j.contains("embedding")) {
            m.lag = j["embedding"].value("lag", std::size_t{1});
            m.horizon = j["embedding"].value("horizon", std::size_t{1});
        }
        const auto& mem = j.at("memory");
        m.memory.s_u = mem.at("s_u").get<std::vector<Vector>>();
        for (const auto& t : mem.at("th_u")) m.memory.th_u.push_back(t.get<MaxMin>());
        m.memory.r_u = mem.at("r_u").get<Vector>();
        m.memory.p_a_e = mem.at("p_a_e").get<Vector>();
        validate(m);
        return m;
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("model json: ") + e.what());
    }
}

inline void save_model(const std::string& path, const BelpmModel& m) {
    auto out = detail::open_out(path);
    out << model_to_json(m).dump(2) << '\n';
}

inline BelpmModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ArgumentError("model json: " + std::string(e.what()));
    }
    return model_from_json(j);
}

// ---------------------------------------------------------------------------
// Training configuration: JSON object or `key = value` lines
// ---------------------------------------------------------------------------

struct FullConfig {
    ModelConfig model;
    TrainConfig train;
};

namespace detail {

inline void apply_config_value(FullConfig& c, const std::string& key, const json& v) {
    auto as_string = [&] { return v.is_string() ? v.get<std::string>() : v.dump(); };
    auto as_double = [&] { return v.is_number() ? v.get<double>() : std::stod(v.get<std::string>()); };
    auto as_size = [&] {
        const double d = as_double();
        if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
            throw ArgumentError("config: '" + key + "' must be a non-negative integer");
        return static_cast<std::size_t>(d);
    };
    if (key == "method") c.train.method = parse_method(as_string());
    else if (key == "epochs") c.train.epochs = as_size();
    else if (key == "eta_a0") c.train.eta_a0 = as_double();
    else if (key == "eta_o0") c.train.eta_o0 = as_double();
    else if (key == "mode") c.train.mode = parse_mode(as_string());
    else if (key == "k_a") c.model.k_a = as_size();
    else if (key == "k_o") c.model.k_o = as_size();
    else if (key == "kernel") c.model.kernel.kind = parse_kernel_kind(as_string());
    else if (key == "rational_z") c.model.kernel.z = as_double();
    else if (key == "b_init") {
        const std::string s = as_string();
        if (s == "heuristic") {
            c.train.b_init = {true, 1.0};
        } else {
            c.train.b_init.heuristic = false;
            try {
                c.train.b_init.value = std::stod(s);
            } catch (const std::exception&) {
                throw ArgumentError("config: b_init must be 'heuristic' or a number");
            }
        }
    } else if (key == "phase2_epochs") c.train.phase2_epochs = as_size();
    else if (key == "seed") c.train.seed = static_cast<std::uint64_t>(as_size());
    else throw ArgumentError("config: unknown key '" + key + "'");
}

}  // namespace detail

inline FullConfig parse_config(const json& j, FullConfig base = {}) {
    if (!j.is_object()) throw ArgumentError("config: expected a JSON object");
    try {
        for (const auto& [k, v] : j.items()) detail::apply_config_value(base, k, v);
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw;
    }
    validate(base.train);
    validate(base.model.kernel);
    return base;
}

inline FullConfig parse_config_text(const std::string& text) {
    const std::string t = detail::trim(text);
    if (!t.empty() && t.front() == '{') {
        try {
            return parse_config(json::parse(t));
        } catch (const json::parse_error& e) {
            throw ArgumentError(std::string("config: ") + e.what());
        }
    }
    json j = json::object();
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("config line " + std::to_string(line_no) + ": expected key = value");
        j[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return parse_config(j);
}

inline FullConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace belpm
