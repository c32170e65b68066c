// Command-line front end: series generation, embedding, training, prediction,
// evaluation and benchmark runs.
//
// Exit codes: 0 success, 2 argument errors, 3 numeric failures.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "belpm/belpm.hpp"

namespace {

constexpr int kExitArgument = 2;
constexpr int kExitNumeric = 3;

std::ofstream open_or_throw(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw belpm::ArgumentError("cannot write '" + path + "'");
    return out;
}

belpm::ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw belpm::ArgumentError("cannot open '" + path + "'");
    belpm::json j;
    try {
        in >> j;
    } catch (const belpm::json::exception& e) {
        throw belpm::ArgumentError("spec: " + std::string(e.what()));
    }
    return belpm::spec_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BELPM chaotic time-series forecasting"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a Lorenz or Henon series as t,value CSV");
    std::string system = "lorenz", gen_out;
    std::size_t gen_n = 1000, gen_warmup = 0;
    double gen_dt = 0.01, gen_noise = 0.0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--system", system, "lorenz | henon")->check(CLI::IsMember({"lorenz", "henon"}));
    gen->add_option("--n", gen_n, "number of samples")->check(CLI::PositiveNumber);
    gen->add_option("--dt", gen_dt, "sampling period in seconds (Lorenz)");
    gen->add_option("--noise-std", gen_noise, "standard deviation of additive white noise");
    gen->add_option("--seed", gen_seed, "noise seed");
    gen->add_option("--warmup", gen_warmup, "samples generated then discarded");
    gen->add_option("--out", gen_out, "output CSV")->required();

    // embed
    auto* emb = app.add_subcommand("embed", "Delay-embed a series CSV into a dataset CSV");
    std::string emb_series, emb_out;
    std::size_t emb_dim = 3, emb_lag = 1, emb_h = 1;
    emb->add_option("--series", emb_series, "t,value CSV")->required();
    emb->add_option("--dim", emb_dim, "embedding dimension");
    emb->add_option("--lag", emb_lag, "lag in samples");
    emb->add_option("--horizon", emb_h, "prediction horizon in samples");
    emb->add_option("--out", emb_out, "output dataset CSV")->required();

    // train
    auto* trn = app.add_subcommand("train", "Train a BELPM model on a dataset CSV");
    std::string trn_data, trn_config, trn_model, trn_val, trn_hist;
    trn->add_option("--data", trn_data, "training dataset CSV")->required();
    trn->add_option("--config", trn_config, "config file (JSON or key = value)");
    trn->add_option("--model-out", trn_model, "output model JSON")->required();
    trn->add_option("--val", trn_val, "validation dataset CSV");
    trn->add_option("--history-out", trn_hist, "learning history CSV");

    // predict
    auto* prd = app.add_subcommand("predict", "Predict targets of a dataset CSV");
    std::string prd_method = "belpm", prd_model, prd_train, prd_data, prd_out, prd_kernel = "inversion";
    std::size_t prd_k = 5, prd_adapt = 0;
    double prd_b = 1.0, prd_eta_a = 0.05, prd_eta_o = 0.05;
    prd->add_option("--method", prd_method, "belpm | wknn")->check(CLI::IsMember({"belpm", "wknn"}));
    prd->add_option("--model", prd_model, "model JSON (belpm)");
    prd->add_option("--train", prd_train, "training dataset CSV (wknn)");
    prd->add_option("--k", prd_k, "neighbors (wknn)");
    prd->add_option("--kernel", prd_kernel, "kernel (wknn)");
    prd->add_option("--b", prd_b, "kernel parameter for parametric kernels (wknn)");
    prd->add_option("--adapt-epochs", prd_adapt, "second-phase passes over the input stream (belpm)");
    prd->add_option("--eta-a0", prd_eta_a, "second-phase base rate for b_a");
    prd->add_option("--eta-o0", prd_eta_o, "second-phase base rate for b_o");
    prd->add_option("--data", prd_data, "dataset CSV")->required();
    prd->add_option("--out", prd_out, "predictions CSV")->required();

    // evaluate
    auto* evl = app.add_subcommand("evaluate", "NMSE and MSE of predictions against targets");
    std::string evl_pred, evl_target;
    evl->add_option("--pred", evl_pred, "CSV with a 'prediction' column (or last column)")->required();
    evl->add_option("--target", evl_target, "CSV whose last column holds the targets")->required();

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Run an experiment spec and write reports");
    std::string bench_spec, bench_out;
    bench->add_option("--spec", bench_spec, "experiment spec JSON")->required();
    bench->add_option("--out", bench_out, "output directory")->required();

    // structures
    auto* st = app.add_subcommand("structures", "Sweep neighbor counts for one experiment spec");
    std::string st_spec, st_out;
    std::vector<std::size_t> st_ka, st_ko;
    st->add_option("--spec", st_spec, "experiment spec JSON")->required();
    st->add_option("--k-a", st_ka, "amygdala neighbor counts")->required()->delimiter(',');
    st->add_option("--k-o", st_ko, "orbitofrontal neighbor counts (default 2*k_a)")->delimiter(',');
    st->add_option("--out", st_out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitArgument;
    }

    try {
        if (*gen) {
            belpm::TimeSeries s = system == "lorenz" ? belpm::generate_lorenz(belpm::LorenzParams{}, gen_dt, gen_n, gen_warmup)
                                                     : belpm::generate_henon(belpm::HenonParams{}, gen_n, gen_warmup);
            s = belpm::add_noise(s, gen_noise, gen_seed);
            auto out = open_or_throw(gen_out);
            belpm::write_series_csv(out, s);
        } else if (*emb) {
            std::ifstream in(emb_series);
            if (!in) throw belpm::ArgumentError("cannot open '" + emb_series + "'");
            const auto ds = belpm::embed(belpm::read_series_csv(in), emb_dim, emb_lag, emb_h);
            auto out = open_or_throw(emb_out);
            belpm::write_dataset_csv(out, ds);
        } else if (*trn) {
            const belpm::FullConfig cfg = trn_config.empty() ? belpm::FullConfig{} : belpm::load_config(trn_config);
            const auto train = belpm::read_dataset_csv_file(trn_data);
            const auto val = trn_val.empty() ? belpm::EmbeddedDataset{} : belpm::read_dataset_csv_file(trn_val);
            auto res = belpm::train_phase1(train, val, cfg.model, cfg.train);
            belpm::save_model(trn_model, res.model);
            if (!trn_hist.empty()) {
                auto out = open_or_throw(trn_hist);
                belpm::write_history_csv(out, res.history);
            }
            for (const auto& ev : res.history.events) std::cerr << "note: " << ev << '\n';
        } else if (*prd) {
            const auto data = belpm::read_dataset_csv_file(prd_data);
            belpm::Vector pred;
            if (prd_method == "belpm") {
                if (prd_model.empty()) throw belpm::ArgumentError("predict: --model is required for belpm");
                auto model = belpm::load_model(prd_model);
                if (prd_adapt > 0) {
                    belpm::TrainConfig tc;
                    tc.eta_a0 = prd_eta_a;
                    tc.eta_o0 = prd_eta_o;
                    auto res = belpm::train_phase2(std::move(model), data.inputs, {}, tc, prd_adapt);
                    pred = res.predictions.back();
                } else {
                    pred = belpm::belpm_predict_all(model, data.inputs);
                }
            } else {
                if (prd_train.empty()) throw belpm::ArgumentError("predict: --train is required for wknn");
                const auto train = belpm::read_dataset_csv_file(prd_train);
                const belpm::Kernel kernel{belpm::parse_kernel_kind(prd_kernel), 1.0};
                const belpm::Vector b{prd_b};
                pred = belpm::wknn_predict_all(train, data, prd_k, kernel, b);
            }
            auto out = open_or_throw(prd_out);
            out.precision(17);
            out << "index,prediction,target\n";
            for (std::size_t i = 0; i < pred.size(); ++i) out << i << ',' << pred[i] << ',' << data.targets[i] << '\n';
        } else if (*evl) {
            const auto pred = belpm::read_column_csv(evl_pred);
            const auto target = belpm::read_column_csv(evl_target);
            belpm::json j{{"n", target.size()}, {"mse", belpm::mse(pred, target)}};
            try {
                j["nmse"] = belpm::nmse(pred, target);
            } catch (const belpm::UndefinedMetricError&) {
                j["nmse"] = nullptr;
            }
            std::cout << j.dump(2) << '\n';
        } else if (*bench) {
            const auto spec = load_spec(bench_spec);
            const auto report = belpm::run_experiment(spec);
            belpm::write_report(bench_out, report);
            std::ostringstream table;
            belpm::write_metrics_csv(table, report);
            std::cout << table.str();
            for (const auto& h : report.horizons)
                if (h.error) {
                    std::cerr << "horizon " << h.horizon << " failed: " << *h.error << '\n';
                    return kExitNumeric;
                }
        } else if (*st) {
            const auto spec = load_spec(st_spec);
            if (!st_ko.empty() && st_ko.size() != st_ka.size())
                throw belpm::ArgumentError("structures: --k-o must match --k-a in length");
            std::vector<std::pair<std::size_t, std::size_t>> sweep;
            for (std::size_t i = 0; i < st_ka.size(); ++i)
                sweep.emplace_back(st_ka[i], st_ko.empty() ? 2 * st_ka[i] : st_ko[i]);
            const auto rows = belpm::compare_structures(spec, sweep);
            auto out = open_or_throw(st_out);
            out.precision(17);
            out << "k_a,k_o,horizon,belpm_nmse,wknn_nmse,error\n";
            for (const auto& row : rows) {
                if (!row.report) {
                    out << row.k_a << ',' << row.k_o << ",,,," << '"' << row.error.value_or("") << "\"\n";
                    continue;
                }
                for (const auto& h : row.report->horizons) {
                    out << row.k_a << ',' << row.k_o << ',' << h.horizon << ',';
                    if (h.belpm && h.belpm->nmse) out << *h.belpm->nmse;
                    out << ',';
                    if (h.wknn && h.wknn->nmse) out << *h.wknn->nmse;
                    out << ',';
                    if (h.error) out << '"' << *h.error << '"';
                    out << '\n';
                }
            }
        }
    } catch (const belpm::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitArgument;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return 0;
}
