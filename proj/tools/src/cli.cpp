#include "hicov_cli/cli.hpp"

#include "hicov/backtest.hpp"
#include "hicov/models.hpp"
#include "hicov/simulation.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>

namespace hicov::cli {

namespace fs = std::filesystem;

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string provenance_line(const nlohmann::json& config, std::uint64_t seed) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "# config_hash=%016llx seed=%llu",
                  static_cast<unsigned long long>(fnv1a(config.dump())),
                  static_cast<unsigned long long>(seed));
    return buf;
}

namespace {

/// Error carrying the pipeline stage that failed.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& ex) {
        throw StageError(name, ex.what());
    }
}

struct CommonOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required) {
    auto* config = cmd->add_option("--config", opts.config_path, "JSON configuration file");
    if (config_required) config->required()->check(CLI::ExistingFile);
    else config->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", opts.seed, "Base seed (overrides the config)");
    cmd->add_option("--workers", opts.workers, "Worker threads (0 = all cores)");
}

nlohmann::json read_json(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in);
}

class Output {
public:
    Output(const fs::path& dir, const std::string& provenance) : dir_(dir), provenance_(provenance) {
        fs::create_directories(dir_);
    }

    std::ofstream open(const std::string& name) const {
        const fs::path path = dir_ / name;
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << provenance_ << '\n';
        spdlog::info("writing {}", path.string());
        return out;
    }

private:
    fs::path dir_;
    std::string provenance_;
};

std::string file_safe(std::string s) {
    for (char& c : s) {
        if (c == '+') c = 'p';
    }
    return s;
}

/// Expands {"models": [...], ...} into one config per model.
std::vector<nlohmann::json> per_model_configs(const nlohmann::json& config) {
    std::vector<nlohmann::json> out;
    if (config.contains("models")) {
        for (const auto& model : config.at("models")) {
            nlohmann::json single = config;
            single.erase("models");
            single["model"] = model;
            out.push_back(std::move(single));
        }
    } else {
        out.push_back(config);
    }
    return out;
}

nlohmann::json apply_overrides(nlohmann::json config, const CommonOptions& opts) {
    if (opts.seed) config["seed"] = *opts.seed;
    if (opts.workers) config["workers"] = *opts.workers;
    return config;
}

std::uint64_t seed_of(const nlohmann::json& config) { return config.value("seed", std::uint64_t{42}); }

int run_simulate(const CommonOptions& opts, bool table) {
    const nlohmann::json config = stage("config", [&] { return apply_overrides(read_json(opts.config_path), opts); });
    const auto configs = per_model_configs(config);
    std::vector<SweepConfig> sweeps;
    stage("config", [&] {
        for (const auto& c : configs) sweeps.push_back(c.get<SweepConfig>());
        return 0;
    });
    const Output output(opts.out_dir, provenance_line(config, seed_of(config)));

    std::vector<SweepResult> results;
    for (const auto& sweep : sweeps) {
        const std::string model = to_string(sweep.model.kind);
        spdlog::info("{} {}: m={} p={}", table ? "table" : "sweep", model, sweep.realizations, sweep.model.p);
        results.push_back(stage(table ? "table" : "simulate",
                                [&] { return table ? run_table(sweep) : run_sweep(sweep); }));
        stage("output", [&] {
            auto out = output.open((table ? "table_long_" : "sweep_") + model + ".csv");
            write_long_csv(out, results.back());
            if (!table) {
                for (Strategy strategy : sweep.strategies) {
                    for (Metric metric : all_metrics()) {
                        auto plot = output.open("plot_" + model + "_" + file_safe(to_string(strategy)) + "_" +
                                                to_string(metric) + ".csv");
                        write_plot_csv(plot, results.back(), strategy, metric);
                    }
                }
            }
            return 0;
        });
    }
    if (table) {
        stage("output", [&] {
            for (Metric metric : all_metrics()) {
                auto out = output.open("table_" + to_string(metric) + ".csv");
                write_table_csv(out, results, metric);
            }
            return 0;
        });
    }
    return 0;
}

struct BacktestSettings {
    std::vector<EstimatorSpec> estimators;
    std::vector<Strategy> strategies;
    double max_missing_frac = 0.05;
    unsigned workers = 0;
};

BacktestSettings backtest_settings(const nlohmann::json& config) {
    BacktestSettings s;
    if (config.contains("estimators")) {
        for (const auto& e : config.at("estimators")) {
            if (e.is_string()) {
                EstimatorSpec spec;
                spec.kind = estimator_kind_from_string(e.get<std::string>());
                s.estimators.push_back(spec);
            } else {
                s.estimators.push_back(e.get<EstimatorSpec>());
            }
        }
    } else {
        for (EstimatorKind kind : all_estimator_kinds()) {
            EstimatorSpec spec;
            spec.kind = kind;
            s.estimators.push_back(spec);
        }
    }
    if (config.contains("strategies")) {
        for (const auto& name : config.at("strategies")) {
            s.strategies.push_back(strategy_from_string(name.get<std::string>()));
        }
    } else {
        s.strategies = {Strategy::Mvp, Strategy::MvpLongOnly, Strategy::Hrp};
    }
    s.max_missing_frac = config.value("max_missing_frac", s.max_missing_frac);
    s.workers = config.value("workers", s.workers);
    return s;
}

ReturnPanel load_returns(const std::string& prices_path, double max_missing_frac, const Output& output) {
    const auto raw = stage("ingest", [&] { return load_price_csv(prices_path); });
    const auto cleaned = stage("clean", [&] { return clean_prices(raw, max_missing_frac); });
    stage("output", [&] {
        auto out = output.open("cleaning.csv");
        out << "ticker,status\n";
        for (const auto& t : cleaned.panel.tickers) out << t << ",kept\n";
        for (const auto& t : cleaned.dropped) out << t << ",dropped\n";
        return 0;
    });
    spdlog::info("prices: {} tickers kept, {} dropped, {} dates", cleaned.panel.tickers.size(),
                 cleaned.dropped.size(), cleaned.panel.dates.size());
    return stage("returns", [&] { return compute_returns(cleaned.panel); });
}

int run_backtest_track(const CommonOptions& opts, const std::string& prices_path) {
    const nlohmann::json config = stage("config", [&] { return apply_overrides(read_json(opts.config_path), opts); });
    const auto settings = stage("config", [&] { return backtest_settings(config); });
    const Output output(opts.out_dir, provenance_line(config, 0));
    const ReturnPanel returns = load_returns(prices_path, settings.max_missing_frac, output);
    const int n = config.value("window_length", static_cast<int>(2 * returns.returns.p()));
    const int step = config.value("step", 10);
    const WindowPlan plan = stage("plan", [&] { return plan_windows(returns.returns.n(), n, step); });
    spdlog::info("moving windows: n={} step={} count={}", plan.window_length, plan.step, plan.count);
    const auto result = stage("track", [&] {
        return moving_window_track(returns, plan, settings.estimators, settings.strategies, settings.workers);
    });
    stage("output", [&] {
        auto out = output.open("track.csv");
        write_track_csv(out, result);
        return 0;
    });
    return 0;
}

int run_walk_forward(const CommonOptions& opts, const std::string& prices_path) {
    const nlohmann::json config = stage("config", [&] { return apply_overrides(read_json(opts.config_path), opts); });
    const auto settings = stage("config", [&] { return backtest_settings(config); });
    WalkForwardPlan plan;
    plan.t_in = config.value("t_in", plan.t_in);
    plan.t_out = config.value("t_out", plan.t_out);
    plan.rebalance_every = config.value("rebalance_every", plan.rebalance_every);
    const Output output(opts.out_dir, provenance_line(config, 0));
    const ReturnPanel returns = load_returns(prices_path, settings.max_missing_frac, output);
    const auto result = stage("walk-forward", [&] {
        return walk_forward(returns, plan, settings.estimators, settings.strategies, settings.workers);
    });
    stage("output", [&] {
        auto cumulative = output.open("cumulative.csv");
        write_cumulative_csv(cumulative, result);
        auto performance = output.open("performance.csv");
        write_performance_csv(performance, result);
        return 0;
    });
    return 0;
}

int run_eigs(const std::string& model, int p, double gamma, const std::string& out_path) {
    if (model != "nested") throw StageError("config", "eigs supports --model nested only");
    const auto roots = stage("eigs", [&] { return nested_sigma_eigenvalues(p, gamma); });
    const auto dense = stage("eigs", [&] { return build_nested_sigma(p, gamma).spectrum().eigenvalues; });

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw StageError("output", "cannot write " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    const nlohmann::json config{{"command", "eigs"}, {"model", model}, {"p", p}, {"gamma", gamma}};
    out << provenance_line(config, 0) << '\n';
    out << "k,root_finder,dense,relative_difference\n";
    char buf[160];
    for (int k = 0; k < p; ++k) {
        const double a = roots[static_cast<std::size_t>(k)];
        const double b = dense(k);
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.3e", k + 1, a, b,
                      std::abs(a - b) / std::max(std::abs(b), 1e-300));
        out << buf << '\n';
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"High-dimensional covariance estimation and portfolio allocation experiments"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")->capture_default_str();

    CommonOptions sim_opts;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo sweep over n (plot-ready CSV)");
    add_common(simulate, sim_opts, true);

    CommonOptions table_opts;
    auto* table = app.add_subcommand("table", "Fixed-n Monte Carlo tables including the population row");
    add_common(table, table_opts, true);

    CommonOptions track_opts;
    std::string track_prices;
    auto* track = app.add_subcommand("backtest-track", "Moving-window metric tracks on a price CSV");
    add_common(track, track_opts, false);
    track->add_option("--prices", track_prices, "Price CSV (date,TICKER1,...)")->required()->check(CLI::ExistingFile);

    CommonOptions wf_opts;
    std::string wf_prices;
    auto* wf = app.add_subcommand("walk-forward", "Yearly rebalanced walk-forward backtest");
    add_common(wf, wf_opts, false);
    wf->add_option("--prices", wf_prices, "Price CSV (date,TICKER1,...)")->required()->check(CLI::ExistingFile);

    std::string eig_model = "nested";
    int eig_p = 0;
    double eig_gamma = 0.1;
    std::string eig_out;
    auto* eigs = app.add_subcommand("eigs", "Nested-model eigenvalues: root finder next to a dense solver");
    eigs->add_option("--model", eig_model, "Population model")->capture_default_str();
    eigs->add_option("-p", eig_p, "Dimension")->required()->check(CLI::PositiveNumber);
    eigs->add_option("--gamma", eig_gamma, "Nested-model gamma")->capture_default_str();
    eigs->add_option("--out", eig_out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    auto logger = spdlog::get("hicov");
    if (!logger) logger = spdlog::stderr_color_mt("hicov");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(log_level));
    try {
        if (*simulate) return run_simulate(sim_opts, false);
        if (*table) return run_simulate(table_opts, true);
        if (*track) return run_backtest_track(track_opts, track_prices);
        if (*wf) return run_walk_forward(wf_opts, wf_prices);
        if (*eigs) return run_eigs(eig_model, eig_p, eig_gamma, eig_out);
    } catch (const StageError& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace hicov::cli
