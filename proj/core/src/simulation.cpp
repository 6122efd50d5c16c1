#include "hicov/simulation.hpp"

#include "hicov/metrics.hpp"
#include "hicov/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <tuple>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

namespace hicov {

std::string to_string(Metric metric) {
    switch (metric) {
        case Metric::Hhi: return "hhi";
        case Metric::Leverage: return "leverage";
        case Metric::Rdi: return "rdi";
        case Metric::RealizedRisk: return "r2_out";
    }
    return "unknown";
}

const std::vector<Metric>& all_metrics() {
    static const std::vector<Metric> all{Metric::Hhi, Metric::Leverage, Metric::Rdi,
                                         Metric::RealizedRisk};
    return all;
}

void SweepConfig::validate() const {
    model.validate();
    if (n_values.empty()) throw std::invalid_argument("sweep: n_values is empty");
    for (int n : n_values) {
        if (n < 2) throw std::invalid_argument("sweep: every n must be >= 2");
    }
    if (realizations < 1) throw std::invalid_argument("sweep: realizations must be >= 1");
    if (strategies.empty()) throw std::invalid_argument("sweep: strategies is empty");
    for (const auto& e : estimators) e.validate();
}

void to_json(nlohmann::json& j, const SweepConfig& cfg) {
    nlohmann::json strategies = nlohmann::json::array();
    for (Strategy s : cfg.strategies) strategies.push_back(to_string(s));
    j = nlohmann::json{{"model", cfg.model},
                       {"n_values", cfg.n_values},
                       {"realizations", cfg.realizations},
                       {"estimators", cfg.estimators},
                       {"strategies", strategies},
                       {"seed", cfg.base_seed},
                       {"workers", cfg.workers}};
}

void from_json(const nlohmann::json& j, SweepConfig& cfg) {
    SweepConfig out;
    out.model = j.at("model").get<ModelSpec>();
    if (j.contains("n_values")) out.n_values = j.at("n_values").get<std::vector<int>>();
    out.realizations = j.value("realizations", out.realizations);
    if (j.contains("estimators")) {
        for (const auto& e : j.at("estimators")) {
            if (e.is_string()) {
                EstimatorSpec spec;
                spec.kind = estimator_kind_from_string(e.get<std::string>());
                out.estimators.push_back(spec);
            } else {
                out.estimators.push_back(e.get<EstimatorSpec>());
            }
        }
    } else {
        for (EstimatorKind kind : all_estimator_kinds()) {
            EstimatorSpec spec;
            spec.kind = kind;
            out.estimators.push_back(spec);
        }
    }
    if (j.contains("strategies")) {
        out.strategies.clear();
        for (const auto& s : j.at("strategies")) out.strategies.push_back(strategy_from_string(s.get<std::string>()));
    }
    out.base_seed = j.value("seed", out.base_seed);
    out.workers = j.value("workers", out.workers);
    out.validate();
    cfg = std::move(out);
}

const CellSummary& SweepResult::at(const std::string& estimator, Strategy strategy, int n,
                                   Metric metric) const {
    const std::string name = to_string(strategy);
    for (const auto& cell : cells) {
        if (cell.estimator == estimator && cell.strategy == name && cell.n == n && cell.metric == metric) {
            return cell;
        }
    }
    throw std::out_of_range("no cell for " + estimator + "/" + name + "/n=" + std::to_string(n) +
                            "/" + to_string(metric));
}

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct Layout {
    std::vector<std::string> rows;
    std::size_t estimator_rows = 0;
    bool population = false;
    std::size_t strategies = 0;
    std::size_t ns = 0;
    std::size_t metrics = 0;

    std::size_t size() const { return rows.size() * strategies * ns * metrics; }
    std::size_t index(std::size_t row, std::size_t s, std::size_t n, std::size_t m) const {
        return ((row * strategies + s) * ns + n) * metrics + m;
    }
};

void score(std::vector<double>& values, const Layout& layout, std::size_t row, std::size_t s,
           std::size_t n, const WeightVector& w, const CovarianceMatrix& sigma) {
    values[layout.index(row, s, n, 0)] = hhi(w);
    values[layout.index(row, s, n, 1)] = leverage(w);
    values[layout.index(row, s, n, 2)] = rdi(w, sigma);
    values[layout.index(row, s, n, 3)] = realized_risk(w, sigma);
}

std::vector<double> run_realization(const SweepConfig& cfg, const Layout& layout, std::uint64_t r,
                                    const CovarianceMatrix* fixed_sigma, const CovarianceMatrix* fixed_root) {
    std::vector<double> values(layout.size(), kMissing);
    Rng rng = substream(cfg.base_seed, r);
    CovarianceMatrix sigma;
    CovarianceMatrix root;
    if (fixed_sigma) {
        sigma = *fixed_sigma;
        root = *fixed_root;
    } else {
        sigma = build_sigma(cfg.model, rng);
        root = matrix_sqrt(sigma);
    }
    const NoiseDistribution noise = noise_for(cfg.model);
    const WeightVector uniform = uniform_weights(sigma.dim());
    const std::size_t uniform_row = layout.rows.size() - 1;

    for (std::size_t ni = 0; ni < layout.ns; ++ni) {
        const EstimationWorkspace workspace(sample_panel_with_root(root, cfg.n_values[ni], noise, rng));
        for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
            EstimatorSpec spec = cfg.estimators[e];
            spec.grid_workers = 1;
            std::optional<CovarianceMatrix> xi;
            try {
                xi = estimate(workspace, spec);
            } catch (const std::exception& ex) {
                spdlog::debug("realization {} n={} estimator {} failed: {}", r, cfg.n_values[ni],
                              layout.rows[e], ex.what());
                continue;
            }
            for (std::size_t s = 0; s < layout.strategies; ++s) {
                try {
                    score(values, layout, e, s, ni, allocate(cfg.strategies[s], *xi, layout.rows[e]), sigma);
                } catch (const std::exception& ex) {
                    spdlog::debug("realization {} n={} {}/{} failed: {}", r, cfg.n_values[ni],
                                  layout.rows[e], to_string(cfg.strategies[s]), ex.what());
                }
            }
        }
        for (std::size_t s = 0; s < layout.strategies; ++s) {
            score(values, layout, uniform_row, s, ni, uniform, sigma);
            if (layout.population) {
                try {
                    score(values, layout, layout.estimator_rows, s, ni,
                          allocate(cfg.strategies[s], sigma, kPopulationRow), sigma);
                } catch (const std::exception& ex) {
                    spdlog::debug("realization {} population/{} failed: {}", r,
                                  to_string(cfg.strategies[s]), ex.what());
                }
            }
        }
    }
    return values;
}

SweepResult run(const SweepConfig& cfg, bool population) {
    cfg.validate();
    Layout layout;
    for (const auto& e : cfg.estimators) layout.rows.push_back(to_string(e.kind));
    layout.estimator_rows = layout.rows.size();
    layout.population = population;
    if (population) layout.rows.emplace_back(kPopulationRow);
    layout.rows.emplace_back(kUniformRow);
    layout.strategies = cfg.strategies.size();
    layout.ns = cfg.n_values.size();
    layout.metrics = all_metrics().size();

    std::optional<CovarianceMatrix> fixed_sigma;
    std::optional<CovarianceMatrix> fixed_root;
    if (cfg.model.kind != ModelKind::OneFactor) {
        Rng unused(cfg.base_seed);
        fixed_sigma = build_sigma(cfg.model, unused);
        fixed_root = matrix_sqrt(*fixed_sigma);
    }

    const auto m = static_cast<std::size_t>(cfg.realizations);
    std::vector<std::vector<double>> per_realization(m);
    parallel_for(m, cfg.workers, [&](std::size_t r) {
        per_realization[r] = run_realization(cfg, layout, r, fixed_sigma ? &*fixed_sigma : nullptr,
                                             fixed_root ? &*fixed_root : nullptr);
    });

    SweepResult result;
    const std::string model = to_string(cfg.model.kind);
    std::vector<double> column;
    column.reserve(m);
    for (std::size_t row = 0; row < layout.rows.size(); ++row) {
        for (std::size_t s = 0; s < layout.strategies; ++s) {
            for (std::size_t ni = 0; ni < layout.ns; ++ni) {
                for (std::size_t mi = 0; mi < layout.metrics; ++mi) {
                    column.clear();
                    const std::size_t idx = layout.index(row, s, ni, mi);
                    for (const auto& values : per_realization) {
                        if (!std::isnan(values[idx])) column.push_back(values[idx]);
                    }
                    CellSummary cell{model, layout.rows[row], to_string(cfg.strategies[s]),
                                     cfg.n_values[ni], all_metrics()[mi]};
                    cell.count = static_cast<int>(column.size());
                    cell.failures = static_cast<int>(m) - cell.count;
                    if (cell.count == 0) {
                        cell.mean = kMissing;
                        cell.std_error = kMissing;
                    } else {
                        cell.mean = pairwise_sum(column) / cell.count;
                        if (cell.count > 1) {
                            for (double& v : column) v = (v - cell.mean) * (v - cell.mean);
                            const double var = pairwise_sum(column) / (cell.count - 1);
                            cell.std_error = std::sqrt(var / cell.count);
                        }
                    }
                    if (cell.failures > 0 && mi == 0) {
                        spdlog::warn("{} {}/{} n={}: {} of {} realizations failed", model, cell.estimator,
                                     cell.strategy, cell.n, cell.failures, m);
                    }
                    result.cells.push_back(std::move(cell));
                }
            }
        }
    }
    return result;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg) { return run(cfg, false); }

SweepResult run_table(const SweepConfig& cfg) {
    if (cfg.n_values.size() != 1) throw std::invalid_argument("run_table: exactly one n is required");
    return run(cfg, true);
}

namespace {

std::string format_value(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void write_long_csv(std::ostream& out, const SweepResult& result) {
    out << "model,estimator,strategy,n,metric,mean,std_error,count,failures\n";
    for (const auto& c : result.cells) {
        out << c.model << ',' << c.estimator << ',' << c.strategy << ',' << c.n << ','
            << to_string(c.metric) << ',' << format_value(c.mean) << ',' << format_value(c.std_error)
            << ',' << c.count << ',' << c.failures << '\n';
    }
}

void write_table_csv(std::ostream& out, const std::vector<SweepResult>& per_model, Metric metric) {
    std::vector<std::string> rows;
    std::vector<std::pair<std::string, std::string>> columns;  // (model, strategy)
    std::map<std::tuple<std::string, std::string, std::string>, double> means;
    for (const auto& result : per_model) {
        for (const auto& c : result.cells) {
            if (c.metric != metric) continue;
            if (std::find(rows.begin(), rows.end(), c.estimator) == rows.end()) rows.push_back(c.estimator);
            const std::pair key{c.model, c.strategy};
            if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
            means[{c.estimator, c.model, c.strategy}] = c.mean;
        }
    }
    out << "estimator";
    for (const auto& [model, strategy] : columns) out << ',' << strategy << '@' << model;
    out << '\n';
    for (const auto& row : rows) {
        out << row;
        for (const auto& [model, strategy] : columns) {
            const auto it = means.find({row, model, strategy});
            out << ',' << (it == means.end() ? std::string() : format_value(it->second));
        }
        out << '\n';
    }
}

void write_plot_csv(std::ostream& out, const SweepResult& result, Strategy strategy, Metric metric) {
    const std::string name = to_string(strategy);
    std::vector<std::string> series;
    std::vector<int> ns;
    std::map<std::pair<std::string, int>, double> means;
    for (const auto& c : result.cells) {
        if (c.metric != metric || c.strategy != name) continue;
        if (std::find(series.begin(), series.end(), c.estimator) == series.end()) series.push_back(c.estimator);
        if (std::find(ns.begin(), ns.end(), c.n) == ns.end()) ns.push_back(c.n);
        means[{c.estimator, c.n}] = c.mean;
    }
    out << "n";
    for (const auto& s : series) out << ',' << s;
    out << '\n';
    for (int n : ns) {
        out << n;
        for (const auto& s : series) {
            const auto it = means.find({s, n});
            out << ',' << (it == means.end() ? std::string() : format_value(it->second));
        }
        out << '\n';
    }
}

}  // namespace hicov
