#pragma once

#include "hicov/allocation.hpp"
#include "hicov/estimators.hpp"
#include "hicov/models.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hicov {

enum class Metric { Hhi, Leverage, Rdi, RealizedRisk };

/// Column names: hhi, leverage, rdi, r2_out.
std::string to_string(Metric metric);
const std::vector<Metric>& all_metrics();

/// Row labels used besides estimator names.
inline constexpr const char* kUniformRow = "uniform";
inline constexpr const char* kPopulationRow = "population";

struct SweepConfig {
    ModelSpec model;
    std::vector<int> n_values{200};
    int realizations = 100;
    std::vector<EstimatorSpec> estimators;
    std::vector<Strategy> strategies{Strategy::Mvp};
    std::uint64_t base_seed = 42;
    /// Parallel realizations; 0 means all available cores.
    unsigned workers = 0;

    void validate() const;
};

/// Keys: model, n_values, realizations, estimators (names or EstimatorSpec
/// objects), strategies, seed, workers.
void to_json(nlohmann::json& j, const SweepConfig& cfg);
void from_json(const nlohmann::json& j, SweepConfig& cfg);

/// Mean and spread of one metric over the realizations that succeeded.
struct CellSummary {
    std::string model;
    std::string estimator;
    std::string strategy;
    int n = 0;
    Metric metric = Metric::Hhi;
    double mean = 0.0;
    double std_error = 0.0;
    int count = 0;
    int failures = 0;
};

struct SweepResult {
    std::vector<CellSummary> cells;

    /// Throws std::out_of_range when the cell is absent.
    const CellSummary& at(const std::string& estimator, Strategy strategy, int n, Metric metric) const;
};

/// Monte Carlo over realizations r = 0..m-1, each on the substream
/// base_seed ^ r. One-factor loadings are drawn once per realization, then one
/// panel per n in configuration order. HHI and leverage come from the weights,
/// RDI and realized risk are scored against the population covariance. A
/// uniform-portfolio row is appended for every strategy. Output does not
/// depend on the worker count.
SweepResult run_sweep(const SweepConfig& cfg);

/// run_sweep for a single n plus a population row where each strategy is fed
/// the true covariance directly.
SweepResult run_table(const SweepConfig& cfg);

/// Long-form CSV: model,estimator,strategy,n,metric,mean,std_error,count,failures.
void write_long_csv(std::ostream& out, const SweepResult& result);

/// One table per metric: rows are estimators (plus the population and uniform
/// rows), columns are strategy@model, cells hold the mean.
void write_table_csv(std::ostream& out, const std::vector<SweepResult>& per_model, Metric metric);

/// Plot-ready series: x = n, one column per estimator plus the uniform baseline.
void write_plot_csv(std::ostream& out, const SweepResult& result, Strategy strategy, Metric metric);

}  // namespace hicov
