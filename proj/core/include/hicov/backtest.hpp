#pragma once

#include "hicov/allocation.hpp"
#include "hicov/estimators.hpp"
#include "hicov/metrics.hpp"
#include "hicov/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hicov {

/// Adjusted close prices, one row per ticker; NaN marks a missing entry.
struct PricePanel {
    std::vector<std::string> dates;    // ISO-8601, strictly increasing
    std::vector<std::string> tickers;
    Matrix prices;                     // tickers x dates

    void validate() const;
};

/// Parses `date,T1,T2,...` CSV. Empty cells are missing; any other
/// unparseable cell, bad date, or ragged row is an error naming the line.
PricePanel read_price_csv(std::istream& in);
PricePanel load_price_csv(const std::filesystem::path& path);

struct CleanedPrices {
    PricePanel panel;
    std::vector<std::string> dropped;
};

/// Drops tickers whose missing fraction is >= max_missing_frac or whose first
/// observation is missing, then forward-fills the remaining gaps.
CleanedPrices clean_prices(const PricePanel& raw, double max_missing_frac = 0.05);

struct ReturnPanel {
    std::vector<std::string> dates;  // date of the later price in each pair
    std::vector<std::string> tickers;
    DataPanel returns;               // tickers x (T - 1)
};

/// r_t = (s_t - s_{t-1}) / s_{t-1}.
ReturnPanel compute_returns(const PricePanel& prices);

struct WindowPlan {
    int window_length = 0;
    int step = 10;
    int count = 0;
};

/// count = floor((T - 2n) / step); window k uses [k step, k step + n) in
/// sample and the following n days out of sample.
WindowPlan plan_windows(Eigen::Index total_days, int window_length, int step);

struct TrackRecord {
    int window = 0;
    std::string window_end_date;
    std::string estimator;
    std::string strategy;
    Metric metric = Metric::Hhi;
    double value = 0.0;
};

struct TrackFailure {
    int window = 0;
    std::string estimator;
    std::string strategy;
    std::string message;
};

struct TrackResult {
    std::vector<TrackRecord> records;
    std::vector<TrackFailure> failures;
};

/// Per window: demeaned in-sample covariance, estimate, weights, HHI and
/// leverage in sample, RDI and realized risk against the demeaned covariance of
/// the next window. A uniform row is added for every strategy.
TrackResult moving_window_track(const ReturnPanel& returns, const WindowPlan& plan,
                                const std::vector<EstimatorSpec>& estimators,
                                const std::vector<Strategy>& strategies, unsigned workers = 0);

/// Columns: window,window_end_date,estimator,strategy,metric,value.
void write_track_csv(std::ostream& out, const TrackResult& result);

struct WalkForwardPlan {
    int t_in = 756;
    int t_out = 252;
    int rebalance_every = 252;
};

/// Start indices s_k = t_in + k * rebalance_every with s_k + t_out <= T.
std::vector<Eigen::Index> rebalance_starts(Eigen::Index total_days, const WalkForwardPlan& plan);

struct WalkForwardSeries {
    std::string estimator;
    std::string strategy;
    std::vector<double> daily_returns;
    std::vector<double> cumulative;  // V_t, V_0 = 1 omitted
    std::vector<Rebalance> rebalances;
    PerformanceReport report;

    std::string label() const { return estimator + ":" + strategy; }
};

struct WalkForwardResult {
    std::vector<std::string> dates;  // out-of-sample days
    std::vector<WalkForwardSeries> series;
    std::vector<TrackFailure> failures;
};

/// Estimates on the trailing t_in days at each start, then holds the
/// allocation (drifting with returns) for t_out days. The uniform baseline is
/// bought once and never rebalanced. A combination whose estimate fails at
/// any start is reported as a failure and left out.
WalkForwardResult walk_forward(const ReturnPanel& returns, const WalkForwardPlan& plan,
                               const std::vector<EstimatorSpec>& estimators,
                               const std::vector<Strategy>& strategies, unsigned workers = 0);

/// Daily portfolio returns of holdings `weights` bought at the start of
/// columns [first, first + count) and left to drift. `final_weights` receives
/// the drifted weights at the end.
std::vector<double> drifted_returns(const DataPanel& returns, Eigen::Index first, Eigen::Index count,
                                    const Vector& weights, Vector* final_weights = nullptr);

/// Columns: date then one cumulative-wealth column per series.
void write_cumulative_csv(std::ostream& out, const WalkForwardResult& result);

/// Columns: estimator,strategy,annual_return,annual_volatility,sharpe,max_drawdown,sortino,turnover.
void write_performance_csv(std::ostream& out, const WalkForwardResult& result);

}  // namespace hicov
