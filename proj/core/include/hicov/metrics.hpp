#pragma once

#include "hicov/allocation.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hicov {

/// Herfindahl-Hirschman index sum w_i^2.
double hhi(const WeightVector& w);

/// Gross exposure sum |w_i|.
double leverage(const WeightVector& w);

/// sqrt(w^T Sigma w) / (w^T sqrt(diag Sigma)).
double rdi(const WeightVector& w, const CovarianceMatrix& sigma_eval);

/// w^T S_out w.
double realized_risk(const WeightVector& w, const CovarianceMatrix& s_out);

/// 1 / (1^T Sigma^{-1} 1).
double true_risk(const CovarianceMatrix& sigma);

struct PerformanceReport {
    double annual_return = 0.0;
    double annual_volatility = 0.0;
    std::optional<double> sharpe;
    double max_drawdown = 0.0;
    std::optional<double> sortino;
    double turnover = 0.0;
};

/// One rebalance: the drifted holdings just before it and the new target.
struct Rebalance {
    Vector before;
    Vector after;
};

/// Annualized statistics of a daily return series. Mean is scaled by 252,
/// standard deviations (sample, ddof = 1) by sqrt(252). Drawdown is measured
/// on V_t = prod (1 + r_s) with V_0 = 1. Turnover averages sum_i |after - before|
/// over the supplied rebalances (0 when there are none).
PerformanceReport performance_report(std::span<const double> daily_returns,
                                     std::span<const Rebalance> rebalances = {});

/// Cumulative wealth V_t = prod_{s<=t} (1 + r_s), without the initial 1.
std::vector<double> cumulative_wealth(std::span<const double> daily_returns);

/// min_t (V_t / max_{s<=t} V_s - 1) with V_0 = 1 included in the running max.
double max_drawdown(std::span<const double> daily_returns);

}  // namespace hicov
