#include "hicov/metrics.hpp"

#include "hicov/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace hicov {

double hhi(const WeightVector& w) { return w.values().squaredNorm(); }

double leverage(const WeightVector& w) { return w.values().lpNorm<1>(); }

double rdi(const WeightVector& w, const CovarianceMatrix& sigma_eval) {
    if (w.size() != sigma_eval.dim()) throw std::invalid_argument("rdi: dimension mismatch");
    const Vector variances = sigma_eval.matrix().diagonal();
    if ((variances.array() <= 0.0).any()) {
        throw std::invalid_argument("rdi: evaluation covariance needs a positive diagonal");
    }
    const double denominator = w.values().dot(variances.cwiseSqrt());
    if (denominator == 0.0) throw std::domain_error("rdi: zero weighted volatility");
    const double variance = w.values().dot(sigma_eval.matrix() * w.values());
    return std::sqrt(std::max(variance, 0.0)) / denominator;
}

double realized_risk(const WeightVector& w, const CovarianceMatrix& s_out) {
    if (w.size() != s_out.dim()) throw std::invalid_argument("realized_risk: dimension mismatch");
    return w.values().dot(s_out.matrix() * w.values());
}

double true_risk(const CovarianceMatrix& sigma) {
    Eigen::LLT<Matrix> chol(sigma.matrix());
    if (chol.info() != Eigen::Success) throw NumericalError("true_risk: covariance is singular");
    const double total = chol.solve(Vector::Ones(sigma.dim())).sum();
    if (!(total > 0.0)) throw NumericalError("true_risk: covariance is singular");
    return 1.0 / total;
}

std::vector<double> cumulative_wealth(std::span<const double> daily_returns) {
    std::vector<double> out;
    out.reserve(daily_returns.size());
    double value = 1.0;
    for (double r : daily_returns) {
        value *= 1.0 + r;
        out.push_back(value);
    }
    return out;
}

double max_drawdown(std::span<const double> daily_returns) {
    double peak = 1.0;
    double value = 1.0;
    double worst = 0.0;
    for (double r : daily_returns) {
        value *= 1.0 + r;
        peak = std::max(peak, value);
        worst = std::min(worst, value / peak - 1.0);
    }
    return worst;
}

namespace {

double sample_std(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    if (std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end()) return 0.0;
    const double mean = pairwise_sum(values) / static_cast<double>(values.size());
    std::vector<double> squares;
    squares.reserve(values.size());
    for (double v : values) squares.push_back((v - mean) * (v - mean));
    return std::sqrt(pairwise_sum(squares) / static_cast<double>(values.size() - 1));
}

}  // namespace

PerformanceReport performance_report(std::span<const double> daily_returns,
                                     std::span<const Rebalance> rebalances) {
    if (daily_returns.empty()) throw std::invalid_argument("performance_report: empty return series");
    const double annual = 252.0;
    PerformanceReport out;
    out.annual_return = pairwise_sum(daily_returns) / static_cast<double>(daily_returns.size()) * annual;
    out.annual_volatility = sample_std(daily_returns) * std::sqrt(annual);
    if (out.annual_volatility > 0.0) out.sharpe = out.annual_return / out.annual_volatility;

    std::vector<double> negative;
    for (double r : daily_returns) {
        if (r < 0.0) negative.push_back(r);
    }
    const double downside = sample_std(negative) * std::sqrt(annual);
    if (downside > 0.0) out.sortino = out.annual_return / downside;

    out.max_drawdown = max_drawdown(daily_returns);

    if (!rebalances.empty()) {
        double total = 0.0;
        for (const Rebalance& r : rebalances) {
            if (r.before.size() != r.after.size()) {
                throw std::invalid_argument("performance_report: rebalance size mismatch");
            }
            total += (r.after - r.before).lpNorm<1>();
        }
        out.turnover = total / static_cast<double>(rebalances.size());
    }
    return out;
}

}  // namespace hicov
