#include "hicov/backtest.hpp"

#include "hicov/models.hpp"
#include "hicov/parallel.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hicov {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    const int month = std::stoi(s.substr(5, 2));
    const int day = std::stoi(s.substr(8, 2));
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_value(*v) : ""; }

}  // namespace

void PricePanel::validate() const {
    if (prices.rows() != static_cast<Eigen::Index>(tickers.size()) ||
        prices.cols() != static_cast<Eigen::Index>(dates.size())) {
        throw std::invalid_argument("price panel: shape does not match tickers x dates");
    }
    for (std::size_t t = 1; t < dates.size(); ++t) {
        if (!(dates[t - 1] < dates[t])) {
            throw std::invalid_argument("price panel: dates not strictly increasing at " + dates[t]);
        }
    }
}

PricePanel read_price_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("price CSV: missing header");
    auto header = split_csv_line(line);
    if (header.size() < 2 || trim(header[0]) != "date") {
        throw std::invalid_argument("price CSV: header must be date,TICKER1,...");
    }
    PricePanel panel;
    for (std::size_t i = 1; i < header.size(); ++i) panel.tickers.push_back(trim(header[i]));

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw std::invalid_argument("price CSV line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
        }
        const std::string date = trim(fields[0]);
        if (!is_iso_date(date)) {
            throw std::invalid_argument("price CSV line " + std::to_string(line_no) + ": bad date '" +
                                        date + "'");
        }
        panel.dates.push_back(date);
        std::vector<double> row;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const std::string cell = trim(fields[i]);
            if (cell.empty()) {
                row.push_back(kMissing);
                continue;
            }
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
                throw std::invalid_argument("price CSV line " + std::to_string(line_no) +
                                            ": cannot parse '" + cell + "'");
            }
            row.push_back(value);
        }
        rows.push_back(std::move(row));
    }
    panel.prices.resize(static_cast<Eigen::Index>(panel.tickers.size()),
                        static_cast<Eigen::Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (std::size_t i = 0; i < rows[t].size(); ++i) {
            panel.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rows[t][i];
        }
    }
    panel.validate();
    return panel;
}

PricePanel load_price_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open price file " + path.string());
    return read_price_csv(in);
}

CleanedPrices clean_prices(const PricePanel& raw, double max_missing_frac) {
    raw.validate();
    const Eigen::Index total = raw.prices.cols();
    if (total == 0) throw std::invalid_argument("clean_prices: no dates");
    CleanedPrices out;
    out.panel.dates = raw.dates;
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < raw.prices.rows(); ++i) {
        const auto row = raw.prices.row(i);
        const auto missing = static_cast<double>(row.array().isNaN().count());
        const bool leading_gap = std::isnan(row(0));
        if (missing / static_cast<double>(total) >= max_missing_frac || leading_gap) {
            out.dropped.push_back(raw.tickers[static_cast<std::size_t>(i)]);
        } else {
            kept.push_back(i);
        }
    }
    if (kept.empty()) throw std::invalid_argument("clean_prices: every ticker was dropped");

    out.panel.prices.resize(static_cast<Eigen::Index>(kept.size()), total);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        out.panel.tickers.push_back(raw.tickers[static_cast<std::size_t>(kept[k])]);
        double last = kMissing;
        for (Eigen::Index t = 0; t < total; ++t) {
            const double v = raw.prices(kept[k], t);
            if (!std::isnan(v)) last = v;
            if (!(last > 0.0)) {
                throw std::invalid_argument("clean_prices: non-positive price for " + out.panel.tickers.back() +
                                            " on " + raw.dates[static_cast<std::size_t>(t)]);
            }
            out.panel.prices(r, t) = last;
        }
    }
    for (const auto& ticker : out.dropped) spdlog::info("clean_prices: dropped {}", ticker);
    return out;
}

ReturnPanel compute_returns(const PricePanel& prices) {
    prices.validate();
    const Eigen::Index total = prices.prices.cols();
    if (total < 3) throw std::invalid_argument("compute_returns: need at least 3 dates");
    if (prices.prices.array().isNaN().any()) {
        throw std::invalid_argument("compute_returns: panel has missing prices; clean it first");
    }
    if ((prices.prices.array() <= 0.0).any()) {
        throw std::invalid_argument("compute_returns: non-positive price encountered");
    }
    const Matrix& s = prices.prices;
    Matrix r = (s.rightCols(total - 1).array() - s.leftCols(total - 1).array()) /
               s.leftCols(total - 1).array();
    ReturnPanel out{std::vector<std::string>(prices.dates.begin() + 1, prices.dates.end()), prices.tickers,
                    DataPanel(std::move(r))};
    return out;
}

WindowPlan plan_windows(Eigen::Index total_days, int window_length, int step) {
    if (window_length < 2) throw std::invalid_argument("plan_windows: window length must be >= 2");
    if (step < 1) throw std::invalid_argument("plan_windows: step must be >= 1");
    const Eigen::Index span = total_days - 2 * static_cast<Eigen::Index>(window_length);
    if (span < 0) {
        throw std::invalid_argument("plan_windows: " + std::to_string(total_days) +
                                    " days cannot hold two windows of " + std::to_string(window_length));
    }
    const auto count = static_cast<int>(span / step);
    if (count < 1) throw std::invalid_argument("plan_windows: no complete window fits");
    return {window_length, step, count};
}

TrackResult moving_window_track(const ReturnPanel& returns, const WindowPlan& plan,
                                const std::vector<EstimatorSpec>& estimators,
                                const std::vector<Strategy>& strategies, unsigned workers) {
    const Eigen::Index n = plan.window_length;
    if (plan.count < 1 ||
        static_cast<Eigen::Index>(plan.count - 1) * plan.step + 2 * n > returns.returns.n()) {
        throw std::invalid_argument("moving_window_track: plan does not fit the return panel");
    }
    std::vector<TrackResult> per_window(static_cast<std::size_t>(plan.count));
    parallel_for(per_window.size(), workers, [&](std::size_t k) {
        TrackResult& local = per_window[k];
        const auto window = static_cast<int>(k);
        const Eigen::Index start = static_cast<Eigen::Index>(k) * plan.step;
        const std::string end_date = returns.dates[static_cast<std::size_t>(start + 2 * n - 1)];
        const EstimationWorkspace workspace(returns.returns.columns(start, n).demeaned());
        const CovarianceMatrix s_out = sample_covariance(returns.returns.columns(start + n, n), true);

        const auto record = [&](const std::string& estimator, Strategy strategy, const WeightVector& w) {
            const std::string name = to_string(strategy);
            local.records.push_back({window, end_date, estimator, name, Metric::Hhi, hhi(w)});
            local.records.push_back({window, end_date, estimator, name, Metric::Leverage, leverage(w)});
            local.records.push_back({window, end_date, estimator, name, Metric::Rdi, rdi(w, s_out)});
            local.records.push_back({window, end_date, estimator, name, Metric::RealizedRisk,
                                     realized_risk(w, s_out)});
        };

        for (EstimatorSpec spec : estimators) {
            spec.grid_workers = 1;
            const std::string name = to_string(spec.kind);
            std::optional<CovarianceMatrix> xi;
            try {
                xi = estimate(workspace, spec);
            } catch (const std::exception& ex) {
                local.failures.push_back({window, name, "", ex.what()});
                continue;
            }
            for (Strategy strategy : strategies) {
                try {
                    record(name, strategy, allocate(strategy, *xi, name));
                } catch (const std::exception& ex) {
                    local.failures.push_back({window, name, to_string(strategy), ex.what()});
                }
            }
        }
        const WeightVector uniform = uniform_weights(returns.returns.p());
        for (Strategy strategy : strategies) record(kUniformRow, strategy, uniform);
    });

    TrackResult out;
    for (auto& local : per_window) {
        out.records.insert(out.records.end(), local.records.begin(), local.records.end());
        out.failures.insert(out.failures.end(), local.failures.begin(), local.failures.end());
    }
    for (const auto& f : out.failures) {
        spdlog::warn("window {} {}{}{} failed: {}", f.window, f.estimator, f.strategy.empty() ? "" : "/",
                     f.strategy, f.message);
    }
    return out;
}

void write_track_csv(std::ostream& out, const TrackResult& result) {
    out << "window,window_end_date,estimator,strategy,metric,value\n";
    for (const auto& r : result.records) {
        out << r.window << ',' << r.window_end_date << ',' << r.estimator << ',' << r.strategy << ','
            << to_string(r.metric) << ',' << format_value(r.value) << '\n';
    }
}

std::vector<Eigen::Index> rebalance_starts(Eigen::Index total_days, const WalkForwardPlan& plan) {
    if (plan.t_in < 2 || plan.t_out < 1 || plan.rebalance_every < 1) {
        throw std::invalid_argument("walk-forward plan: t_in >= 2, t_out >= 1, rebalance_every >= 1");
    }
    std::vector<Eigen::Index> starts;
    for (Eigen::Index s = plan.t_in; s + plan.t_out <= total_days; s += plan.rebalance_every) {
        starts.push_back(s);
    }
    if (starts.empty()) throw std::invalid_argument("walk-forward plan does not fit the return panel");
    return starts;
}

std::vector<double> drifted_returns(const DataPanel& returns, Eigen::Index first, Eigen::Index count,
                                    const Vector& weights, Vector* final_weights) {
    if (weights.size() != returns.p()) throw std::invalid_argument("drifted_returns: dimension mismatch");
    Vector holdings = weights;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index t = first; t < first + count; ++t) {
        const double value = holdings.sum();
        if (value == 0.0) throw NumericalError("drifted_returns: portfolio value reached zero");
        const Vector grown = holdings.array() * (1.0 + returns.values().col(t).array());
        out.push_back(grown.sum() / value - 1.0);
        holdings = grown;
    }
    if (final_weights) *final_weights = holdings / holdings.sum();
    return out;
}

namespace {

WalkForwardSeries run_combination(const ReturnPanel& returns, const WalkForwardPlan& plan,
                                  const std::vector<Eigen::Index>& starts,
                                  const std::vector<EstimationWorkspace>& workspaces,
                                  const std::optional<EstimatorSpec>& spec, Strategy strategy) {
    WalkForwardSeries series;
    series.strategy = to_string(strategy);
    series.estimator = spec ? to_string(spec->kind) : kUniformRow;
    Vector current;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        Vector target;
        if (spec) {
            EstimatorSpec local = *spec;
            local.grid_workers = 1;
            target = allocate(strategy, estimate(workspaces[k], local), series.estimator).values();
        } else if (k == 0) {
            target = uniform_weights(returns.returns.p()).values();
        }
        if (k > 0 && spec) series.rebalances.push_back({current, target});
        if (target.size() == 0) target = current;
        const auto daily = drifted_returns(returns.returns, starts[k], plan.t_out, target, &current);
        series.daily_returns.insert(series.daily_returns.end(), daily.begin(), daily.end());
    }
    series.cumulative = cumulative_wealth(series.daily_returns);
    series.report = performance_report(series.daily_returns, series.rebalances);
    return series;
}

}  // namespace

WalkForwardResult walk_forward(const ReturnPanel& returns, const WalkForwardPlan& plan,
                               const std::vector<EstimatorSpec>& estimators,
                               const std::vector<Strategy>& strategies, unsigned workers) {
    const auto starts = rebalance_starts(returns.returns.n(), plan);
    std::vector<EstimationWorkspace> workspaces;
    workspaces.reserve(starts.size());
    for (Eigen::Index s : starts) {
        workspaces.emplace_back(returns.returns.columns(s - plan.t_in, plan.t_in).demeaned());
    }

    struct Job {
        std::optional<EstimatorSpec> spec;
        Strategy strategy;
    };
    std::vector<Job> jobs;
    for (const auto& spec : estimators) {
        for (Strategy strategy : strategies) jobs.push_back({spec, strategy});
    }
    jobs.push_back({std::nullopt, Strategy::Uniform});

    std::vector<std::optional<WalkForwardSeries>> results(jobs.size());
    std::vector<std::optional<TrackFailure>> errors(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t j) {
        try {
            results[j] = run_combination(returns, plan, starts, workspaces, jobs[j].spec, jobs[j].strategy);
        } catch (const std::exception& ex) {
            errors[j] = TrackFailure{0, jobs[j].spec ? to_string(jobs[j].spec->kind) : kUniformRow,
                                     to_string(jobs[j].strategy), ex.what()};
        }
    });

    WalkForwardResult out;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        for (Eigen::Index t = starts[k]; t < starts[k] + plan.t_out; ++t) {
            out.dates.push_back(returns.dates[static_cast<std::size_t>(t)]);
        }
    }
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (results[j]) out.series.push_back(std::move(*results[j]));
        if (errors[j]) {
            spdlog::warn("walk-forward {}/{} failed: {}", errors[j]->estimator, errors[j]->strategy,
                         errors[j]->message);
            out.failures.push_back(std::move(*errors[j]));
        }
    }
    return out;
}

void write_cumulative_csv(std::ostream& out, const WalkForwardResult& result) {
    out << "date";
    for (const auto& s : result.series) out << ',' << s.label();
    out << '\n';
    for (std::size_t t = 0; t < result.dates.size(); ++t) {
        out << result.dates[t];
        for (const auto& s : result.series) out << ',' << format_value(s.cumulative[t]);
        out << '\n';
    }
}

void write_performance_csv(std::ostream& out, const WalkForwardResult& result) {
    out << "estimator,strategy,annual_return,annual_volatility,sharpe,max_drawdown,sortino,turnover\n";
    for (const auto& s : result.series) {
        const auto& r = s.report;
        out << s.estimator << ',' << s.strategy << ',' << format_value(r.annual_return) << ','
            << format_value(r.annual_volatility) << ',' << format_optional(r.sharpe) << ','
            << format_value(r.max_drawdown) << ',' << format_optional(r.sortino) << ','
            << format_value(r.turnover) << '\n';
    }
}

}  // namespace hicov
