#include "hicov/backtest.hpp"
#include "hicov/models.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace hicov {
namespace {

const std::string kData = std::string(HICOV_TEST_DATA_DIR) + "/synthetic_prices.csv";

PricePanel panel_of(std::vector<std::string> tickers, Matrix prices) {
    PricePanel p;
    p.tickers = std::move(tickers);
    for (Eigen::Index t = 0; t < prices.cols(); ++t) {
        p.dates.push_back("2020-01-" + std::string(t + 1 < 10 ? "0" : "") + std::to_string(t + 1));
    }
    p.prices = std::move(prices);
    return p;
}

ReturnPanel returns_from(const Matrix& r) {
    ReturnPanel out{{}, {}, DataPanel(r)};
    for (Eigen::Index i = 0; i < r.rows(); ++i) out.tickers.push_back("T" + std::to_string(i));
    for (Eigen::Index t = 0; t < r.cols(); ++t) out.dates.push_back("d" + std::to_string(t));
    return out;
}

ReturnPanel synthetic_returns(const CovarianceMatrix& sigma, int days, std::uint64_t seed) {
    Rng rng(seed);
    const auto panel = sample_panel(sigma, days, NoiseDistribution::gaussian(), rng);
    return returns_from(panel.values() * 0.01);
}

EstimatorSpec naive() { return EstimatorSpec{}; }

TEST(PriceCsv, ParsesHeaderRowsAndMissingCells) {
    std::istringstream in("date,A,B\n2020-01-02,1.5,\n2020-01-03,2,3\n");
    const auto p = read_price_csv(in);
    EXPECT_EQ(p.tickers, (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(p.dates.size(), 2u);
    EXPECT_EQ(p.prices(0, 0), 1.5);
    EXPECT_TRUE(std::isnan(p.prices(1, 0)));
    EXPECT_EQ(p.prices(1, 1), 3.0);
}

TEST(PriceCsv, ErrorsNameTheLine) {
    const auto message = [](const std::string& text) {
        std::istringstream in(text);
        try {
            read_price_csv(in);
        } catch (const std::invalid_argument& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("date,A\n2020-01-02,1\n2020-01-03,abc\n").find("line 3"), std::string::npos);
    EXPECT_NE(message("date,A\n2020-13-02,1\n").find("line 2"), std::string::npos);
    EXPECT_NE(message("date,A,B\n2020-01-02,1\n").find("line 2"), std::string::npos);
    EXPECT_FALSE(message("date,A\n2020-01-03,1\n2020-01-02,1\n").empty());
    EXPECT_FALSE(message("").empty());
    EXPECT_THROW(load_price_csv("/nonexistent/prices.csv"), std::runtime_error);
}

TEST(CleanPrices, SyntheticFileDropsExactlyTheSparseTickers) {
    const auto raw = load_price_csv(kData);
    EXPECT_EQ(raw.tickers.size(), 12u);
    const auto cleaned = clean_prices(raw, 0.05);
    EXPECT_EQ(cleaned.dropped, (std::vector<std::string>{"GAP5", "LEAD"}));
    EXPECT_EQ(cleaned.panel.tickers.size(), 10u);
    EXPECT_FALSE(cleaned.panel.prices.array().isNaN().any());
    EXPECT_TRUE((cleaned.panel.prices.array() > 0.0).all());
}

TEST(CleanPrices, ForwardFillsGaps) {
    Matrix m(1, 4);
    m << 100, std::nan(""), std::nan(""), 103;
    const auto cleaned = clean_prices(panel_of({"A"}, m), 0.6);
    EXPECT_EQ(cleaned.panel.prices, (Matrix(1, 4) << 100, 100, 100, 103).finished());
}

TEST(CleanPrices, ThresholdAndLeadingGap) {
    Matrix m(3, 20);
    m.setConstant(10.0);
    m(0, 5) = std::nan("");                       // 5% missing -> dropped
    m(1, 0) = std::nan("");                       // leading gap -> dropped
    const auto cleaned = clean_prices(panel_of({"A", "B", "C"}, m), 0.05);
    EXPECT_EQ(cleaned.dropped, (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(clean_prices(panel_of({"A", "B", "C"}, m), 0.06).dropped, (std::vector<std::string>{"B"}));
}

TEST(CleanPrices, IsIdempotent) {
    const auto once = clean_prices(load_price_csv(kData));
    const auto twice = clean_prices(once.panel);
    EXPECT_TRUE(twice.dropped.empty());
    EXPECT_EQ(twice.panel.prices, once.panel.prices);
}

TEST(CleanPrices, RejectsEmptyResultAndBadPrices) {
    Matrix m(1, 3);
    m << std::nan(""), 1, 1;
    EXPECT_THROW(clean_prices(panel_of({"A"}, m)), std::invalid_argument);
    m << 1, 0, 1;
    EXPECT_THROW(clean_prices(panel_of({"A"}, m)), std::invalid_argument);
}

TEST(ComputeReturns, HandExamples) {
    Matrix m(2, 3);
    m << 100, 110, 99, 5, 5, 5;
    const auto r = compute_returns(panel_of({"A", "B"}, m));
    EXPECT_NEAR(r.returns.values()(0, 0), 0.10, 1e-15);
    EXPECT_NEAR(r.returns.values()(0, 1), -0.10, 1e-15);
    EXPECT_EQ(r.returns.values().row(1), Eigen::RowVectorXd::Zero(2));
    EXPECT_EQ(r.dates.front(), "2020-01-02");
    m(1, 1) = 0.0;
    EXPECT_THROW(compute_returns(panel_of({"A", "B"}, m)), std::invalid_argument);
}

TEST(ComputeReturns, CompoundingRebuildsPrices) {
    const auto prices = clean_prices(load_price_csv(kData)).panel;
    const auto r = compute_returns(prices);
    Vector level = prices.prices.col(0);
    double worst = 0.0;
    for (Eigen::Index t = 0; t < r.returns.n(); ++t) {
        level = level.array() * (1.0 + r.returns.values().col(t).array());
        worst = std::max(worst, ((level - prices.prices.col(t + 1)).array() / prices.prices.col(t + 1).array())
                                    .abs()
                                    .maxCoeff());
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(PlanWindows, CountFormula) {
    const auto plan = plan_windows(2515, 882, 10);
    EXPECT_EQ(plan.count, 75);
    EXPECT_EQ(plan_windows(100, 20, 10).count, 6);
    EXPECT_THROW(plan_windows(30, 20, 10), std::invalid_argument);
    EXPECT_THROW(plan_windows(100, 20, 0), std::invalid_argument);
}

TEST(MovingWindowTrack, RecordsPerWindowIncludingUniform) {
    const auto returns = synthetic_returns(CovarianceMatrix::identity(4), 60, 1);
    const auto plan = plan_windows(returns.returns.n(), 10, 10);
    const auto result = moving_window_track(returns, plan, {naive()}, {Strategy::Mvp, Strategy::Hrp}, 1);
    EXPECT_EQ(result.records.size(), static_cast<std::size_t>(plan.count) * 2 * 2 * 4);
    int uniform_rdi = 0;
    for (const auto& r : result.records) {
        if (r.estimator == kUniformRow && r.metric == Metric::Rdi && r.strategy == "mvp") ++uniform_rdi;
    }
    EXPECT_EQ(uniform_rdi, plan.count);
    EXPECT_EQ(result.records.front().window_end_date, "d19");
}

TEST(MovingWindowTrack, InSampleMetricsIgnoreFutureData) {
    auto returns = synthetic_returns(build_nested_sigma(5, 0.5), 80, 2);
    const auto plan = plan_windows(returns.returns.n(), 20, 10);
    const auto before = moving_window_track(returns, plan, {naive()}, {Strategy::Mvp}, 1);
    Matrix perturbed = returns.returns.values();
    perturbed.rightCols(40) *= 3.0;  // window 0 in-sample is [0, 20)
    returns.returns = DataPanel(perturbed);
    const auto after = moving_window_track(returns, plan, {naive()}, {Strategy::Mvp}, 1);
    for (std::size_t i = 0; i < before.records.size(); ++i) {
        const auto& a = before.records[i];
        if (a.window != 0 || (a.metric != Metric::Hhi && a.metric != Metric::Leverage)) continue;
        EXPECT_EQ(a.value, after.records[i].value);
    }
}

TEST(MovingWindowTrack, StationaryControlTracksTrueRisk) {
    Matrix d = Matrix::Zero(20, 20);
    for (int i = 0; i < 20; ++i) d(i, i) = 1.0 + (i % 4);
    const CovarianceMatrix sigma(d);
    const int n = 400;
    const int step = 10;
    const auto returns = synthetic_returns(sigma, 2 * n + 75 * step, 3);
    const auto plan = plan_windows(returns.returns.n(), n, step);
    EXPECT_EQ(plan.count, 75);
    const auto result = moving_window_track(returns, plan, {naive()}, {Strategy::Mvp}, 0);
    double total = 0.0;
    int count = 0;
    for (const auto& r : result.records) {
        if (r.estimator == "naive" && r.metric == Metric::RealizedRisk) {
            total += r.value;
            ++count;
        }
    }
    EXPECT_EQ(count, 75);
    EXPECT_NEAR(total / count / (true_risk(sigma) * 1e-4), 1.0, 0.10);
}

TEST(MovingWindowTrack, WorkerCountDoesNotChangeOutput) {
    const auto returns = synthetic_returns(build_nested_sigma(6, 0.5), 90, 4);
    const auto plan = plan_windows(returns.returns.n(), 20, 10);
    std::ostringstream a, b;
    write_track_csv(a, moving_window_track(returns, plan, {naive()}, {Strategy::Mvp}, 1));
    write_track_csv(b, moving_window_track(returns, plan, {naive()}, {Strategy::Mvp}, 3));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "window,window_end_date,estimator,strategy,metric,value");
}

TEST(WalkForward, RebalanceStarts) {
    EXPECT_EQ(rebalance_starts(2514, WalkForwardPlan{}),
              (std::vector<Eigen::Index>{756, 1008, 1260, 1512, 1764, 2016}));
    EXPECT_EQ(rebalance_starts(1599, WalkForwardPlan{}), (std::vector<Eigen::Index>{756, 1008, 1260}));
    EXPECT_THROW(rebalance_starts(900, WalkForwardPlan{}), std::invalid_argument);
}

TEST(WalkForward, DriftOnTwoAssets) {
    Matrix r(2, 2);
    r << 0.10, 0.00, -0.10, 0.20;
    Vector w(2);
    w << 0.5, 0.5;
    Vector final_weights;
    const auto daily = drifted_returns(DataPanel(r), 0, 2, w, &final_weights);
    // Holdings 0.5, 0.5 -> 0.55, 0.45 (value 1.0) -> 0.55, 0.54 (value 1.09).
    EXPECT_NEAR(daily[0], 0.0, 1e-15);
    EXPECT_NEAR(daily[1], 0.09, 1e-15);
    EXPECT_NEAR(final_weights(0), 0.55 / 1.09, 1e-15);
    EXPECT_NEAR(final_weights(1), 0.54 / 1.09, 1e-15);
}

TEST(WalkForward, SingleAssetCompoundsItsReturns) {
    Rng rng(5);
    std::normal_distribution<double> normal(0.0005, 0.01);
    Matrix r(1, 40);
    for (Eigen::Index t = 0; t < 40; ++t) r(0, t) = normal(rng);
    const WalkForwardPlan plan{10, 10, 10};
    const auto result = walk_forward(returns_from(r), plan, {naive()}, {Strategy::Mvp}, 1);
    ASSERT_EQ(result.series.size(), 2u);
    for (const auto& series : result.series) {
        double v = 1.0;
        for (std::size_t t = 0; t < series.cumulative.size(); ++t) {
            v *= 1.0 + r(0, static_cast<Eigen::Index>(t) + 10);
            EXPECT_NEAR(series.cumulative[t], v, 1e-12);
        }
        EXPECT_EQ(series.cumulative.size(), 30u);
    }
}

TEST(WalkForward, UniformIsBuyAndHold) {
    const auto prices = clean_prices(load_price_csv(kData)).panel;
    const auto returns = compute_returns(prices);
    const auto result = walk_forward(returns, WalkForwardPlan{}, {naive()}, {Strategy::Mvp}, 1);
    const auto& uniform = result.series.back();
    EXPECT_EQ(uniform.label(), "uniform:uniform");
    EXPECT_EQ(uniform.report.turnover, 0.0);
    EXPECT_TRUE(uniform.rebalances.empty());
    // Price column 756 is the purchase date of the first out-of-sample return.
    const Vector base = prices.prices.col(756);
    for (std::size_t t = 0; t < uniform.cumulative.size(); ++t) {
        const double expected = (prices.prices.col(757 + static_cast<Eigen::Index>(t)).array() / base.array()).mean();
        EXPECT_NEAR(uniform.cumulative[t], expected, 1e-12);
    }
    EXPECT_EQ(result.dates.size(), 3u * 252u);
    EXPECT_EQ(result.series.front().rebalances.size(), 2u);
}

TEST(WalkForward, NoLookAhead) {
    const auto returns = synthetic_returns(build_nested_sigma(4, 0.5), 80, 6);
    const WalkForwardPlan plan{20, 10, 10};
    const auto full = walk_forward(returns, plan, {naive()}, {Strategy::Mvp}, 1);
    const Matrix cut = returns.returns.values().leftCols(50);
    ReturnPanel truncated = returns;
    truncated.returns = DataPanel(cut);
    truncated.dates.resize(50);
    const auto part = walk_forward(truncated, plan, {naive()}, {Strategy::Mvp}, 1);
    const auto& a = full.series.front();
    const auto& b = part.series.front();
    ASSERT_EQ(b.daily_returns.size(), 30u);
    for (std::size_t t = 0; t < b.daily_returns.size(); ++t) EXPECT_EQ(a.daily_returns[t], b.daily_returns[t]);
    for (std::size_t k = 0; k < b.rebalances.size(); ++k) EXPECT_EQ(a.rebalances[k].after, b.rebalances[k].after);
}

TEST(WalkForward, DeterministicCsvOutput) {
    const auto returns = compute_returns(clean_prices(load_price_csv(kData)).panel);
    const std::vector<EstimatorSpec> estimators{naive(), EstimatorSpec{EstimatorKind::Linear}};
    std::ostringstream a1, a2, b1, b2;
    const auto first = walk_forward(returns, WalkForwardPlan{}, estimators, {Strategy::Mvp, Strategy::Hrp}, 1);
    const auto second = walk_forward(returns, WalkForwardPlan{}, estimators, {Strategy::Mvp, Strategy::Hrp}, 2);
    write_cumulative_csv(a1, first);
    write_cumulative_csv(a2, second);
    write_performance_csv(b1, first);
    write_performance_csv(b2, second);
    EXPECT_EQ(a1.str(), a2.str());
    EXPECT_EQ(b1.str(), b2.str());
    EXPECT_EQ(b1.str().substr(0, b1.str().find('\n')),
              "estimator,strategy,annual_return,annual_volatility,sharpe,max_drawdown,sortino,turnover");
}

}  // namespace
}  // namespace hicov
