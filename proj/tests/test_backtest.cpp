#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gapnet/backtest.hpp"
#include "gapnet/errors.hpp"
#include "metric_oracles.hpp"

namespace gapnet {
namespace {

using namespace gapnet::testing;

std::vector<double> random_returns(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0008, 0.015);
    std::vector<double> r(n);
    for (double& x : r) x = g(rng);
    return r;
}

TEST(TopK, Examples) {
    const std::vector<double> p = {3, 1, 2};
    EXPECT_EQ(select_topk(p, 2), (std::vector<std::size_t>{0, 2}));
    const std::vector<double> flat = {5, 5, 5, 5};
    EXPECT_EQ(select_topk(flat, 2), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(select_topk(p, 3).size(), 3u);
    EXPECT_THROW(select_topk(p, 4), ConfigError);
}

TEST(TopK, ShiftInvariant) {
    std::mt19937_64 rng(1);
    std::vector<double> p = random_returns(20, rng), shifted = p;
    for (double& v : shifted) v += 3.5;
    EXPECT_EQ(select_topk(p, 5), select_topk(shifted, 5));
}

TEST(DailyReturn, Examples) {
    EXPECT_NEAR(daily_return(std::vector<double>{100, 50}, std::vector<double>{110, 55}), 0.10, 1e-15);
    EXPECT_NEAR(daily_return(std::vector<double>{100, 100}, std::vector<double>{110, 90}), 0.0, 1e-15);
    EXPECT_NEAR(daily_return(std::vector<double>{100, 50, 20}, std::vector<double>{110, 55, 19}), 0.05, 1e-15);
    EXPECT_NEAR(daily_return(std::vector<double>{100, 50}, std::vector<double>{110, 55}, ReturnMode::sum), 0.20, 1e-15);
    EXPECT_THROW(daily_return(std::vector<double>{0}, std::vector<double>{1}), DataError);
}

TEST(Irr, Examples) {
    EXPECT_EQ(annualised_irr(std::vector<double>(30, 0.0)), 0.0);
    const std::vector<double> r(252, 0.001);
    EXPECT_NEAR(annualised_irr(r), std::pow(1.001, 252) - 1.0, 1e-12);
    std::mt19937_64 rng(2);
    const auto x = random_returns(237, rng);
    EXPECT_NEAR(annualised_irr(x), irr_log_oracle(x), 1e-9);
    EXPECT_THROW(annualised_irr(std::vector<double>{0.1, -1.0}), NumericError);
}

TEST(Sharpe, Examples) {
    EXPECT_EQ(*sharpe(std::vector<double>{0.01, -0.01, 0.01, -0.01}).value, 0.0);
    const Metric flat = sharpe(std::vector<double>(10, 0.002));
    EXPECT_FALSE(flat.value);
    EXPECT_FALSE(flat.message.empty());
    std::mt19937_64 rng(3);
    const auto x = random_returns(100, rng);
    EXPECT_NEAR(*sharpe(x).value, sharpe_oracle(x), 1e-12);
}

TEST(Ic, PerfectAndReversed) {
    std::mt19937_64 rng(4);
    const std::vector<double> v = random_returns(5 * 6, rng);
    std::vector<double> neg(v);
    for (double& x : neg) x = -x;
    const Tensor real({5, 6}, v);
    const IcSummary same = ic_series(real, real);
    for (double ic : same.daily) EXPECT_NEAR(ic, 1.0, 1e-12);
    EXPECT_NEAR(*same.ic.value, 1.0, 1e-12);
    EXPECT_FALSE(same.icir.value.has_value());
    for (double ic : ic_series(Tensor({5, 6}, neg), real).daily) EXPECT_NEAR(ic, -1.0, 1e-12);
}

TEST(Ic, MatchesRankThenCorrelateOracle) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> coarse(0, 4);  // forces ties
    std::vector<double> p(5 * 10), r(5 * 10);
    for (double& x : p) x = coarse(rng);
    for (double& x : r) x = random_returns(1, rng)[0];
    const IcSummary s = ic_series(Tensor({5, 10}, p), Tensor({5, 10}, r));
    ASSERT_EQ(s.daily.size(), 5u);
    for (std::size_t t = 0; t < 5; ++t) {
        const std::vector<double> pt(p.begin() + 10 * t, p.begin() + 10 * t + 10);
        const std::vector<double> rt(r.begin() + 10 * t, r.begin() + 10 * t + 10);
        EXPECT_NEAR(s.daily[t], spearman_oracle(pt, rt), 1e-12);
    }
    const IcSummary lin = ic_series(Tensor({5, 10}, p), Tensor({5, 10}, r), IcKind::pearson);
    EXPECT_NEAR(lin.daily[0], correlation_oracle({p.begin(), p.begin() + 10}, {r.begin(), r.begin() + 10}), 1e-12);
}

TEST(Ic, MonotoneTransformInvariant) {
    std::mt19937_64 rng(6);
    const auto p = random_returns(40, rng), r = random_returns(40, rng);
    std::vector<double> q(p);
    for (double& x : q) x = std::exp(50 * x) + 2;
    const auto a = ic_series(Tensor({4, 10}, p), Tensor({4, 10}, r));
    const auto b = ic_series(Tensor({4, 10}, q), Tensor({4, 10}, r));
    for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(a.daily[t], b.daily[t], 1e-12);
}

TEST(Ic, SkipsDaysWithFewerThanThreeStocks) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const Tensor p({2, 4}, std::vector<double>{1, 2, nan, nan, 1, 2, 3, 4});
    const Tensor r({2, 4}, std::vector<double>{1, 2, 3, 4, 1, 2, 3, 4});
    const IcSummary s = ic_series(p, r);
    EXPECT_EQ(s.skipped, 1u);
    EXPECT_EQ(s.daily.size(), 1u);
}

TEST(Backtest, ConstantPricesKeepCapital) {
    const Tensor closes({3, 5}, 42.0);
    const Tensor preds({4, 3}, std::vector<double>{1, 2, 3, 3, 2, 1, 0, 0, 0, 5, 1, 1});
    const BacktestResult r = run_backtest(preds, {0, 1, 2, 3}, closes, 2);
    EXPECT_EQ(r.rows.back().wealth, 10000.0);
}

TEST(Backtest, DoublingStock) {
    const Tensor closes({1, 4}, std::vector<double>{1, 2, 4, 8});
    const BacktestResult r = run_backtest(Tensor({3, 1}, 1.0), {0, 1, 2}, closes, 1);
    EXPECT_EQ(r.rows.back().wealth, 10000.0 * 8);
}

TEST(Backtest, LastDayWithoutNextCloseDropped) {
    const Tensor closes({2, 3}, std::vector<double>{1, 2, 3, 1, 1, 1});
    const BacktestResult r = run_backtest(Tensor({3, 2}, 1.0), {0, 1, 2}, closes, 1);
    EXPECT_EQ(r.rows.size(), 2u);
}

TEST(Backtest, MatchesNaiveSimulator) {
    std::mt19937_64 rng(7);
    const std::size_t N = 8, T = 21;
    std::vector<std::vector<double>> closes(N, std::vector<double>(T)), preds(20, std::vector<double>(N));
    std::vector<double> flat_c, flat_p;
    for (auto& row : closes) {
        row[0] = 100;
        const auto r = random_returns(T - 1, rng);
        for (std::size_t t = 1; t < T; ++t) row[t] = row[t - 1] * (1 + r[t - 1]);
        flat_c.insert(flat_c.end(), row.begin(), row.end());
    }
    std::vector<std::size_t> days;
    for (std::size_t d = 0; d < 20; ++d) {
        days.push_back(d);
        preds[d] = random_returns(N, rng);
        flat_p.insert(flat_p.end(), preds[d].begin(), preds[d].end());
    }
    const BacktestResult r = run_backtest(Tensor({20, N}, flat_p), days, Tensor({N, T}, flat_c), 3);
    const NaiveLedger o = naive_backtest(preds, days, closes, 3, 10000.0);
    ASSERT_EQ(r.rows.size(), o.returns.size());
    double product = 1.0;
    for (std::size_t d = 0; d < r.rows.size(); ++d) {
        EXPECT_NEAR(r.rows[d].ret, o.returns[d], 1e-9);
        EXPECT_NEAR(r.rows[d].wealth, o.wealth[d], 1e-9);
        product *= 1 + r.rows[d].ret;
    }
    EXPECT_LT(std::fabs(r.rows.back().wealth - 10000.0 * product), 1e-6);
}

TEST(Backtest, AllStocksIsMarketAverage) {
    std::mt19937_64 rng(8);
    const std::size_t N = 5, T = 10;
    std::vector<double> c(N * T);
    for (std::size_t i = 0; i < N; ++i) {
        c[i * T] = 10;
        const auto r = random_returns(T, rng);
        for (std::size_t t = 1; t < T; ++t) c[i * T + t] = c[i * T + t - 1] * (1 + r[t]);
    }
    std::vector<std::size_t> days(T - 1);
    for (std::size_t d = 0; d < T - 1; ++d) days[d] = d;
    std::vector<double> p(days.size() * N);
    for (double& x : p) x = random_returns(1, rng)[0];
    const BacktestResult r = run_backtest(Tensor({days.size(), N}, p), days, Tensor({N, T}, c), N);
    for (std::size_t d = 0; d < days.size(); ++d) {
        double avg = 0;
        for (std::size_t i = 0; i < N; ++i) avg += c[i * T + d + 1] / c[i * T + d] - 1;
        EXPECT_NEAR(r.rows[d].ret, avg / N, 1e-15);
    }
}

}  // namespace
}  // namespace gapnet
