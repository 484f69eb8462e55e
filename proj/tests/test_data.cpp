#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gapnet/data.hpp"
#include "gapnet/errors.hpp"

namespace gapnet {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gapnet_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<double> daily_returns(const RawPanel& raw, std::size_t stock) {
    const std::size_t T = raw.n_days();
    std::vector<double> r;
    for (std::size_t t = 1; t < T; ++t) r.push_back(return_ratio(raw.closes[stock * T + t - 1], raw.closes[stock * T + t]));
    return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= a.size();
    mb /= b.size();
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

TEST(ReturnRatio, Examples) {
    EXPECT_NEAR(return_ratio(100, 110), 0.10, 1e-15);
    EXPECT_EQ(return_ratio(50, 50), 0.0);
    EXPECT_NEAR(return_ratio(50, 45), -0.10, 1e-15);
    EXPECT_THROW(return_ratio(0, 1), DataError);
    EXPECT_THROW(return_ratio(-3, 1), DataError);
}

TEST(Features, ConstantCloseNormalizesToOne) {
    const Tensor closes({2, 40}, 7.5);
    const Tensor f = build_features(closes, {0, 40});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t t = 29; t < 40; ++t)
            for (std::size_t k = 0; k < kFeatureCount; ++k) EXPECT_DOUBLE_EQ(f.at({i, t, k}), 1.0);
    EXPECT_EQ(f.at({0, 28, 0}), 0.0);
}

TEST(Features, MovingAverageOfRamp) {
    // ramp 1..40: MA5 on the day with close 5 would be 3; on day t it is close - 2
    std::vector<double> ramp(40);
    for (std::size_t t = 0; t < 40; ++t) ramp[t] = static_cast<double>(t + 1);
    const Tensor f = build_features(Tensor({1, 40}, ramp), {0, 40});
    // normalization divisors are the training maxima: close 40, MA5 38, MA10 35.5, MA20 30.5, MA30 25.5
    EXPECT_DOUBLE_EQ(f.at({0, 29, 0}) * 40.0, 30.0);
    EXPECT_DOUBLE_EQ(f.at({0, 29, 1}) * 38.0, 28.0);
    EXPECT_DOUBLE_EQ(f.at({0, 29, 4}) * 25.5, 15.5);
    EXPECT_DOUBLE_EQ(f.at({0, 39, 3}), 1.0);
}

TEST(Features, FiveDayMeanArithmetic) {
    std::vector<double> closes(30, 1.0);
    const double tail[] = {1, 2, 3, 4, 5};
    std::copy(std::begin(tail), std::end(tail), closes.end() - 5);
    const Tensor f = build_features(Tensor({1, 30}, closes), {0, 30});
    // single usable day is its own maximum, so check the ratio MA5/close = 3/5
    EXPECT_DOUBLE_EQ(f.at({0, 29, 1}), 1.0);
    const Tensor two = build_features(Tensor({2, 30}, [&] {
                                          std::vector<double> v = closes;
                                          v.insert(v.end(), 30, 5.0);
                                          return v;
                                      }()),
                                      {0, 30});
    EXPECT_DOUBLE_EQ(two.at({0, 29, 1}), 3.0 / 5.0);
}

TEST(Features, TrainingMaximumIsExactlyOne) {
    auto synth = synth_panel({.stocks = 12, .days = 200, .clusters = 3, .noise = 0.02, .seed = 5});
    const Segment train{0, 120};
    const Tensor f = build_features(synth.raw.closes, train);
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        double m = 0;
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t t = 29; t < 120; ++t) m = std::max(m, f.at({i, t, k}));
        EXPECT_EQ(m, 1.0) << "channel " << k;
    }
    for (double v : f.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Features, RejectsShortHistory) {
    EXPECT_THROW(build_features(Tensor({1, 29}, 1.0), {0, 29}), DataError);
}

TEST(Split, RatioBoundaries) {
    const Split s = chronological_split(10, {6, 2, 2});
    EXPECT_EQ(s.train, (Segment{0, 6}));
    EXPECT_EQ(s.valid, (Segment{6, 8}));
    EXPECT_EQ(s.test, (Segment{8, 10}));
}

TEST(Split, DateRanges) {
    const auto cal = weekday_calendar("2013-01-02", 20);
    const Split s = chronological_split(cal, {"2013-01-02", "2013-01-15"}, {"01/16/2013", "1/22/2013"},
                                        {"2013-01-23", "2013-01-29"});
    EXPECT_EQ(s.train, (Segment{0, 10}));
    EXPECT_EQ(s.valid, (Segment{10, 15}));
    EXPECT_EQ(s.test, (Segment{15, 20}));
}

TEST(Split, OverlapAndOutsideAreErrors) {
    const auto cal = weekday_calendar("2013-01-02", 20);
    EXPECT_THROW(chronological_split(cal, {"2013-01-02", "2013-01-15"}, {"2013-01-14", "2013-01-22"},
                                     {"2013-01-23", "2013-01-29"}),
                 ConfigError);
    EXPECT_THROW(chronological_split(cal, {"2012-12-01", "2013-01-15"}, {"2013-01-16", "2013-01-22"},
                                     {"2013-01-23", "2013-01-29"}),
                 DataError);
}

TEST(Calendar, SkipsWeekends) {
    const auto cal = weekday_calendar("2013-01-04", 3);  // a Friday
    EXPECT_EQ(cal, (std::vector<std::string>{"2013-01-04", "2013-01-07", "2013-01-08"}));
}

TEST(Dates, Normalization) {
    EXPECT_EQ(normalize_date("2016-01-04"), "2016-01-04");
    EXPECT_EQ(normalize_date("1/4/2016"), "2016-01-04");
    EXPECT_EQ(normalize_date("4-Jan-16"), "2016-01-04");
    EXPECT_THROW(normalize_date("2016-02-30"), DataError);
    EXPECT_THROW(normalize_date("yesterday"), DataError);
}

TEST(Synth, DeterministicForSeed) {
    const SynthOptions o{.stocks = 10, .days = 60, .clusters = 2, .noise = 0.01, .seed = 42};
    const auto a = synth_panel(o), b = synth_panel(o);
    EXPECT_EQ(a.raw.closes.values(), b.raw.closes.values());
    EXPECT_EQ(a.raw.calendar, b.raw.calendar);
    auto c = o;
    c.seed = 43;
    EXPECT_NE(synth_panel(c).raw.closes.values(), a.raw.closes.values());
}

TEST(Synth, NoiselessClustersMoveTogether) {
    const auto s = synth_panel({.stocks = 6, .days = 80, .clusters = 2, .noise = 0.0, .seed = 3});
    EXPECT_EQ(s.cluster_of, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1}));
    EXPECT_EQ(daily_returns(s.raw, 0), daily_returns(s.raw, 2));
    EXPECT_EQ(daily_returns(s.raw, 3), daily_returns(s.raw, 5));
    EXPECT_NE(daily_returns(s.raw, 0), daily_returns(s.raw, 3));
    for (double c : s.raw.closes.data()) EXPECT_GT(c, 0.0);
}

TEST(Synth, SingleClusterFactorIsPerfectlyCorrelated) {
    const auto s = synth_panel({.stocks = 4, .days = 100, .clusters = 1, .noise = 0.0, .seed = 9});
    EXPECT_NEAR(pearson(daily_returns(s.raw, 0), daily_returns(s.raw, 3)), 1.0, 1e-12);
}

TEST(Synth, RejectsIndivisibleClusters) {
    EXPECT_THROW(synth_panel({.stocks = 7, .days = 50, .clusters = 2}), ConfigError);
}

TEST(Window, NeverContainsTargetDay) {
    auto synth = synth_panel({.stocks = 5, .days = 90, .clusters = 1, .noise = 0.02, .seed = 11});
    const PricePanel panel = make_panel(synth.raw, chronological_split(90, {6, 2, 2}));
    const std::size_t L = 8, N = 5, T = 90;
    for (std::size_t t = panel.first_usable + L; t < T; ++t) {
        const LookbackWindow w = lookback_window(panel, t, L);
        for (std::size_t i = 0; i < N; ++i) {
            EXPECT_DOUBLE_EQ(w.target[i], return_ratio(panel.closes[i * T + t - 1], panel.closes[i * T + t]));
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t k = 0; k < kFeatureCount; ++k)
                    ASSERT_EQ(w.x.at({i, l, k}), panel.features.at({i, t - L + l, k}));
        }
        // the last window row is day t-1; perturbing day t must leave the window unchanged
        PricePanel perturbed = panel;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t k = 0; k < kFeatureCount; ++k)
                perturbed.features.mutable_data()[(i * T + t) * kFeatureCount + k] += 1.0;
        ASSERT_EQ(lookback_window(perturbed, t, L).x.values(), w.x.values());
    }
    EXPECT_THROW(lookback_window(panel, panel.first_usable + L - 1, L), DataError);
}

TEST(Window, TargetDaysRespectHistory) {
    auto synth = synth_panel({.stocks = 5, .days = 100, .clusters = 1, .seed = 1});
    const PricePanel panel = make_panel(synth.raw, chronological_split(100, {6, 2, 2}));
    const auto days = target_days(panel, panel.split.train, 10);
    ASSERT_FALSE(days.empty());
    EXPECT_EQ(days.front(), 39u);
    EXPECT_EQ(days.back(), 59u);
}

TEST(PanelDir, RoundTripAndForwardFill) {
    const fs::path dir = scratch_dir("panel");
    auto synth = synth_panel({.stocks = 4, .days = 40, .clusters = 2, .seed = 2});
    write_panel_dir(dir, synth.raw);
    const RawPanel back = load_panel_dir(dir);
    EXPECT_EQ(back.tickers, synth.raw.tickers);
    EXPECT_EQ(back.calendar, synth.raw.calendar);
    EXPECT_EQ(back.closes.values(), synth.raw.closes.values());

    // S001 misses 3 days (filled), S002 misses 6 consecutive days (dropped)
    auto drop_rows = [&](const std::string& ticker, std::size_t first, std::size_t count) {
        std::ifstream in(dir / (ticker + ".csv"));
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);) lines.push_back(line);
        in.close();
        lines.erase(lines.begin() + 1 + first, lines.begin() + 1 + first + count);
        std::ofstream out(dir / (ticker + ".csv"));
        for (const auto& l : lines) out << l << '\n';
    };
    drop_rows("S001", 10, 3);
    drop_rows("S002", 10, 6);
    const RawPanel filled = load_panel_dir(dir);
    EXPECT_EQ(filled.tickers, (std::vector<std::string>{"S000", "S001", "S003"}));
    const std::size_t T = filled.n_days();
    for (std::size_t t = 10; t < 13; ++t) EXPECT_EQ(filled.closes[1 * T + t], synth.raw.closes[1 * 40 + 9]);
    EXPECT_EQ(filled.closes[1 * T + 13], synth.raw.closes[1 * 40 + 13]);
    fs::remove_all(dir);
}

TEST(PanelDir, MissingFilesAreDataErrors) {
    EXPECT_THROW(load_panel_dir(scratch_dir("empty")), DataError);
}

}  // namespace
}  // namespace gapnet

namespace gapnet {
namespace {

TEST(PublicDataset, ReadsListAndRestrictsDates) {
    const fs::path dir = scratch_dir("public");
    fs::create_directories(dir / "google_finance");
    std::ofstream(dir / "NASDAQ_tickers_qualify_dr-0.98_min-5_smooth.csv") << "AAA\nBBB\n";
    std::ofstream(dir / "google_finance" / "NASDAQ_AAA_30Y.csv")
        << "Date,Open,High,Low,Close,Volume\n31-Dec-12,1,1,1,9,5\n2-Jan-13,1,1,1,10,5\n3-Jan-13,1,1,1,11,5\n";
    std::ofstream(dir / "google_finance" / "NASDAQ_BBB_30Y.csv")
        << "Date,Open,High,Low,Close,Volume\n2013-01-02,1,1,1,20,5\n2013-01-03,1,1,1,21,5\n2013-01-04,1,1,1,22,5\n";
    const RawPanel raw = load_public_dataset(dir, "NASDAQ", "2013-01-02", "2013-01-03");
    EXPECT_EQ(raw.tickers, (std::vector<std::string>{"AAA", "BBB"}));
    EXPECT_EQ(raw.calendar, (std::vector<std::string>{"2013-01-02", "2013-01-03"}));
    EXPECT_EQ(raw.closes.values(), (std::vector<double>{10, 11, 20, 21}));
    EXPECT_THROW(load_public_dataset(dir, "NYSE"), DataError);
}

}  // namespace
}  // namespace gapnet
