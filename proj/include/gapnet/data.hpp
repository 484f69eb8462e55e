#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gapnet/tensor.hpp"

namespace gapnet {

inline constexpr std::size_t kFeatureCount = 5;  // close, MA5, MA10, MA20, MA30
inline constexpr std::array<std::size_t, kFeatureCount> kFeatureWindows = {1, 5, 10, 20, 30};

/// Half-open range of calendar day indices.
struct Segment {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    bool contains(std::size_t day) const { return day >= begin && day < end; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct Split {
    Segment train, valid, test;
    friend bool operator==(const Split&, const Split&) = default;
};

enum class SegmentKind { train, valid, test };
SegmentKind parse_segment(const std::string& name);
const Segment& segment_of(const Split& split, SegmentKind kind);

/// Closing prices as ingested, before feature construction.
struct RawPanel {
    std::vector<std::string> tickers;
    std::vector<std::string> calendar;  // ISO dates, strictly increasing
    Tensor closes;                      // N x T

    std::size_t n_stocks() const { return tickers.size(); }
    std::size_t n_days() const { return calendar.size(); }
};

/// The dataset: raw closes plus normalized N x T x 5 features and the split.
struct PricePanel {
    std::vector<std::string> tickers;
    std::vector<std::string> calendar;
    Tensor closes;    // N x T
    Tensor features;  // N x T x 5; days before first_usable are zero
    Split split;
    std::size_t first_usable = kFeatureWindows.back() - 1;

    std::size_t n_stocks() const { return tickers.size(); }
    std::size_t n_days() const { return calendar.size(); }
};

struct LookbackWindow {
    std::size_t day = 0;  // target day t
    Tensor x;             // N x L x M, rows t-L .. t-1
    Tensor target;        // N, return ratio of day t
};

double return_ratio(double previous, double current);

/// Per day [close, MA5, MA10, MA20, MA30] using simple means that include the
/// day itself, each channel divided by its maximum over training rows. Days
/// without 30 days of history are left zero.
Tensor build_features(const Tensor& closes, const Segment& train);

/// Splits `n_days` sequentially by ratios (normalized to sum to 1).
Split chronological_split(std::size_t n_days, const std::array<double, 3>& ratios);

/// Inclusive ISO date ranges mapped onto calendar indices.
struct DateRange {
    std::string first, last;
};
Split chronological_split(const std::vector<std::string>& calendar, const DateRange& train, const DateRange& valid,
                          const DateRange& test);

PricePanel make_panel(RawPanel raw, const Split& split);

LookbackWindow lookback_window(const PricePanel& panel, std::size_t day, std::size_t lookback);
/// Target days of a segment that have a full lookback of usable features.
std::vector<std::size_t> target_days(const PricePanel& panel, const Segment& segment, std::size_t lookback);

struct SynthOptions {
    std::size_t stocks = 30;
    std::size_t days = 500;
    std::size_t clusters = 5;
    double noise = 0.01;        // idiosyncratic return std
    std::uint64_t seed = 1;
    double persistence = 0.3;   // AR(1) coefficient of each cluster factor
    double factor_vol = 0.01;   // innovation std of the cluster factor
};

struct SyntheticPanel {
    RawPanel raw;
    std::vector<std::size_t> cluster_of;  // ground-truth label per stock
};

/// Returns = cluster factor (AR(1)) + idiosyncratic noise; prices compound from 100.
SyntheticPanel synth_panel(const SynthOptions& options);

/// Business-day calendar (Mon-Fri) starting at `first` (ISO).
std::vector<std::string> weekday_calendar(const std::string& first, std::size_t n_days);

/// Panel directory: tickers.txt (one ticker per line) and <ticker>.csv with
/// header `date,close`. Calendar is the union of dates; gaps of up to 5
/// consecutive days are forward-filled, longer gaps exclude the ticker.
RawPanel load_panel_dir(const std::filesystem::path& dir);
void write_panel_dir(const std::filesystem::path& dir, const RawPanel& raw);

/// Adapter for the public NASDAQ/NYSE ranking dataset layout:
/// <dir>/<MARKET>_tickers_qualify_dr-0.98_min-5_smooth.csv and
/// <dir>/google_finance/<MARKET>_<TICKER>_30Y.csv (Date,Open,High,Low,Close,Volume),
/// restricted to [first_date, last_date].
RawPanel load_public_dataset(const std::filesystem::path& dir, const std::string& market,
                             const std::string& first_date = "2013-01-02", const std::string& last_date = "2017-12-08");

/// A `date,close` CSV (header names matched case-insensitively) keyed by ISO date.
std::map<std::string, double> read_close_series(const std::filesystem::path& file);

/// Accepts YYYY-MM-DD, M/D/YYYY and D-Mon-YY; returns ISO.
std::string normalize_date(const std::string& text);

}  // namespace gapnet
