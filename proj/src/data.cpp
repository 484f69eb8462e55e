#include "gapnet/data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gapnet/errors.hpp"

namespace gapnet {
namespace {

constexpr std::size_t kMaxFillGap = 5;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        fields.push_back(field);
    }
    return fields;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double parse_double(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw DataError("not a number '" + text + "' in " + where);
    }
}

std::string iso(const std::chrono::year_month_day& ymd) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::chrono::year_month_day parse_iso(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3) throw DataError("bad ISO date '" + s + "'");
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw DataError("invalid date '" + s + "'");
    return ymd;
}

using Series = std::map<std::string, double>;  // ISO date -> close

// Aligns per-ticker series on the union calendar with bounded forward fill.
RawPanel align_series(const std::vector<std::string>& tickers, const std::vector<Series>& series) {
    std::set<std::string> dates;
    for (const auto& s : series)
        for (const auto& [date, close] : s) dates.insert(date);
    RawPanel raw;
    raw.calendar.assign(dates.begin(), dates.end());
    const std::size_t T = raw.calendar.size();
    std::vector<double> rows;
    for (std::size_t i = 0; i < tickers.size(); ++i) {
        std::vector<double> row(T);
        bool ok = true;
        std::size_t gap = 0;
        for (std::size_t t = 0; t < T && ok; ++t) {
            auto it = series[i].find(raw.calendar[t]);
            if (it != series[i].end()) {
                row[t] = it->second;
                gap = 0;
                ok = row[t] > 0.0 && std::isfinite(row[t]);
            } else {
                ++gap;
                ok = t > 0 && gap <= kMaxFillGap;
                if (ok) row[t] = row[t - 1];
            }
        }
        if (!ok) continue;
        raw.tickers.push_back(tickers[i]);
        rows.insert(rows.end(), row.begin(), row.end());
    }
    raw.closes = Tensor({raw.tickers.size(), T}, std::move(rows));
    return raw;
}

Series read_series(const std::filesystem::path& file, const std::string& date_col, const std::string& close_col) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file " + file.string());
    const auto header = split_csv_line(line);
    std::size_t di = header.size(), ci = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (lower(header[c]) == date_col) di = c;
        if (lower(header[c]) == close_col) ci = c;
    }
    if (di == header.size() || ci == header.size()) {
        throw DataError(file.string() + ": header must contain '" + date_col + "' and '" + close_col + "'");
    }
    Series series;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() <= std::max(di, ci)) throw DataError(file.string() + ": short row '" + line + "'");
        series[normalize_date(fields[di])] = parse_double(fields[ci], file.string());
    }
    return series;
}

}  // namespace

std::map<std::string, double> read_close_series(const std::filesystem::path& file) {
    return read_series(file, "date", "close");
}

SegmentKind parse_segment(const std::string& name) {
    if (name == "train") return SegmentKind::train;
    if (name == "valid") return SegmentKind::valid;
    if (name == "test") return SegmentKind::test;
    throw ConfigError("unknown segment '" + name + "' (expected train, valid or test)");
}

const Segment& segment_of(const Split& split, SegmentKind kind) {
    switch (kind) {
        case SegmentKind::train: return split.train;
        case SegmentKind::valid: return split.valid;
        case SegmentKind::test: return split.test;
    }
    return split.test;
}

double return_ratio(double previous, double current) {
    if (!(previous > 0.0)) throw DataError("return_ratio: previous price must be positive");
    return (current - previous) / previous;
}

Tensor build_features(const Tensor& closes, const Segment& train) {
    if (closes.rank() != 2) throw ShapeError("build_features: closes must be N x T, got " + shape_str(closes.shape()));
    const std::size_t N = closes.dim(0), T = closes.dim(1);
    const std::size_t first = kFeatureWindows.back() - 1;
    if (T < kFeatureWindows.back()) throw DataError("build_features: need at least 30 days, got " + std::to_string(T));

    Tensor features({N, T, kFeatureCount}, 0.0);
    auto f = features.mutable_data();
    const auto c = closes.data();
    for (std::size_t i = 0; i < N; ++i) {
        // prefix sums keep the moving averages exact-order deterministic
        std::vector<double> prefix(T + 1, 0.0);
        for (std::size_t t = 0; t < T; ++t) prefix[t + 1] = prefix[t] + c[i * T + t];
        for (std::size_t t = first; t < T; ++t)
            for (std::size_t k = 0; k < kFeatureCount; ++k) {
                const std::size_t w = kFeatureWindows[k];
                f[(i * T + t) * kFeatureCount + k] =
                    w == 1 ? c[i * T + t] : (prefix[t + 1] - prefix[t + 1 - w]) / static_cast<double>(w);
            }
    }

    std::array<double, kFeatureCount> max_train{};
    max_train.fill(-INFINITY);
    const std::size_t lo = std::max(first, train.begin), hi = std::min(T, train.end);
    if (lo >= hi) throw DataError("build_features: training segment has no day with 30 days of history");
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t t = lo; t < hi; ++t)
            for (std::size_t k = 0; k < kFeatureCount; ++k)
                max_train[k] = std::max(max_train[k], f[(i * T + t) * kFeatureCount + k]);
    for (double m : max_train) {
        if (!(m > 0.0) || !std::isfinite(m)) throw DataError("build_features: non-positive training maximum");
    }
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t t = first; t < T; ++t)
            for (std::size_t k = 0; k < kFeatureCount; ++k) f[(i * T + t) * kFeatureCount + k] /= max_train[k];
    return features;
}

Split chronological_split(std::size_t n_days, const std::array<double, 3>& ratios) {
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (!(total > 0.0) || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
        throw ConfigError("split ratios must be non-negative with positive sum");
    }
    const auto train_end = static_cast<std::size_t>(std::llround(static_cast<double>(n_days) * ratios[0] / total));
    const auto valid_end =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_days) * (ratios[0] + ratios[1]) / total));
    Split split{{0, train_end}, {train_end, valid_end}, {valid_end, n_days}};
    if (split.train.size() == 0 || split.valid.size() == 0 || split.test.size() == 0) {
        throw ConfigError("split ratios leave an empty segment for " + std::to_string(n_days) + " days");
    }
    return split;
}

Split chronological_split(const std::vector<std::string>& calendar, const DateRange& train, const DateRange& valid,
                          const DateRange& test) {
    if (calendar.empty()) throw DataError("empty calendar");
    auto to_segment = [&](const DateRange& r, const char* name) {
        const std::string first = normalize_date(r.first), last = normalize_date(r.last);
        if (first > last) throw ConfigError(std::string(name) + " range is reversed");
        if (first < calendar.front() || last > calendar.back()) {
            throw DataError(std::string(name) + " range " + first + ".." + last + " lies outside the calendar " +
                            calendar.front() + ".." + calendar.back());
        }
        const auto b = std::lower_bound(calendar.begin(), calendar.end(), first);
        const auto e = std::upper_bound(calendar.begin(), calendar.end(), last);
        Segment s{static_cast<std::size_t>(b - calendar.begin()), static_cast<std::size_t>(e - calendar.begin())};
        if (s.size() == 0) throw DataError(std::string(name) + " range contains no trading day");
        return s;
    };
    Split split{to_segment(train, "train"), to_segment(valid, "valid"), to_segment(test, "test")};
    if (split.train.end > split.valid.begin || split.valid.end > split.test.begin) {
        throw ConfigError("split ranges overlap or are out of order");
    }
    return split;
}

PricePanel make_panel(RawPanel raw, const Split& split) {
    if (split.test.end > raw.n_days()) throw DataError("split extends past the calendar");
    PricePanel panel;
    panel.features = build_features(raw.closes, split.train);
    panel.tickers = std::move(raw.tickers);
    panel.calendar = std::move(raw.calendar);
    panel.closes = std::move(raw.closes);
    panel.split = split;
    return panel;
}

LookbackWindow lookback_window(const PricePanel& panel, std::size_t day, std::size_t lookback) {
    const std::size_t N = panel.n_stocks(), T = panel.n_days();
    if (day >= T || day < panel.first_usable + lookback) {
        throw DataError("day " + std::to_string(day) + " has no complete lookback window of " +
                        std::to_string(lookback));
    }
    LookbackWindow w;
    w.day = day;
    w.x = Tensor({N, lookback, kFeatureCount}, 0.0);
    w.target = Tensor({N}, 0.0);
    auto x = w.x.mutable_data();
    auto target = w.target.mutable_data();
    const auto f = panel.features.data();
    const auto c = panel.closes.data();
    for (std::size_t i = 0; i < N; ++i) {
        const double* src = f.data() + (i * T + day - lookback) * kFeatureCount;
        std::copy_n(src, lookback * kFeatureCount, x.begin() + i * lookback * kFeatureCount);
        target[i] = return_ratio(c[i * T + day - 1], c[i * T + day]);
    }
    return w;
}

std::vector<std::size_t> target_days(const PricePanel& panel, const Segment& segment, std::size_t lookback) {
    std::vector<std::size_t> days;
    for (std::size_t t = std::max(segment.begin, panel.first_usable + lookback); t < segment.end; ++t) {
        days.push_back(t);
    }
    return days;
}

std::vector<std::string> weekday_calendar(const std::string& first, std::size_t n_days) {
    using namespace std::chrono;
    sys_days day{parse_iso(first)};
    std::vector<std::string> calendar;
    calendar.reserve(n_days);
    while (calendar.size() < n_days) {
        const weekday wd{day};
        if (wd != Saturday && wd != Sunday) calendar.push_back(iso(year_month_day{day}));
        day += days{1};
    }
    return calendar;
}

SyntheticPanel synth_panel(const SynthOptions& o) {
    if (o.clusters == 0 || o.stocks % o.clusters != 0) {
        throw ConfigError("synth_panel: stocks (" + std::to_string(o.stocks) + ") must be divisible by clusters (" +
                          std::to_string(o.clusters) + ")");
    }
    if (o.days < 2) throw ConfigError("synth_panel: need at least 2 days");
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const std::size_t per_cluster = o.stocks / o.clusters;
    SyntheticPanel out;
    out.cluster_of.resize(o.stocks);
    for (std::size_t i = 0; i < o.stocks; ++i) {
        out.cluster_of[i] = i / per_cluster;
        char name[16];
        std::snprintf(name, sizeof name, "S%03zu", i);
        out.raw.tickers.emplace_back(name);
    }
    out.raw.calendar = weekday_calendar("2013-01-02", o.days);

    std::vector<double> factor(o.clusters, 0.0);
    std::vector<double> closes(o.stocks * o.days);
    for (std::size_t i = 0; i < o.stocks; ++i) closes[i * o.days] = 100.0;
    for (std::size_t t = 1; t < o.days; ++t) {
        for (double& f : factor) f = o.persistence * f + o.factor_vol * gauss(rng);
        for (std::size_t i = 0; i < o.stocks; ++i) {
            const double eps = o.noise > 0.0 ? o.noise * gauss(rng) : 0.0;
            // keep prices strictly positive under very large noise settings
            const double r = std::max(factor[out.cluster_of[i]] + eps, -0.95);
            closes[i * o.days + t] = closes[i * o.days + t - 1] * (1.0 + r);
        }
    }
    out.raw.closes = Tensor({o.stocks, o.days}, std::move(closes));
    return out;
}

RawPanel load_panel_dir(const std::filesystem::path& dir) {
    std::ifstream list(dir / "tickers.txt");
    if (!list) throw DataError("missing ticker list " + (dir / "tickers.txt").string());
    std::vector<std::string> tickers;
    std::string line;
    while (std::getline(list, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) tickers.push_back(line);
    }
    if (tickers.empty()) throw DataError("empty ticker list in " + dir.string());
    std::vector<Series> series;
    for (const auto& t : tickers) series.push_back(read_series(dir / (t + ".csv"), "date", "close"));
    RawPanel raw = align_series(tickers, series);
    if (raw.tickers.empty()) throw DataError("no ticker in " + dir.string() + " survived gap filling");
    return raw;
}

void write_panel_dir(const std::filesystem::path& dir, const RawPanel& raw) {
    std::filesystem::create_directories(dir);
    std::ofstream list(dir / "tickers.txt");
    const std::size_t T = raw.n_days();
    for (std::size_t i = 0; i < raw.n_stocks(); ++i) {
        list << raw.tickers[i] << '\n';
        std::ofstream csv(dir / (raw.tickers[i] + ".csv"));
        csv << "date,close\n";
        csv.precision(17);
        for (std::size_t t = 0; t < T; ++t) csv << raw.calendar[t] << ',' << raw.closes[i * T + t] << '\n';
        if (!csv) throw DataError("failed writing " + (dir / (raw.tickers[i] + ".csv")).string());
    }
}

RawPanel load_public_dataset(const std::filesystem::path& dir, const std::string& market,
                             const std::string& first_date, const std::string& last_date) {
    const auto list_path = dir / (market + "_tickers_qualify_dr-0.98_min-5_smooth.csv");
    std::ifstream list(list_path);
    if (!list) throw DataError("missing ticker list " + list_path.string());
    std::vector<std::string> tickers;
    std::string line;
    while (std::getline(list, line)) {
        const auto fields = split_csv_line(line);
        if (!fields.empty() && !fields[0].empty()) tickers.push_back(fields[0]);
    }
    std::vector<Series> series;
    for (const auto& t : tickers) {
        Series s = read_series(dir / "google_finance" / (market + "_" + t + "_30Y.csv"), "date", "close");
        for (auto it = s.begin(); it != s.end();) {
            it = (it->first < first_date || it->first > last_date) ? s.erase(it) : std::next(it);
        }
        series.push_back(std::move(s));
    }
    return align_series(tickers, series);
}

std::string normalize_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char mon[4] = {};
    std::chrono::year_month_day ymd;
    if (std::sscanf(text.c_str(), "%4d-%2u-%2u", &y, &m, &d) == 3) {
        ymd = {std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    } else if (std::sscanf(text.c_str(), "%u/%u/%d", &m, &d, &y) == 3) {
        ymd = {std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    } else if (std::sscanf(text.c_str(), "%u-%3[A-Za-z]-%d", &d, mon, &y) == 3) {
        static const std::array<std::string, 12> names = {"jan", "feb", "mar", "apr", "may", "jun",
                                                          "jul", "aug", "sep", "oct", "nov", "dec"};
        const auto it = std::find(names.begin(), names.end(), lower(mon));
        if (it == names.end()) throw DataError("unknown month in date '" + text + "'");
        if (y < 100) y += y < 50 ? 2000 : 1900;
        ymd = {std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(it - names.begin() + 1)},
               std::chrono::day{d}};
    } else {
        throw DataError("unrecognized date '" + text + "'");
    }
    if (!ymd.ok()) throw DataError("invalid date '" + text + "'");
    return iso(ymd);
}

}  // namespace gapnet
