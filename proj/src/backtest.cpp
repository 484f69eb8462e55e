#include "gapnet/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "gapnet/data.hpp"
#include "gapnet/errors.hpp"

namespace gapnet {
namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Metric ratio_metric(std::span<const double> v, const std::string& what) {
    if (v.size() < 2) return {std::nullopt, what + " needs at least 2 observations"};
    const double sd = sample_std(v), m = mean_of(v);
    // a series that is constant up to rounding has no meaningful ratio
    if (sd <= 1e-12 * std::fabs(m) || sd == 0.0) return {std::nullopt, what + " undefined: zero standard deviation"};
    return {m / sd, ""};
}

}  // namespace

ReturnMode parse_return_mode(const std::string& name) {
    if (name == "mean") return ReturnMode::mean;
    if (name == "sum") return ReturnMode::sum;
    throw ConfigError("return mode must be mean or sum; got '" + name + "'");
}

IcKind parse_ic_kind(const std::string& name) {
    if (name == "spearman") return IcKind::spearman;
    if (name == "pearson") return IcKind::pearson;
    throw ConfigError("backtest.ic must be spearman or pearson; got '" + name + "'");
}

std::vector<std::size_t> select_topk(std::span<const double> preds, std::size_t k) {
    if (k > preds.size()) {
        throw ConfigError("top-k of " + std::to_string(k) + " exceeds the " + std::to_string(preds.size()) +
                          " available stocks");
    }
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a] > preds[b]; });
    order.resize(k);
    return order;
}

double daily_return(std::span<const double> close_t, std::span<const double> close_t1, ReturnMode mode) {
    if (close_t.size() != close_t1.size() || close_t.empty()) {
        throw std::invalid_argument("daily_return: need matching non-empty price lists");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < close_t.size(); ++i) {
        if (!(close_t[i] > 0.0) || !(close_t1[i] > 0.0)) throw DataError("daily_return: non-positive price");
        total += return_ratio(close_t[i], close_t1[i]);
    }
    return mode == ReturnMode::mean ? total / static_cast<double>(close_t.size()) : total;
}

double annualised_irr(std::span<const double> r) {
    if (r.empty()) throw std::invalid_argument("annualised_irr: no returns");
    double growth = 1.0;
    for (double x : r) {
        if (x <= -1.0) throw NumericError("annualised_irr: a daily return of " + std::to_string(x) + " wipes out the portfolio");
        growth *= 1.0 + x;
    }
    return std::pow(growth, 252.0 / static_cast<double>(r.size())) - 1.0;
}

Metric sharpe(std::span<const double> r) {
    Metric m = ratio_metric(r, "Sharpe ratio");
    if (m.value) *m.value *= std::sqrt(252.0);
    return m;
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

IcSummary ic_series(const Tensor& preds, const Tensor& realized, IcKind kind) {
    if (preds.rank() != 2 || preds.shape() != realized.shape()) {
        throw ShapeError("ic_series: predictions " + shape_str(preds.shape()) + " and realized " +
                         shape_str(realized.shape()) + " must be matching T x N");
    }
    const std::size_t T = preds.dim(0), N = preds.dim(1);
    IcSummary s;
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> p, r;
        for (std::size_t i = 0; i < N; ++i) {
            const double pv = preds[t * N + i], rv = realized[t * N + i];
            if (std::isfinite(pv) && std::isfinite(rv)) {
                p.push_back(pv);
                r.push_back(rv);
            }
        }
        double ic = std::numeric_limits<double>::quiet_NaN();
        if (p.size() >= 3) ic = kind == IcKind::spearman ? pearson(average_ranks(p), average_ranks(r)) : pearson(p, r);
        if (std::isnan(ic)) {
            ++s.skipped;
            continue;
        }
        s.daily.push_back(ic);
    }
    if (s.skipped > 0) {
        std::cerr << "warning: " << s.skipped << " day(s) skipped in IC (fewer than 3 valid stocks or constant ranks)\n";
    }
    if (s.daily.empty()) {
        s.ic = {std::nullopt, "IC undefined: no day with at least 3 valid stocks"};
    } else {
        s.ic = {mean_of(s.daily), ""};
    }
    s.icir = ratio_metric(s.daily, "ICIR");
    return s;
}

BacktestResult run_backtest(const Tensor& preds, const std::vector<std::size_t>& days, const Tensor& closes,
                            std::size_t k, double capital, ReturnMode mode, IcKind ic_kind) {
    if (preds.rank() != 2 || preds.dim(0) != days.size() || closes.rank() != 2 || preds.dim(1) != closes.dim(0)) {
        throw ShapeError("run_backtest: predictions " + shape_str(preds.shape()) + " do not align with " +
                         std::to_string(days.size()) + " days and closes " + shape_str(closes.shape()));
    }
    const std::size_t N = closes.dim(0), T = closes.dim(1);
    for (std::size_t r = 1; r < days.size(); ++r) {
        if (days[r] <= days[r - 1]) throw DataError("run_backtest: prediction days must increase");
    }
    BacktestResult out;
    out.k = k;
    double wealth = capital;
    std::vector<double> ic_preds, ic_real;
    for (std::size_t r = 0; r < days.size(); ++r) {
        const std::size_t d = days[r];
        if (d + 1 >= T) continue;
        const auto row = preds.data().subspan(r * N, N);
        LedgerRow lr;
        lr.day = d;
        lr.picks = select_topk(row, k);
        std::vector<double> c0, c1;
        for (std::size_t i : lr.picks) {
            c0.push_back(closes[i * T + d]);
            c1.push_back(closes[i * T + d + 1]);
        }
        lr.ret = daily_return(c0, c1, mode);
        wealth *= 1.0 + lr.ret;
        lr.wealth = wealth;
        out.returns.push_back(lr.ret);
        out.rows.push_back(std::move(lr));
        ic_preds.insert(ic_preds.end(), row.begin(), row.end());
        for (std::size_t i = 0; i < N; ++i) ic_real.push_back(return_ratio(closes[i * T + d], closes[i * T + d + 1]));
    }
    if (out.rows.empty()) throw DataError("run_backtest: no prediction day has a following close");
    out.irr = {annualised_irr(out.returns), ""};
    out.sr = sharpe(out.returns);
    const std::size_t used = out.rows.size();
    out.ic = ic_series(Tensor({used, N}, std::move(ic_preds)), Tensor({used, N}, std::move(ic_real)), ic_kind);
    return out;
}

}  // namespace gapnet
