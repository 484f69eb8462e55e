#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gapnet/tensor.hpp"

namespace gapnet {

enum class ReturnMode { mean, sum };
ReturnMode parse_return_mode(const std::string& name);

enum class IcKind { spearman, pearson };
IcKind parse_ic_kind(const std::string& name);

/// A metric that may be undefined (for example zero variance); `message` says why.
struct Metric {
    std::optional<double> value;
    std::string message;
};

/// Indices of the k largest predictions, ties broken by lower index, in rank order.
std::vector<std::size_t> select_topk(std::span<const double> preds, std::size_t k);

double daily_return(std::span<const double> close_t, std::span<const double> close_t1,
                    ReturnMode mode = ReturnMode::mean);

double annualised_irr(std::span<const double> daily_returns);
Metric sharpe(std::span<const double> daily_returns);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);
double pearson(std::span<const double> a, std::span<const double> b);

struct IcSummary {
    std::vector<double> daily;  // one entry per day with at least 3 valid stocks
    std::size_t skipped = 0;
    Metric ic, icir;
};

/// preds and realized are T x N.
IcSummary ic_series(const Tensor& preds, const Tensor& realized, IcKind kind = IcKind::spearman);

struct LedgerRow {
    std::size_t day = 0;  // decision day index t; settled on t -> t+1
    std::vector<std::size_t> picks;
    double ret = 0.0;
    double wealth = 0.0;
};

struct BacktestResult {
    std::vector<LedgerRow> rows;
    std::vector<double> returns;
    Metric irr, sr;
    IcSummary ic;
    std::size_t k = 0;
};

/// `preds` is T x N with row r made at the close of day `days[r]`; each row is
/// settled on closes[:, days[r]] -> closes[:, days[r] + 1]. Rows without a next
/// close are dropped. `closes` is N x T_total.
BacktestResult run_backtest(const Tensor& preds, const std::vector<std::size_t>& days, const Tensor& closes,
                            std::size_t k, double capital = 10000.0, ReturnMode mode = ReturnMode::mean,
                            IcKind ic_kind = IcKind::spearman);

}  // namespace gapnet
