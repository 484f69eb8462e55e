#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gapnet/backtest.hpp"
#include "gapnet/config.hpp"
#include "gapnet/graphs.hpp"
#include "gapnet/train.hpp"

namespace gapnet {

/// The configured data source with its split applied.
PricePanel load_run_panel(const RunConfig& config);

/// The `tpl.init` graph as a hypergraph, or an empty graph for random init.
HyperGraph load_prior(const RunConfig& config, std::size_t n_stocks);

/// Model shape, TPL initial state and (two-step) prior for `panel`.
RunContext make_context(const RunConfig& config, const PricePanel& panel);

/// Trains and writes checkpoint.bin, config.json and epoch_log.csv into `out_dir`.
TrainResult train_run(const RunConfig& config, const std::filesystem::path& out_dir);

/// Epoch log CSV. Seconds are written as NA unless `timing` is set, so logs of
/// identical runs compare byte for byte.
std::string epoch_log_csv(const std::vector<EpochRecord>& log, bool timing);

/// Parameters plus the TPL initial state under "state.memory" / "state.cell".
void write_run_checkpoint(const std::filesystem::path& file, const ModelParams& params, const TplState& init);

struct LoadedRun {
    RunConfig config;
    PricePanel panel;
    RunContext context;  // points into `panel`; do not copy LoadedRun
    ModelParams params;

    LoadedRun() = default;
    LoadedRun(const LoadedRun&) = delete;
    LoadedRun& operator=(const LoadedRun&) = delete;
};

/// Loads a checkpoint and its config (defaults to config.json next to it).
void load_run(LoadedRun& run, const std::filesystem::path& checkpoint,
              const std::optional<std::filesystem::path>& config_file = std::nullopt);

/// `preds.csv`: header `date,<tickers>`, one row per decision date (the day
/// before each target day).
struct PredictionTable {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    Tensor scores;  // rows x N
};
PredictionTable prediction_table(const PricePanel& panel, const Predictions& preds);
void write_predictions(const std::filesystem::path& file, const PredictionTable& table);
PredictionTable read_predictions(const std::filesystem::path& file);

/// Maps prediction dates and tickers onto `raw` and runs the backtest.
BacktestResult backtest_table(const PredictionTable& table, const RawPanel& raw, const BacktestConfig& config);

/// ledger.csv and summary.json into `out_dir`; optional wealth curve with a
/// benchmark series (`date,close`) rebased to the same capital.
void write_backtest(const std::filesystem::path& out_dir, const BacktestResult& result, const RawPanel& raw,
                    const std::vector<std::string>& tickers, double capital,
                    const std::optional<std::filesystem::path>& curve_file = std::nullopt,
                    const std::optional<std::filesystem::path>& benchmark_file = std::nullopt);

struct AblationRow {
    std::string component;       // "SPL+TPL" or "w.o. TPL"
    std::string initialization;  // "industry-like", "dtw-k" or "random"
    Metric basic_irr, basic_sr;      // two-step on the prior (graph-free for random)
    Metric aligned_irr, aligned_sr;  // end-to-end from the prior
};

struct AblationOptions {
    std::optional<std::filesystem::path> membership;  // required unless the data is synthetic
    std::size_t dtw_k = 5;
};

std::vector<AblationRow> run_ablation(const RunConfig& config, const AblationOptions& options);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace gapnet
