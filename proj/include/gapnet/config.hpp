#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "gapnet/backtest.hpp"
#include "gapnet/data.hpp"
#include "gapnet/model.hpp"
#include "gapnet/train.hpp"

namespace gapnet {

/// Exactly one source is set: a panel directory, the public dataset, or a
/// synthetic panel generated on the fly.
struct DataConfig {
    std::filesystem::path dir;
    std::filesystem::path public_dir;
    std::string market = "NASDAQ";
    std::string first_date = "2013-01-02", last_date = "2017-12-08";
    std::optional<SynthOptions> synthetic;
};

struct SplitConfig {
    std::array<double, 3> ratios = {0.6, 0.2, 0.2};
    std::optional<std::array<DateRange, 3>> dates;  // train, valid, test
};

/// `tpl.init`: "graph:<path>" or "random:<seed>".
struct TplInit {
    std::filesystem::path graph;  // empty for random
    std::uint64_t seed = 0;

    bool is_graph() const { return !graph.empty(); }
    std::string text() const;
};
TplInit parse_tpl_init(const std::string& text, const std::filesystem::path& base_dir);

struct BacktestConfig {
    std::size_t top_k = 5;
    double capital = 10000.0;
    ReturnMode return_mode = ReturnMode::mean;
    IcKind ic = IcKind::spearman;
};

struct RunConfig {
    std::uint64_t seed = 0;
    DataConfig data;
    SplitConfig split;
    ModelConfig model;  // n_stocks is filled from the panel
    TrainConfig train;
    TplInit tpl_init;
    bool log_timing = false;
    BacktestConfig backtest;
};

/// Parses a JSON document. Relative paths resolve against `base_dir`. Unknown
/// keys and wrong types throw ConfigError naming the key path.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& file);

/// Fully resolved document with absolute paths; parse_config(to_json(c)) == c.
std::string to_json(const RunConfig& config);

}  // namespace gapnet
