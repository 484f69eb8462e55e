#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gapnet/errors.hpp"
#include "gapnet/pipeline.hpp"

namespace gapnet {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gapnet_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunConfig tiny_config() {
    return parse_config(R"({
        "seed": 4, "lookback": 8, "backbone_hidden": 4,
        "data": {"synthetic": {"stocks": 6, "days": 120, "clusters": 2, "seed": 4}},
        "spl": {"kernel_sizes": [3], "channels_z": 2, "ffn_dim": 8, "dropout": 0.1},
        "tpl": {"init": "random:9"},
        "train": {"epochs": 2, "max_lr": 0.003, "patience": 0},
        "backtest": {"top_k": 2}
    })",
                        "/");
}

TEST(EpochLog, SecondsOnlyWhenTimingRequested) {
    const std::vector<EpochRecord> log = {{1, 0.5, 0.25, 1e-3, 1.5}};
    EXPECT_EQ(epoch_log_csv(log, false), "epoch,train_loss,valid_loss,lr,seconds\n1,0.5,0.25,0.001,NA\n");
    EXPECT_EQ(epoch_log_csv(log, true), "epoch,train_loss,valid_loss,lr,seconds\n1,0.5,0.25,0.001,1.5\n");
}

TEST(Predictions, FileRoundTripIsBitExact) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    PredictionTable t;
    t.tickers = {"AAA", "BBB", "CCC"};
    t.dates = {"2014-01-02", "2014-01-03"};
    std::vector<double> v(6);
    for (double& x : v) x = g(rng) * 1e-3;
    t.scores = Tensor({2, 3}, v);
    const fs::path file = scratch("preds") / "preds.csv";
    write_predictions(file, t);
    const PredictionTable back = read_predictions(file);
    EXPECT_EQ(back.tickers, t.tickers);
    EXPECT_EQ(back.dates, t.dates);
    EXPECT_EQ(back.scores.values(), t.scores.values());
}

TEST(Predictions, RowsAreLabelledWithTheDecisionDate) {
    const RunConfig c = tiny_config();
    const PricePanel panel = load_run_panel(c);
    Predictions p;
    p.days = {panel.split.test.begin, panel.split.test.begin + 1};
    p.scores = Tensor({2, panel.n_stocks()}, 0.0);
    const PredictionTable t = prediction_table(panel, p);
    EXPECT_EQ(t.dates.front(), panel.calendar[panel.split.test.begin - 1]);
}

TEST(BacktestTable, MatchesDirectBacktestAndRejectsGaps) {
    RawPanel raw;
    raw.tickers = {"A", "B", "C"};
    raw.calendar = {"2014-01-02", "2014-01-03", "2014-01-06", "2014-01-07"};
    raw.closes = Tensor({3, 4}, std::vector<double>{10, 11, 12, 11, 20, 19, 21, 22, 5, 5, 6, 7});
    PredictionTable t;
    t.tickers = {"C", "A"};
    t.dates = {"2014-01-03", "2014-01-06"};
    t.scores = Tensor({2, 2}, std::vector<double>{0.1, 0.2, 0.3, -0.1});
    BacktestConfig c;
    c.top_k = 1;
    const BacktestResult r = backtest_table(t, raw, c);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(r.rows[0].ret, (12.0 - 11.0) / 11.0);  // A on 01-03 -> 01-06
    EXPECT_DOUBLE_EQ(r.rows[1].ret, (7.0 - 6.0) / 6.0);    // C on 01-06 -> 01-07

    PredictionTable unknown = t;
    unknown.tickers[0] = "Z";
    EXPECT_THROW(backtest_table(unknown, raw, c), DataError);
    PredictionTable gap = t;
    gap.dates[1] = "2014-01-04";
    EXPECT_THROW(backtest_table(gap, raw, c), DataError);
}

TEST(Context, TwoStepRandomInitHasEmptyPrior) {
    RunConfig c = tiny_config();
    c.model.paradigm = Paradigm::twostep;
    const PricePanel panel = load_run_panel(c);
    const RunContext ctx = make_context(c, panel);
    ASSERT_TRUE(ctx.prior);
    EXPECT_EQ(ctx.prior->live_edges(), 0u);
    EXPECT_EQ(ctx.model.n_stocks, 6u);
}

TEST(Context, GraphNodeCountMustMatchPanel) {
    const fs::path dir = scratch("prior");
    HyperGraph h;
    h.n = 5;
    h.edges = {{0, 1}};
    write_graph(dir / "g.txt", h);
    RunConfig c = tiny_config();
    c.tpl_init = parse_tpl_init("graph:g.txt", dir);
    const PricePanel panel = load_run_panel(c);
    EXPECT_THROW(make_context(c, panel), DataError);
}

TEST(TrainRun, CheckpointReloadsToTheSamePredictions) {
    const RunConfig c = tiny_config();
    const fs::path dir = scratch("train");
    const TrainResult r = train_run(c, dir);
    EXPECT_TRUE(fs::exists(dir / "config.json"));
    EXPECT_EQ(slurp(dir / "epoch_log.csv"), epoch_log_csv(r.log, false));

    LoadedRun run;
    load_run(run, dir / "checkpoint.bin");
    const PricePanel panel = load_run_panel(c);
    const RunContext ctx = make_context(c, panel);
    const Predictions direct = evaluate_model(ctx, r.best, panel.split.test, 8, 1.0);
    const Predictions loaded = evaluate_model(run.context, run.params, run.panel.split.test, 8, 1.0);
    EXPECT_EQ(direct.scores.values(), loaded.scores.values());
}

TEST(TrainRun, MismatchedCheckpointIsADataError) {
    const fs::path dir = scratch("mismatch");
    train_run(tiny_config(), dir);
    std::ofstream(dir / "other.json") << R"({"lookback": 8, "data": {"synthetic": {"stocks": 8, "days": 120,
        "clusters": 2}}, "spl": {"kernel_sizes": [3], "channels_z": 2, "ffn_dim": 8}})";
    LoadedRun run;
    EXPECT_THROW(load_run(run, dir / "checkpoint.bin", dir / "other.json"), DataError);
}

TEST(Ablation, OneRowPerInitializationAndComponent) {
    RunConfig c = tiny_config();
    c.train.epochs = 1;
    AblationOptions o;
    o.dtw_k = 2;
    const auto rows = run_ablation(c, o);
    ASSERT_EQ(rows.size(), 6u);
    const std::string csv = ablation_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "component,initialization,basic_irr,basic_sr,aligned_irr,aligned_sr");
    for (const auto& init : {"industry-like", "dtw-k", "random"}) {
        EXPECT_NE(csv.find(std::string("SPL+TPL,") + init + ","), std::string::npos);
        EXPECT_NE(csv.find(std::string("w.o. TPL,") + init + ","), std::string::npos);
    }
}

}  // namespace
}  // namespace gapnet
