// Command-line entry point: data prep, graph building, training, evaluation,
// backtesting, graph dumps, gradient checks and the ablation matrix.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gapnet/config.hpp"
#include "gapnet/errors.hpp"
#include "gapnet/gradcheck.hpp"
#include "gapnet/graphs.hpp"
#include "gapnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gapnet;

namespace {

int synth_data(const SynthOptions& o, const fs::path& out) {
    const SyntheticPanel synth = synth_panel(o);
    write_panel_dir(out, synth.raw);
    std::vector<std::string> sectors;
    for (std::size_t k : synth.cluster_of) sectors.push_back("cluster" + std::to_string(k));
    write_membership(out / "clusters.csv", synth.raw.tickers, sectors);
    std::cout << "wrote " << synth.raw.n_stocks() << " stocks x " << synth.raw.n_days() << " days to " << out.string()
              << "\n";
    return 0;
}

struct GraphArgs {
    std::string config, kind, membership, out;
    std::size_t k = 20;
    double rho = 0.5;
};

int build_graph(const GraphArgs& a) {
    const RunConfig c = load_config(a.config);
    const PricePanel panel = load_run_panel(c);
    HyperGraph h;
    if (a.kind == "industry") {
        if (a.membership.empty()) throw ConfigError("build-graph --kind industry needs --membership");
        h = industry_graph(read_membership(a.membership, panel.tickers));
    } else if (a.kind == "dtw") {
        h = dtw_k_hypergraph(normalized_closes(panel.closes, panel.split.train), a.k);
    } else {
        h = pairwise_to_hyper(correlation_graph(panel.closes, panel.split.train, a.rho));
    }
    write_graph(a.out, h);
    std::cout << "wrote " << h.edge_count() << " edges over " << h.n << " nodes to " << a.out << "\n";
    return 0;
}

int train(const std::string& config, const fs::path& out) {
    const RunConfig c = load_config(config);
    const TrainResult r = train_run(c, out);
    std::cout << "trained " << r.log.size() << " epochs; best epoch " << r.best_epoch << " valid_loss " << r.best_valid
              << "\n";
    return 0;
}

int evaluate(const fs::path& checkpoint, const std::optional<fs::path>& config, const std::string& segment,
             const fs::path& out) {
    LoadedRun run;
    load_run(run, checkpoint, config);
    const Segment& seg = segment_of(run.panel.split, parse_segment(segment));
    const Predictions p =
        evaluate_model(run.context, run.params, seg, run.config.train.lookback, run.config.train.alpha);
    write_predictions(out, prediction_table(run.panel, p));
    std::cout << "wrote " << p.days.size() << " prediction rows; mean loss " << p.mean_loss << "\n";
    return 0;
}

struct BacktestArgs {
    std::string preds, panel, out, return_mode = "mean", ic = "spearman", curve, benchmark;
    std::size_t k = 5;
    double capital = 10000.0;
};

int backtest(const BacktestArgs& a) {
    BacktestConfig c;
    c.top_k = a.k;
    c.capital = a.capital;
    c.return_mode = parse_return_mode(a.return_mode);
    c.ic = parse_ic_kind(a.ic);
    if (!a.benchmark.empty() && a.curve.empty()) throw ConfigError("--benchmark needs --emit-curve");
    const PredictionTable table = read_predictions(a.preds);
    const RawPanel raw = load_panel_dir(a.panel);
    const BacktestResult r = backtest_table(table, raw, c);
    std::optional<fs::path> curve, bench;
    if (!a.curve.empty()) curve = a.curve;
    if (!a.benchmark.empty()) bench = a.benchmark;
    write_backtest(a.out, r, raw, table.tickers, a.capital, curve, bench);
    auto show = [](const Metric& m) { return m.value ? std::to_string(*m.value) : "undefined (" + m.message + ")"; };
    std::cout << "days " << r.rows.size() << " IRR " << show(r.irr) << " SR " << show(r.sr) << " IC " << show(r.ic.ic)
              << " ICIR " << show(r.ic.icir) << "\n";
    return 0;
}

int dump_graph(const fs::path& checkpoint, const std::optional<fs::path>& config, const std::string& segment,
               const fs::path& out) {
    LoadedRun run;
    load_run(run, checkpoint, config);
    fs::create_directories(out);
    const Segment& seg = segment_of(run.panel.split, parse_segment(segment));
    std::size_t written = 0;
    evaluate_model(run.context, run.params, seg, run.config.train.lookback, run.config.train.alpha,
                   [&](std::size_t day, const DayOutput& o) {
                       const RealizedGraph* g = o.graph ? &*o.graph : (run.context.prior ? &*run.context.prior : nullptr);
                       if (!g || !seg.contains(day)) return;
                       const std::string date = run.panel.calendar[day];
                       write_graph(out / ("graph_" + date + ".txt"), to_exchange(*g));
                       std::ofstream attr(out / ("attr_" + date + ".csv"));
                       attr << "z,i,j,value\n";
                       const std::size_t z = g->masked.dim(0), n = g->masked.dim(1);
                       char buf[128];
                       for (std::size_t c = 0; c < z; ++c)
                           for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = 0; j < n; ++j) {
                                   const double v = g->masked[(c * n + i) * n + j];
                                   if (v == 0.0) continue;
                                   std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g\n", c, i, j, v);
                                   attr << buf;
                               }
                       ++written;
                   });
    if (written == 0) std::cerr << "warning: no graphs to dump (mlp backbone or empty segment)\n";
    std::cout << "wrote " << written << " daily graphs to " << out.string() << "\n";
    return 0;
}

int gradcheck(std::uint64_t seed) {
    GradcheckOptions o;
    o.seed = seed;
    const GradcheckReport r = run_gradcheck(o);
    std::cout << r.text();
    if (!r.passed()) throw NumericError("gradient check failed");
    return 0;
}

int ablate(const std::string& config, const fs::path& out, const std::string& membership, std::size_t dtw_k) {
    const RunConfig c = load_config(config);
    AblationOptions o;
    if (!membership.empty()) o.membership = membership;
    o.dtw_k = dtw_k;
    const std::string csv = ablation_csv(run_ablation(c, o));
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out, std::ios::binary) << csv;
    std::cout << csv;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gapnet: learned stock-relation graphs for ranking"};
    app.require_subcommand(1);

    SynthOptions synth;
    std::string synth_out;
    auto* s = app.add_subcommand("synth-data", "Write a synthetic clustered price panel");
    s->add_option("--stocks", synth.stocks, "Number of stocks")->capture_default_str();
    s->add_option("--days", synth.days, "Number of trading days")->capture_default_str();
    s->add_option("--clusters", synth.clusters, "Number of planted clusters (must divide --stocks)")->capture_default_str();
    s->add_option("--noise", synth.noise, "Idiosyncratic daily return std")->capture_default_str();
    s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    s->add_option("--persistence", synth.persistence, "AR(1) coefficient of the cluster factors")->capture_default_str();
    s->add_option("--out", synth_out, "Output panel directory")->required();

    GraphArgs g;
    auto* b = app.add_subcommand("build-graph", "Build a prior graph from a run config's panel");
    b->add_option("--config", g.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    b->add_option("--kind", g.kind, "industry, dtw or correlation")
        ->required()
        ->check(CLI::IsMember({"industry", "dtw", "correlation"}));
    b->add_option("--membership", g.membership, "ticker,sector CSV (industry)");
    b->add_option("--k", g.k, "Neighbours per stock (dtw)")->capture_default_str();
    b->add_option("--rho", g.rho, "Correlation threshold (correlation)")->capture_default_str();
    b->add_option("--out", g.out, "Output graph file")->required();

    std::string train_config, train_out;
    auto* t = app.add_subcommand("train", "Train a model; writes checkpoint.bin, config.json, epoch_log.csv");
    t->add_option("--config", train_config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    t->add_option("--out", train_out, "Output directory")->required();

    std::string eval_ckpt, eval_config, eval_segment = "test", eval_out;
    auto* e = app.add_subcommand("evaluate", "Write per-day predictions for a segment");
    e->add_option("--checkpoint", eval_ckpt, "checkpoint.bin from train")->required()->check(CLI::ExistingFile);
    e->add_option("--config", eval_config, "Run config (default: config.json beside the checkpoint)");
    e->add_option("--segment", eval_segment, "train, valid or test")->capture_default_str();
    e->add_option("--out", eval_out, "Output preds.csv")->required();

    BacktestArgs bt;
    auto* k = app.add_subcommand("backtest", "Top-k daily backtest of a predictions file");
    k->add_option("--preds", bt.preds, "preds.csv from evaluate")->required()->check(CLI::ExistingFile);
    k->add_option("--panel", bt.panel, "Panel directory with the closes")->required()->check(CLI::ExistingDirectory);
    k->add_option("--k", bt.k, "Stocks held per day")->capture_default_str();
    k->add_option("--capital", bt.capital, "Initial capital")->capture_default_str();
    k->add_option("--return-mode", bt.return_mode, "mean or sum over the held stocks")->capture_default_str();
    k->add_option("--ic", bt.ic, "spearman or pearson")->capture_default_str();
    k->add_option("--out", bt.out, "Output directory for ledger.csv and summary.json")->required();
    k->add_option("--emit-curve", bt.curve, "Also write a wealth curve CSV");
    k->add_option("--benchmark", bt.benchmark, "date,close series added to the curve");

    std::string dump_ckpt, dump_config, dump_segment = "test", dump_out;
    auto* d = app.add_subcommand("dump-graph", "Write each day's realized graph and attributes");
    d->add_option("--checkpoint", dump_ckpt, "checkpoint.bin from train")->required()->check(CLI::ExistingFile);
    d->add_option("--config", dump_config, "Run config (default: config.json beside the checkpoint)");
    d->add_option("--segment", dump_segment, "train, valid or test")->capture_default_str();
    d->add_option("--out", dump_out, "Output directory")->required();

    std::uint64_t gc_seed = 7;
    auto* c = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
    c->add_option("--seed", gc_seed, "Random seed")->capture_default_str();

    std::string ab_config, ab_out, ab_membership;
    std::size_t ab_k = 5;
    auto* a = app.add_subcommand("ablate", "Initialization x TPL x paradigm comparison");
    a->add_option("--config", ab_config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    a->add_option("--out", ab_out, "Output CSV")->required();
    a->add_option("--membership", ab_membership, "ticker,sector CSV (default: synthetic clusters)");
    a->add_option("--dtw-k", ab_k, "Neighbours per stock for the dtw-k prior")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    auto opt = [](const std::string& v) { return v.empty() ? std::nullopt : std::optional<fs::path>(v); };
    try {
        if (s->parsed()) return synth_data(synth, synth_out);
        if (b->parsed()) return build_graph(g);
        if (t->parsed()) return train(train_config, train_out);
        if (e->parsed()) return evaluate(eval_ckpt, opt(eval_config), eval_segment, eval_out);
        if (k->parsed()) return backtest(bt);
        if (d->parsed()) return dump_graph(dump_ckpt, opt(dump_config), dump_segment, dump_out);
        if (c->parsed()) return gradcheck(gc_seed);
        if (a->parsed()) return ablate(ab_config, ab_out, ab_membership, ab_k);
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const DataError& ex) {
        std::cerr << "data error: " << ex.what() << "\n";
        return 3;
    } catch (const NumericError& ex) {
        std::cerr << "numeric error: " << ex.what() << "\n";
        return 4;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
