#include "gapnet/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "gapnet/errors.hpp"
#include "gapnet/params.hpp"

namespace gapnet {
namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        out.push_back(field);
    }
    return out;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file.string());
    out << text;
}

std::vector<std::string> sectors_for(const RunConfig& c, const PricePanel& panel, const AblationOptions& o) {
    if (o.membership) return read_membership(*o.membership, panel.tickers);
    if (!c.data.synthetic) throw ConfigError("ablate needs --membership unless the data is synthetic");
    const SyntheticPanel synth = synth_panel(*c.data.synthetic);
    std::vector<std::string> sectors;
    for (std::size_t k : synth.cluster_of) sectors.push_back("cluster" + std::to_string(k));
    return sectors;
}

// Trains one cell and backtests its test-segment predictions.
BacktestResult fit_and_backtest(const RunConfig& c, const PricePanel& panel, const RunContext& ctx) {
    const TrainResult r = train_model(ctx, c.train, ModelParams::init(ctx.model, c.seed));
    if (r.aborted) throw NumericError(r.diagnostic);
    const Predictions p = evaluate_model(ctx, r.best, panel.split.test, c.train.lookback, c.train.alpha);
    std::vector<std::size_t> decision(p.days.size());
    for (std::size_t i = 0; i < p.days.size(); ++i) decision[i] = p.days[i] - 1;
    return run_backtest(p.scores, decision, panel.closes, c.backtest.top_k, c.backtest.capital, c.backtest.return_mode,
                        c.backtest.ic);
}

nlohmann::ordered_json metric_json(const Metric& m) {
    return m.value ? nlohmann::ordered_json(*m.value) : nlohmann::ordered_json(nullptr);
}

std::string metric_cell(const Metric& m) { return m.value ? num(*m.value) : "NA"; }

}  // namespace

PricePanel load_run_panel(const RunConfig& c) {
    RawPanel raw;
    if (!c.data.dir.empty()) {
        raw = load_panel_dir(c.data.dir);
    } else if (!c.data.public_dir.empty()) {
        raw = load_public_dataset(c.data.public_dir, c.data.market, c.data.first_date, c.data.last_date);
    } else {
        raw = synth_panel(*c.data.synthetic).raw;
    }
    Split split;
    if (c.split.dates) {
        const auto& d = *c.split.dates;
        split = chronological_split(raw.calendar, d[0], d[1], d[2]);
    } else {
        split = chronological_split(raw.n_days(), c.split.ratios);
    }
    return make_panel(std::move(raw), split);
}

HyperGraph load_prior(const RunConfig& c, std::size_t n) {
    if (!c.tpl_init.is_graph()) {
        HyperGraph empty;
        empty.n = n;
        return empty;
    }
    HyperGraph h = read_graph(c.tpl_init.graph);
    if (h.n != n) {
        throw DataError("graph " + c.tpl_init.graph.string() + " has " + std::to_string(h.n) + " nodes but the panel has " +
                        std::to_string(n) + " stocks");
    }
    return h;
}

RunContext make_context(const RunConfig& c, const PricePanel& panel) {
    RunContext ctx;
    ctx.panel = &panel;
    ctx.model = c.model;
    ctx.model.n_stocks = panel.n_stocks();
    const std::size_t z = c.model.spl.channels_z;
    const HyperGraph prior = load_prior(c, panel.n_stocks());
    ctx.init = c.tpl_init.is_graph() ? init_state(prior, z) : init_state_random(panel.n_stocks(), z, c.tpl_init.seed);
    if (c.model.paradigm == Paradigm::twostep) ctx.prior = prior_graph(prior, z, ctx.model.mode());
    return ctx;
}

std::string epoch_log_csv(const std::vector<EpochRecord>& log, bool timing) {
    std::string out = "epoch,train_loss,valid_loss,lr,seconds\n";
    for (const EpochRecord& r : log) {
        out += std::to_string(r.epoch) + "," + num(r.train_loss) + "," + num(r.valid_loss) + "," + num(r.lr) + "," +
               (timing ? num(r.seconds) : "NA") + "\n";
    }
    return out;
}

void write_run_checkpoint(const std::filesystem::path& file, const ModelParams& params, const TplState& init) {
    ParameterMap entries = to_map(params);
    entries.emplace("state.memory", init.memory.detach());
    entries.emplace("state.cell", init.cell.detach());
    save_checkpoint(file, entries);
}

TrainResult train_run(const RunConfig& c, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "config.json", to_json(c));
    const PricePanel panel = load_run_panel(c);
    const RunContext ctx = make_context(c, panel);
    TrainResult r = train_model(ctx, c.train, ModelParams::init(ctx.model, c.seed));
    write_text(out_dir / "epoch_log.csv", epoch_log_csv(r.log, c.log_timing));
    if (r.aborted) throw NumericError(r.diagnostic);
    write_run_checkpoint(out_dir / "checkpoint.bin", r.best, ctx.init);
    return r;
}

void load_run(LoadedRun& run, const std::filesystem::path& checkpoint,
              const std::optional<std::filesystem::path>& config_file) {
    const ParameterMap entries = load_checkpoint(checkpoint);
    run.config = load_config(config_file ? *config_file : checkpoint.parent_path() / "config.json");
    run.panel = load_run_panel(run.config);
    run.context = make_context(run.config, run.panel);
    run.params = ModelParams::init(run.context.model, run.config.seed);
    try {
        assign_from(run.params, entries);
        if (entries.count("state.memory") && entries.count("state.cell")) {
            const Tensor& memory = entries.at("state.memory");
            if (memory.shape() != run.context.init.memory.shape()) {
                throw ShapeError("state.memory has shape " + shape_str(memory.shape()));
            }
            run.context.init = {memory, entries.at("state.cell")};
        }
    } catch (const std::exception& e) {
        throw DataError("checkpoint " + checkpoint.string() + " does not match its config: " + e.what());
    }
}

PredictionTable prediction_table(const PricePanel& panel, const Predictions& preds) {
    PredictionTable t;
    t.tickers = panel.tickers;
    for (std::size_t day : preds.days) t.dates.push_back(panel.calendar.at(day - 1));
    t.scores = preds.scores.detach();
    return t;
}

void write_predictions(const std::filesystem::path& file, const PredictionTable& t) {
    std::string out = "date";
    for (const auto& ticker : t.tickers) out += "," + ticker;
    out += "\n";
    const std::size_t n = t.tickers.size();
    for (std::size_t r = 0; r < t.dates.size(); ++r) {
        out += t.dates[r];
        for (std::size_t i = 0; i < n; ++i) out += "," + num(t.scores[r * n + i]);
        out += "\n";
    }
    write_text(file, out);
}

PredictionTable read_predictions(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty predictions file " + file.string());
    auto header = split_commas(line);
    if (header.size() < 2 || header[0] != "date") throw DataError(file.string() + ": header must be date,<tickers>");
    PredictionTable t;
    t.tickers.assign(header.begin() + 1, header.end());
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_commas(line);
        if (fields.size() != header.size()) throw DataError(file.string() + ": row width differs from header: " + line);
        t.dates.push_back(normalize_date(fields[0]));
        for (std::size_t i = 1; i < fields.size(); ++i) {
            try {
                values.push_back(std::stod(fields[i]));
            } catch (const std::exception&) {
                throw DataError(file.string() + ": bad number '" + fields[i] + "'");
            }
        }
    }
    if (t.dates.empty()) throw DataError(file.string() + ": no prediction rows");
    t.scores = Tensor({t.dates.size(), t.tickers.size()}, std::move(values));
    return t;
}

BacktestResult backtest_table(const PredictionTable& t, const RawPanel& raw, const BacktestConfig& c) {
    std::map<std::string, std::size_t> ticker_index, date_index;
    for (std::size_t i = 0; i < raw.tickers.size(); ++i) ticker_index[raw.tickers[i]] = i;
    for (std::size_t d = 0; d < raw.calendar.size(); ++d) date_index[raw.calendar[d]] = d;
    const std::size_t n = t.tickers.size(), T = raw.n_days();
    std::vector<double> closes;
    closes.reserve(n * T);
    for (const auto& ticker : t.tickers) {
        const auto it = ticker_index.find(ticker);
        if (it == ticker_index.end()) throw DataError("ticker " + ticker + " is not in the price panel");
        const auto row = raw.closes.data().subspan(it->second * T, T);
        closes.insert(closes.end(), row.begin(), row.end());
    }
    std::vector<std::size_t> days;
    for (const auto& date : t.dates) {
        const auto it = date_index.find(date);
        if (it == date_index.end()) throw DataError("prediction date " + date + " is not in the price calendar");
        days.push_back(it->second);
    }
    return run_backtest(t.scores, days, Tensor({n, T}, std::move(closes)), c.top_k, c.capital, c.return_mode, c.ic);
}

void write_backtest(const std::filesystem::path& out_dir, const BacktestResult& r, const RawPanel& raw,
                    const std::vector<std::string>& tickers, double capital,
                    const std::optional<std::filesystem::path>& curve_file,
                    const std::optional<std::filesystem::path>& benchmark_file) {
    std::filesystem::create_directories(out_dir);
    std::string ledger = "date,picks,return,wealth\n";
    for (const LedgerRow& row : r.rows) {
        std::string picks;
        for (std::size_t i : row.picks) picks += (picks.empty() ? "" : ";") + tickers[i];
        ledger += raw.calendar[row.day] + "," + picks + "," + num(row.ret) + "," + num(row.wealth) + "\n";
    }
    write_text(out_dir / "ledger.csv", ledger);

    nlohmann::ordered_json summary;
    summary["irr"] = metric_json(r.irr);
    summary["sharpe"] = metric_json(r.sr);
    summary["ic"] = metric_json(r.ic.ic);
    summary["icir"] = metric_json(r.ic.icir);
    summary["k"] = r.k;
    summary["days"] = r.rows.size();
    summary["ic_days_skipped"] = r.ic.skipped;
    nlohmann::ordered_json notes = nlohmann::ordered_json::object();
    for (const auto& [key, m] : {std::pair<const char*, const Metric*>{"irr", &r.irr}, {"sharpe", &r.sr},
                                 {"ic", &r.ic.ic}, {"icir", &r.ic.icir}}) {
        if (!m->value) notes[key] = m->message;
    }
    summary["messages"] = notes;
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");

    if (!curve_file) return;
    std::map<std::string, double> bench;
    if (benchmark_file) bench = read_close_series(*benchmark_file);
    auto bench_close = [&](const std::string& date) {
        const auto it = bench.find(date);
        if (it == bench.end()) throw DataError("benchmark series has no close on " + date);
        return it->second;
    };
    const std::string first = raw.calendar[r.rows.front().day];
    std::string curve = benchmark_file ? "date,wealth,benchmark_wealth\n" : "date,wealth\n";
    curve += first + "," + num(capital) + (benchmark_file ? "," + num(capital) : "") + "\n";
    for (const LedgerRow& row : r.rows) {
        const std::string date = raw.calendar[row.day + 1];
        curve += date + "," + num(row.wealth);
        if (benchmark_file) curve += "," + num(capital * bench_close(date) / bench_close(first));
        curve += "\n";
    }
    write_text(*curve_file, curve);
}

std::vector<AblationRow> run_ablation(const RunConfig& c, const AblationOptions& o) {
    const PricePanel panel = load_run_panel(c);
    const std::size_t n = panel.n_stocks(), z = c.model.spl.channels_z;
    HyperGraph none;
    none.n = n;
    const std::vector<std::pair<std::string, HyperGraph>> inits = {
        {"industry-like", industry_graph(sectors_for(c, panel, o))},
        {"dtw-k", dtw_k_hypergraph(normalized_closes(panel.closes, panel.split.train), o.dtw_k)},
        {"random", none},
    };

    RunContext base;
    base.panel = &panel;
    base.model = c.model;
    base.model.n_stocks = n;
    const std::uint64_t random_seed = c.tpl_init.is_graph() ? c.seed : c.tpl_init.seed;

    // Without TPL the memory is never read, so that cell does not depend on the initialization.
    RunContext no_tpl = base;
    no_tpl.model.paradigm = Paradigm::end2end;
    no_tpl.model.tpl_enabled = false;
    no_tpl.init = init_state_random(n, z, random_seed);
    const BacktestResult without = fit_and_backtest(c, panel, no_tpl);

    std::vector<AblationRow> rows;
    for (const auto& [name, graph] : inits) {
        RunContext basic = base;
        basic.model.paradigm = Paradigm::twostep;
        if (name == "random") basic.model.backbone = BackboneKind::mlp;
        basic.prior = prior_graph(graph, z, basic.model.mode());
        basic.init = init_state(graph, z);
        const BacktestResult two = fit_and_backtest(c, panel, basic);

        RunContext aligned = base;
        aligned.model.paradigm = Paradigm::end2end;
        aligned.model.tpl_enabled = true;
        aligned.init = name == "random" ? init_state_random(n, z, random_seed) : init_state(graph, z);
        const BacktestResult full = fit_and_backtest(c, panel, aligned);

        rows.push_back({"SPL+TPL", name, two.irr, two.sr, full.irr, full.sr});
        rows.push_back({"w.o. TPL", name, two.irr, two.sr, without.irr, without.sr});
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "component,initialization,basic_irr,basic_sr,aligned_irr,aligned_sr\n";
    for (const AblationRow& r : rows) {
        out += r.component + "," + r.initialization + "," + metric_cell(r.basic_irr) + "," + metric_cell(r.basic_sr) +
               "," + metric_cell(r.aligned_irr) + "," + metric_cell(r.aligned_sr) + "\n";
    }
    return out;
}

}  // namespace gapnet
