#include "gapnet/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

#include "gapnet/errors.hpp"

namespace gapnet {
namespace {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config key '" + path + "' must be an object");
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    require_object(j, path.empty() ? "<root>" : path);
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) throw ConfigError("unknown config key '" + join(path, key) + "'");
    }
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError("config key '" + path + "' must be a number");
    return j.get<double>();
}

std::uint64_t count(const json& j, const std::string& path) {
    if (!j.is_number_unsigned()) throw ConfigError("config key '" + path + "' must be a non-negative integer");
    return j.get<std::uint64_t>();
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError("config key '" + path + "' must be a string");
    return j.get<std::string>();
}

bool flag(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError("config key '" + path + "' must be true or false");
    return j.get<bool>();
}

// Calls fn(value, path) when `key` is present.
template <class Fn>
void with(const json& j, const std::string& path, const char* key, Fn&& fn) {
    if (auto it = j.find(key); it != j.end()) fn(*it, join(path, key));
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
    const std::filesystem::path path(p);
    return std::filesystem::absolute(path.is_absolute() ? path : base / path).lexically_normal();
}

DateRange date_range(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("config key '" + path + "' must be [first, last] dates");
    return {normalize_date(text(j[0], path + "[0]")), normalize_date(text(j[1], path + "[1]"))};
}

void parse_data(const json& j, const std::string& path, const std::filesystem::path& base, DataConfig& d) {
    allow_keys(j, path, {"dir", "public_dir", "market", "first_date", "last_date", "synthetic"});
    with(j, path, "dir", [&](const json& v, const std::string& p) { d.dir = resolve(text(v, p), base); });
    with(j, path, "public_dir", [&](const json& v, const std::string& p) { d.public_dir = resolve(text(v, p), base); });
    with(j, path, "market", [&](const json& v, const std::string& p) { d.market = text(v, p); });
    with(j, path, "first_date", [&](const json& v, const std::string& p) { d.first_date = normalize_date(text(v, p)); });
    with(j, path, "last_date", [&](const json& v, const std::string& p) { d.last_date = normalize_date(text(v, p)); });
    with(j, path, "synthetic", [&](const json& s, const std::string& sp) {
        allow_keys(s, sp, {"stocks", "days", "clusters", "noise", "seed", "persistence", "factor_vol"});
        SynthOptions o;
        with(s, sp, "stocks", [&](const json& v, const std::string& p) { o.stocks = count(v, p); });
        with(s, sp, "days", [&](const json& v, const std::string& p) { o.days = count(v, p); });
        with(s, sp, "clusters", [&](const json& v, const std::string& p) { o.clusters = count(v, p); });
        with(s, sp, "noise", [&](const json& v, const std::string& p) { o.noise = number(v, p); });
        with(s, sp, "seed", [&](const json& v, const std::string& p) { o.seed = count(v, p); });
        with(s, sp, "persistence", [&](const json& v, const std::string& p) { o.persistence = number(v, p); });
        with(s, sp, "factor_vol", [&](const json& v, const std::string& p) { o.factor_vol = number(v, p); });
        d.synthetic = o;
    });
    const int sources = !d.dir.empty() + !d.public_dir.empty() + d.synthetic.has_value();
    if (sources != 1) throw ConfigError("config key 'data' needs exactly one of dir, public_dir, synthetic");
}

void parse_split(const json& j, const std::string& path, SplitConfig& s) {
    allow_keys(j, path, {"ratios", "train", "valid", "test"});
    with(j, path, "ratios", [&](const json& v, const std::string& p) {
        if (!v.is_array() || v.size() != 3) throw ConfigError("config key '" + p + "' must be [train, valid, test]");
        for (std::size_t i = 0; i < 3; ++i) {
            s.ratios[i] = number(v[i], p + "[" + std::to_string(i) + "]");
            if (!(s.ratios[i] > 0.0)) throw ConfigError("config key '" + p + "' needs positive ratios");
        }
    });
    const int ranges = j.contains("train") + j.contains("valid") + j.contains("test");
    if (ranges == 0) return;
    if (ranges != 3) throw ConfigError("config key 'split' needs all of train, valid, test date ranges");
    if (j.contains("ratios")) throw ConfigError("config key 'split' takes ratios or date ranges, not both");
    s.dates = std::array<DateRange, 3>{date_range(j["train"], join(path, "train")),
                                       date_range(j["valid"], join(path, "valid")),
                                       date_range(j["test"], join(path, "test"))};
}

void parse_spl(const json& j, const std::string& path, SplConfig& s) {
    allow_keys(j, path, {"kernel_sizes", "channels_z", "heads", "ffn_dim", "dropout"});
    with(j, path, "kernel_sizes", [&](const json& v, const std::string& p) {
        if (!v.is_array() || v.empty()) throw ConfigError("config key '" + p + "' must be a non-empty list");
        s.kernel_sizes.clear();
        for (std::size_t i = 0; i < v.size(); ++i) s.kernel_sizes.push_back(count(v[i], p + "[" + std::to_string(i) + "]"));
    });
    with(j, path, "channels_z", [&](const json& v, const std::string& p) { s.channels_z = count(v, p); });
    with(j, path, "heads", [&](const json& v, const std::string& p) { s.heads = count(v, p); });
    with(j, path, "ffn_dim", [&](const json& v, const std::string& p) { s.ffn_dim = count(v, p); });
    with(j, path, "dropout", [&](const json& v, const std::string& p) { s.dropout = number(v, p); });
}

}  // namespace

std::string TplInit::text() const {
    return is_graph() ? "graph:" + graph.string() : "random:" + std::to_string(seed);
}

TplInit parse_tpl_init(const std::string& spec, const std::filesystem::path& base_dir) {
    TplInit init;
    if (spec.rfind("graph:", 0) == 0 && spec.size() > 6) {
        init.graph = resolve(spec.substr(6), base_dir);
        return init;
    }
    if (spec.rfind("random:", 0) == 0) {
        const std::string digits = spec.substr(7);
        if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
            init.seed = std::stoull(digits);
            return init;
        }
    }
    throw ConfigError("config key 'tpl.init' must be graph:<path> or random:<seed>; got '" + spec + "'");
}

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    allow_keys(root, "",
               {"seed", "lookback", "backbone", "backbone_hidden", "data", "split", "spl", "tpl", "realization", "train",
                "backtest"});
    RunConfig c;
    with(root, "", "seed", [&](const json& v, const std::string& p) { c.seed = count(v, p); });
    with(root, "", "lookback", [&](const json& v, const std::string& p) { c.model.spl.lookback = count(v, p); });
    with(root, "", "backbone", [&](const json& v, const std::string& p) { c.model.backbone = parse_backbone(text(v, p)); });
    with(root, "", "backbone_hidden", [&](const json& v, const std::string& p) { c.model.hidden = count(v, p); });
    if (!root.contains("data")) throw ConfigError("config key 'data' is required");
    parse_data(root["data"], "data", base_dir, c.data);
    with(root, "", "split", [&](const json& v, const std::string& p) { parse_split(v, p, c.split); });
    with(root, "", "spl", [&](const json& v, const std::string& p) { parse_spl(v, p, c.model.spl); });
    with(root, "", "tpl", [&](const json& t, const std::string& tp) {
        allow_keys(t, tp, {"enabled", "bptt_window", "init"});
        with(t, tp, "enabled", [&](const json& v, const std::string& p) { c.model.tpl_enabled = flag(v, p); });
        with(t, tp, "bptt_window", [&](const json& v, const std::string& p) { c.train.bptt_window = count(v, p); });
        with(t, tp, "init", [&](const json& v, const std::string& p) { c.tpl_init = parse_tpl_init(text(v, p), base_dir); });
    });
    with(root, "", "realization", [&](const json& r, const std::string& rp) {
        allow_keys(r, rp, {"tau", "hyper_tau"});
        with(r, rp, "tau", [&](const json& v, const std::string& p) { c.model.tau = number(v, p); });
        with(r, rp, "hyper_tau", [&](const json& v, const std::string& p) { c.model.hyper_tau = number(v, p); });
    });
    with(root, "", "train", [&](const json& t, const std::string& tp) {
        allow_keys(t, tp, {"alpha", "epochs", "max_lr", "patience", "paradigm", "log_timing"});
        with(t, tp, "alpha", [&](const json& v, const std::string& p) { c.train.alpha = number(v, p); });
        with(t, tp, "epochs", [&](const json& v, const std::string& p) { c.train.epochs = count(v, p); });
        with(t, tp, "max_lr", [&](const json& v, const std::string& p) { c.train.max_lr = number(v, p); });
        with(t, tp, "patience", [&](const json& v, const std::string& p) { c.train.patience = count(v, p); });
        with(t, tp, "paradigm", [&](const json& v, const std::string& p) { c.model.paradigm = parse_paradigm(text(v, p)); });
        with(t, tp, "log_timing", [&](const json& v, const std::string& p) { c.log_timing = flag(v, p); });
    });
    with(root, "", "backtest", [&](const json& b, const std::string& bp) {
        allow_keys(b, bp, {"top_k", "capital", "return_mode", "ic"});
        with(b, bp, "top_k", [&](const json& v, const std::string& p) { c.backtest.top_k = count(v, p); });
        with(b, bp, "capital", [&](const json& v, const std::string& p) { c.backtest.capital = number(v, p); });
        with(b, bp, "return_mode", [&](const json& v, const std::string& p) {
            c.backtest.return_mode = parse_return_mode(text(v, p));
        });
        with(b, bp, "ic", [&](const json& v, const std::string& p) { c.backtest.ic = parse_ic_kind(text(v, p)); });
    });

    c.train.lookback = c.model.spl.lookback;
    c.train.seed = c.seed;
    c.model.spl.validate();
    if (c.train.epochs == 0) throw ConfigError("config key 'train.epochs' must be at least 1");
    if (c.train.bptt_window == 0) throw ConfigError("config key 'tpl.bptt_window' must be at least 1");
    if (!(c.train.alpha > 0.0)) throw ConfigError("config key 'train.alpha' must be positive");
    if (!(c.train.max_lr > 0.0)) throw ConfigError("config key 'train.max_lr' must be positive");
    if (c.model.tau < 0.0 || c.model.hyper_tau < 0.0) throw ConfigError("config key 'realization.tau' must be >= 0");
    if (c.model.hidden == 0) throw ConfigError("config key 'backbone_hidden' must be at least 1");
    if (c.backtest.top_k == 0) throw ConfigError("config key 'backtest.top_k' must be at least 1");
    if (!(c.backtest.capital > 0.0)) throw ConfigError("config key 'backtest.capital' must be positive");
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open config file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), std::filesystem::absolute(file).parent_path());
}

std::string to_json(const RunConfig& c) {
    ordered root;
    root["seed"] = c.seed;
    root["lookback"] = c.model.spl.lookback;
    root["backbone"] = backbone_name(c.model.backbone);
    root["backbone_hidden"] = c.model.hidden;

    ordered data;
    if (!c.data.dir.empty()) data["dir"] = c.data.dir.string();
    if (!c.data.public_dir.empty()) {
        data["public_dir"] = c.data.public_dir.string();
        data["market"] = c.data.market;
        data["first_date"] = c.data.first_date;
        data["last_date"] = c.data.last_date;
    }
    if (c.data.synthetic) {
        const SynthOptions& o = *c.data.synthetic;
        data["synthetic"] = ordered{{"stocks", o.stocks},           {"days", o.days},
                                    {"clusters", o.clusters},       {"noise", o.noise},
                                    {"seed", o.seed},               {"persistence", o.persistence},
                                    {"factor_vol", o.factor_vol}};
    }
    root["data"] = data;

    ordered split;
    if (c.split.dates) {
        const auto& d = *c.split.dates;
        split["train"] = {d[0].first, d[0].last};
        split["valid"] = {d[1].first, d[1].last};
        split["test"] = {d[2].first, d[2].last};
    } else {
        split["ratios"] = c.split.ratios;
    }
    root["split"] = split;

    const SplConfig& s = c.model.spl;
    root["spl"] = ordered{{"kernel_sizes", s.kernel_sizes},
                          {"channels_z", s.channels_z},
                          {"heads", s.heads},
                          {"ffn_dim", s.ffn_dim},
                          {"dropout", s.dropout}};
    root["tpl"] = ordered{
        {"enabled", c.model.tpl_enabled}, {"bptt_window", c.train.bptt_window}, {"init", c.tpl_init.text()}};
    root["realization"] = ordered{{"tau", c.model.tau}, {"hyper_tau", c.model.hyper_tau}};
    root["train"] = ordered{{"alpha", c.train.alpha},
                            {"epochs", c.train.epochs},
                            {"max_lr", c.train.max_lr},
                            {"patience", c.train.patience},
                            {"paradigm", paradigm_name(c.model.paradigm)},
                            {"log_timing", c.log_timing}};
    root["backtest"] = ordered{{"top_k", c.backtest.top_k},
                               {"capital", c.backtest.capital},
                               {"return_mode", c.backtest.return_mode == ReturnMode::mean ? "mean" : "sum"},
                               {"ic", c.backtest.ic == IcKind::spearman ? "spearman" : "pearson"}};
    return root.dump(2) + "\n";
}

}  // namespace gapnet
