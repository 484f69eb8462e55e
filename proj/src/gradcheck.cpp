#include "gapnet/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "gapnet/model.hpp"
#include "gapnet/ops.hpp"
#include "gapnet/params.hpp"
#include "gapnet/train.hpp"

namespace gapnet {
namespace {

using LossFn = std::function<Tensor(const ParameterMap&)>;

Tensor random_uniform(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(shape, 0.0);
    for (double& v : t.mutable_data()) v = dist(rng);
    return t;
}

GradcheckEntry check(const std::string& name, const ParameterMap& point, const LossFn& loss, double step,
                     double tolerance) {
    Tape tape;
    ParameterMap tracked;
    for (const auto& [key, t] : point) tracked.emplace(key, tape.parameter(key, t));
    const ParameterMap grads = backward(tape, loss(tracked));

    GradcheckEntry e;
    e.name = name;
    e.tolerance = tolerance;
    ParameterMap probe = point;
    for (auto& [key, t] : probe) {
        const Tensor& g = grads.at(key);
        auto v = t.mutable_data();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double saved = v[i];
            auto error_at = [&](double h) {
                v[i] = saved + h;
                const double up = loss(probe).item();
                v[i] = saved - h;
                const double down = loss(probe).item();
                v[i] = saved;
                const double numeric = (up - down) / (2.0 * h);
                return std::fabs(g[i] - numeric) / std::max({std::fabs(g[i]), std::fabs(numeric), 1e-3});
            };
            double err = error_at(step);
            if (err >= tolerance) {
                // A ReLU-family kink inside [x - h, x + h] spoils the central difference.
                // It moves out of reach as h shrinks; a wrong derivative does not.
                ++e.reprobed;
                err = error_at(step * 1e-2);
            }
            ++e.checked;
            if (err > e.max_rel_error) {
                e.max_rel_error = err;
                e.worst = key + "[" + std::to_string(i) + "]";
            }
        }
    }
    return e;
}

// Reduces a tensor-valued op to a scalar through a fixed random projection.
LossFn projected(std::function<Tensor(const ParameterMap&)> op, const ParameterMap& point, std::mt19937_64& rng) {
    const Tensor weights = random_uniform(op(point).shape(), rng);
    return [op = std::move(op), weights](const ParameterMap& m) { return sum(mul(op(m), weights)); };
}

template <class P>
P from_map(const P& shape_like, const ParameterMap& m) {
    P p = shape_like;
    P::visit(p, [&](const std::string& name, Tensor& t) { t = m.at(name); });
    return p;
}

ParameterMap inputs(std::initializer_list<std::pair<const char*, Shape>> shapes, std::mt19937_64& rng) {
    ParameterMap m;
    for (const auto& [name, shape] : shapes) m.emplace(name, random_uniform(shape, rng));
    return m;
}

void op_checks(GradcheckReport& report, const GradcheckOptions& o, std::mt19937_64& rng) {
    using M = const ParameterMap&;
    struct Case {
        const char* name;
        std::function<Tensor(M)> op;
        ParameterMap point;
    };
    std::vector<Case> cases;
    cases.push_back({"op.add", [](M m) { return add(m.at("a"), m.at("b")); }, inputs({{"a", {2, 3, 4}}, {"b", {4}}}, rng)});
    cases.push_back({"op.sub", [](M m) { return sub(m.at("a"), m.at("b")); }, inputs({{"a", {3, 1}}, {"b", {1, 4}}}, rng)});
    cases.push_back({"op.mul", [](M m) { return mul(m.at("a"), m.at("b")); }, inputs({{"a", {2, 3, 4}}, {"b", {3, 1}}}, rng)});
    cases.push_back({"op.scale", [](M m) { return add_scalar(scale(neg(m.at("a")), 1.7), 0.3); }, inputs({{"a", {5}}}, rng)});
    cases.push_back({"op.pow", [](M m) { return pow_scalar(add_scalar(abs(m.at("a")), 0.5), -0.5); },
                     inputs({{"a", {6}}}, rng)});
    cases.push_back({"op.matmul", [](M m) { return matmul(m.at("a"), m.at("b")); },
                     inputs({{"a", {2, 3, 4}}, {"b", {4, 2}}}, rng)});
    cases.push_back({"op.conv1d", [](M m) { return conv1d(m.at("x"), m.at("w"), m.at("b")); },
                     inputs({{"x", {2, 3, 8}}, {"w", {2, 3, 3}}, {"b", {2}}}, rng)});
    cases.push_back({"op.concat_slice", [](M m) {
                         return slice(concat(std::vector<Tensor>{m.at("a"), m.at("b")}, 1), 1, 1, 4);
                     },
                     inputs({{"a", {2, 3, 2}}, {"b", {2, 2, 2}}}, rng)});
    cases.push_back({"op.transpose_reshape", [](M m) { return reshape(transpose(m.at("a"), {2, 0, 1}), {4, 6}); },
                     inputs({{"a", {2, 3, 4}}}, rng)});
    cases.push_back({"op.sigmoid", [](M m) { return sigmoid(m.at("a")); }, inputs({{"a", {7}}}, rng)});
    cases.push_back({"op.tanh", [](M m) { return tanh(m.at("a")); }, inputs({{"a", {7}}}, rng)});
    cases.push_back({"op.relu", [](M m) { return relu(m.at("a")); }, inputs({{"a", {7}}}, rng)});
    cases.push_back({"op.leaky_relu", [](M m) { return leaky_relu(m.at("a")); }, inputs({{"a", {7}}}, rng)});
    cases.push_back({"op.softmax", [](M m) { return softmax(m.at("a"), 2); }, inputs({{"a", {2, 3, 5}}}, rng)});
    cases.push_back({"op.layer_norm", [](M m) { return layer_norm(m.at("a"), 1); }, inputs({{"a", {2, 6, 3}}}, rng)});
    cases.push_back({"op.reductions", [](M m) { return add(sum_axis(m.at("a"), 1), mean_axis(m.at("a"), 1)); },
                     inputs({{"a", {3, 4}}}, rng)});
    cases.push_back({"op.mse", [](M m) { return mse(m.at("a"), m.at("b")); }, inputs({{"a", {6}}, {"b", {6}}}, rng)});
    for (auto& c : cases) {
        report.entries.push_back(check(c.name, c.point, projected(c.op, c.point, rng), o.step, o.op_tolerance));
    }
}

SplConfig desk_spl() {
    SplConfig s;
    s.kernel_sizes = {3, 5};
    s.channels_z = 2;
    s.heads = 1;
    s.lookback = 8;
    s.features = 5;
    s.dropout = 0.0;
    return s;
}

RealizedGraph random_graph(std::size_t n, std::size_t z, GraphMode mode, std::mt19937_64& rng) {
    Tensor attr = random_uniform({z, n, n}, rng);
    return realize(attr, 0.3, mode);
}

void module_checks(GradcheckReport& report, const GradcheckOptions& o, std::mt19937_64& rng) {
    const std::size_t n = 6;
    const SplConfig sc = desk_spl();
    const Tensor window = random_uniform({n, sc.lookback, sc.features}, rng);

    const SplParams spl = SplParams::init(sc, rng);
    const ParameterMap spl_point = to_map(spl);
    report.entries.push_back(check("module.spl", spl_point,
                                   projected([&](const ParameterMap& m) { return spl_forward(window, from_map(spl, m), sc); },
                                             spl_point, rng),
                                   o.step, o.model_tolerance));

    const TplParams tpl = TplParams::init(n, rng);
    ParameterMap tpl_point = to_map(tpl);
    tpl_point.emplace("adj_temp", random_uniform({2, n, n}, rng));
    tpl_point.emplace("memory", random_uniform({2, n, n}, rng));
    tpl_point.emplace("cell", random_uniform({2, n, n}, rng));
    report.entries.push_back(check("module.tpl", tpl_point,
                                   projected(
                                       [&](const ParameterMap& m) {
                                           auto [out, next] = tpl_step(m.at("adj_temp"), {m.at("memory"), m.at("cell")},
                                                                       from_map(tpl, m));
                                           return concat(std::vector<Tensor>{out, next.cell}, 0);
                                       },
                                       tpl_point, rng),
                                   o.step, o.model_tolerance));

    const BackboneParams bb = BackboneParams::init(sc.lookback * sc.features, 8, rng);
    for (GraphMode mode : {GraphMode::pairwise, GraphMode::hyper}) {
        const RealizedGraph g = random_graph(n, 2, mode, rng);
        ParameterMap point = to_map(bb);
        point.emplace("attr", g.masked);
        const LossFn loss = projected(
            [&, g](const ParameterMap& m) {
                RealizedGraph h = g;
                h.masked = mask_attributes(m.at("attr"), g.binary);
                return mode == GraphMode::pairwise ? gcn_forward(h, window, from_map(bb, m))
                                                   : hgcn_forward(h, window, from_map(bb, m));
            },
            point, rng);
        report.entries.push_back(check(mode == GraphMode::pairwise ? "module.gcn" : "module.hgcn", point, loss, o.step,
                                       o.model_tolerance));
    }

    ParameterMap loss_point{{"pred", random_uniform({50}, rng)}};
    const Tensor target = random_uniform({50}, rng);
    report.entries.push_back(check("module.ranking_loss", loss_point,
                                   [&](const ParameterMap& m) { return ranking_loss(m.at("pred"), target, 1.0); }, o.step,
                                   o.model_tolerance));
}

void end_to_end_check(GradcheckReport& report, const GradcheckOptions& o) {
    const std::size_t n = 6, days = 3;
    ModelConfig mc;
    mc.n_stocks = n;
    mc.spl = desk_spl();
    mc.hidden = 8;
    mc.backbone = BackboneKind::gcn;
    const PricePanel panel =
        make_panel(synth_panel({.stocks = n, .days = 80, .clusters = 2, .noise = 0.01, .seed = o.seed}).raw,
                   chronological_split(80, {0.6, 0.2, 0.2}));
    const auto targets = target_days(panel, panel.split.train, mc.spl.lookback);
    std::vector<LookbackWindow> windows;
    for (std::size_t d = 0; d < days; ++d) windows.push_back(lookback_window(panel, targets[d], mc.spl.lookback));
    const ModelParams params = ModelParams::init(mc, o.seed);
    const TplState init = init_state_random(n, mc.spl.channels_z, o.seed);

    // The realized edge set is piecewise constant in the parameters. Put tau in the
    // widest gap between the attribute magnitudes so no probe crosses it.
    std::vector<double> magnitudes;
    TplState state = init;
    for (const auto& w : windows) {
        const Tensor attr = forward_day(mc, params, w.x, state, nullptr).adj_attr;
        const Tensor m = mean_axis(attr, 0);
        for (double v : m.data()) magnitudes.push_back(std::fabs(v));
    }
    std::sort(magnitudes.begin(), magnitudes.end());
    const std::size_t lo = magnitudes.size() / 4, hi = 3 * magnitudes.size() / 4;
    std::size_t best = lo;
    for (std::size_t i = lo; i < hi; ++i) {
        if (magnitudes[i + 1] - magnitudes[i] > magnitudes[best + 1] - magnitudes[best]) best = i;
    }
    mc.tau = 0.5 * (magnitudes[best] + magnitudes[best + 1]);
    report.tau = mc.tau;
    report.tau_margin = 0.5 * (magnitudes[best + 1] - magnitudes[best]);

    const LossFn loss = [&](const ParameterMap& m) {
        const ModelParams p = from_map(params, m);
        TplState s = init;
        Tensor total = Tensor::scalar(0.0);
        for (const auto& w : windows) total = add(total, ranking_loss(forward_day(mc, p, w.x, s, nullptr).scores, w.target, 1.0));
        return total;
    };
    report.entries.push_back(check("end_to_end", to_map(params), loss, o.step, o.model_tolerance));
}

}  // namespace

bool GradcheckReport::passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.passed(); });
}

std::string GradcheckReport::text() const {
    std::string out;
    char line[512];
    for (const auto& e : entries) {
        std::snprintf(line, sizeof line, "%-22s %-4s max_rel_error=%.3e tol=%.0e checked=%zu reprobed=%zu worst=%s\n",
                      e.name.c_str(), e.passed() ? "ok" : "FAIL", e.max_rel_error, e.tolerance, e.checked, e.reprobed,
                      e.worst.c_str());
        out += line;
    }
    std::snprintf(line, sizeof line, "end_to_end tau=%.6f margin=%.3e; %.2f s\n", tau, tau_margin, seconds);
    out += line;
    return out;
}

GradcheckReport run_gradcheck(const GradcheckOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    GradcheckReport report;
    std::mt19937_64 rng = module_rng(o.seed, "gradcheck");
    op_checks(report, o, rng);
    module_checks(report, o, rng);
    end_to_end_check(report, o);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace gapnet
