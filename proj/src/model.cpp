#include "gapnet/model.hpp"

#include "gapnet/errors.hpp"
#include "gapnet/ops.hpp"
#include "gapnet/params.hpp"

namespace gapnet {

Paradigm parse_paradigm(const std::string& name) {
    if (name == "end2end") return Paradigm::end2end;
    if (name == "twostep") return Paradigm::twostep;
    throw ConfigError("train.paradigm must be end2end or twostep; got '" + name + "'");
}

std::string paradigm_name(Paradigm p) { return p == Paradigm::end2end ? "end2end" : "twostep"; }

ModelParams ModelParams::init(const ModelConfig& c, std::uint64_t seed) {
    if (c.n_stocks == 0) throw ConfigError("model needs at least one stock");
    auto spl_rng = module_rng(seed, "spl");
    auto tpl_rng = module_rng(seed, "tpl");
    auto backbone_rng = module_rng(seed, "backbone");
    ModelParams p;
    p.spl = SplParams::init(c.spl, spl_rng);
    p.tpl = TplParams::init(c.n_stocks, tpl_rng);
    p.backbone = BackboneParams::init(c.spl.lookback * c.spl.features, c.hidden, backbone_rng);
    return p;
}

DayOutput forward_day(const ModelConfig& c, const ModelParams& p, const Tensor& window, TplState& state,
                      const RealizedGraph* prior, std::mt19937_64* dropout_rng) {
    DayOutput out;
    if (c.paradigm == Paradigm::twostep) {
        if (c.backbone != BackboneKind::mlp && !prior) throw ConfigError("two-step training needs a prior graph");
        out.scores = backbone_forward(c.backbone, prior, window, p.backbone);
        return out;
    }
    const Tensor adj_temp = spl_forward(window, p.spl, c.spl, dropout_rng);
    if (c.tpl_enabled) {
        auto [attr, next] = tpl_step(adj_temp, state, p.tpl);
        out.adj_attr = attr;
        state = next;
    } else {
        // squash the raw Gram values into (-1, 1) so the threshold keeps its scale
        out.adj_attr = tanh(adj_temp);
    }
    if (c.backbone != BackboneKind::mlp) out.graph = realize(out.adj_attr, c.threshold(), c.mode());
    out.scores = backbone_forward(c.backbone, out.graph ? &*out.graph : nullptr, window, p.backbone);
    return out;
}

bool is_trainable(const ModelConfig& c, const std::string& name) {
    if (c.paradigm == Paradigm::twostep) return name.rfind("backbone.", 0) == 0;
    if (!c.tpl_enabled && name.rfind("tpl.", 0) == 0) return false;
    return true;
}

}  // namespace gapnet
