#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "gapnet/backbone.hpp"
#include "gapnet/realize.hpp"
#include "gapnet/spl.hpp"
#include "gapnet/tpl.hpp"

namespace gapnet {

enum class Paradigm { end2end, twostep };
Paradigm parse_paradigm(const std::string& name);
std::string paradigm_name(Paradigm p);

struct ModelConfig {
    std::size_t n_stocks = 0;
    SplConfig spl;
    bool tpl_enabled = true;
    double tau = 0.5;
    double hyper_tau = 0.5;
    BackboneKind backbone = BackboneKind::gcn;
    std::size_t hidden = 16;
    Paradigm paradigm = Paradigm::end2end;

    GraphMode mode() const { return graph_mode(backbone); }
    double threshold() const { return mode() == GraphMode::hyper ? hyper_tau : tau; }
};

struct ModelParams {
    SplParams spl;
    TplParams tpl;
    BackboneParams backbone;

    static ModelParams init(const ModelConfig& config, std::uint64_t seed);

    template <class Self, class Fn>
    static void visit(Self& p, Fn&& fn) {
        SplParams::visit(p.spl, fn);
        TplParams::visit(p.tpl, fn);
        BackboneParams::visit(p.backbone, fn);
    }
};

/// Output of one trading day. `adj_attr` is empty for two-step runs.
struct DayOutput {
    Tensor scores;    // N
    Tensor adj_attr;  // Z x N x N
    std::optional<RealizedGraph> graph;
};

/// One day's forward pass. End-to-end runs SPL, then TPL (advancing `state`)
/// or tanh when TPL is disabled, then realization and the backbone. Two-step
/// runs the backbone on `prior` and leaves `state` untouched.
DayOutput forward_day(const ModelConfig& config, const ModelParams& params, const Tensor& window, TplState& state,
                      const RealizedGraph* prior, std::mt19937_64* dropout_rng = nullptr);

/// The parameter names that the optimizer updates under the config's paradigm.
bool is_trainable(const ModelConfig& config, const std::string& name);

}  // namespace gapnet
