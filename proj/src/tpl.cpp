#include "gapnet/tpl.hpp"

#include <array>

#include "gapnet/errors.hpp"
#include "gapnet/ops.hpp"
#include "gapnet/params.hpp"

namespace gapnet {
namespace {

TplState from_adjacency(const PairGraph& g, std::size_t z) {
    Tensor memory({z, g.n, g.n}, 0.0);
    auto d = memory.mutable_data();
    for (std::size_t s = 0; s < z; ++s)
        for (std::size_t k = 0; k < g.adj.size(); ++k) d[s * g.adj.size() + k] = g.adj[k];
    return {memory, Tensor({z, g.n, g.n}, 0.0)};
}

Tensor gate(const Tensor& a, const Tensor& w, const Tensor& b) { return add(matmul(a, transpose_last(w)), b); }

}  // namespace

TplParams TplParams::init(std::size_t n, std::mt19937_64& rng) {
    TplParams p;
    for (Tensor* w : {&p.wf, &p.wi, &p.wc, &p.wo}) *w = uniform_fan_in({n, 2 * n}, 2 * n, rng);
    for (Tensor* b : {&p.bf, &p.bi, &p.bc, &p.bo}) *b = uniform_fan_in({n}, 2 * n, rng);
    return p;
}

TplParams TplParams::zeros(std::size_t n) {
    TplParams p;
    for (Tensor* w : {&p.wf, &p.wi, &p.wc, &p.wo}) *w = Tensor({n, 2 * n}, 0.0);
    for (Tensor* b : {&p.bf, &p.bi, &p.bc, &p.bo}) *b = Tensor({n}, 0.0);
    return p;
}

TplState init_state(const PairGraph& prior, std::size_t z) { return from_adjacency(prior, z); }

TplState init_state(const HyperGraph& prior, std::size_t z) { return from_adjacency(hyper_to_pairwise(prior), z); }

TplState init_state_random(std::size_t n, std::size_t z, std::uint64_t seed) {
    std::mt19937_64 rng = module_rng(seed, "tpl.init");
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    Tensor memory({z, n, n}, 0.0);
    for (double& v : memory.mutable_data()) v = dist(rng);
    return {memory, Tensor({z, n, n}, 0.0)};
}

std::pair<Tensor, TplState> tpl_step(const Tensor& adj_temp, const TplState& state, const TplParams& p) {
    if (adj_temp.rank() != 3 || adj_temp.shape() != state.memory.shape() || adj_temp.shape() != state.cell.shape()) {
        throw ShapeError("tpl_step: adj_temp " + shape_str(adj_temp.shape()) + ", memory " +
                         shape_str(state.memory.shape()) + " and cell " + shape_str(state.cell.shape()) +
                         " must all be Z x N x N");
    }
    const std::size_t n = adj_temp.dim(1);
    if (p.wf.shape() != Shape{n, 2 * n}) {
        throw ShapeError("tpl_step: gate weights " + shape_str(p.wf.shape()) + " do not match N = " + std::to_string(n));
    }
    const std::array<Tensor, 2> parts = {adj_temp, state.memory};
    const Tensor a = concat(parts, 2);  // Z x N x 2N
    const Tensor f = sigmoid(gate(a, p.wf, p.bf));
    const Tensor i = sigmoid(gate(a, p.wi, p.bi));
    const Tensor c_hat = tanh(gate(a, p.wc, p.bc));
    const Tensor o = sigmoid(gate(a, p.wo, p.bo));
    const Tensor cell = add(mul(f, state.cell), mul(i, c_hat));
    const Tensor out = mul(o, tanh(cell));
    return {out, TplState{out, cell}};
}

std::vector<Tensor> run_sequence(const std::vector<Tensor>& adj_temps, const TplState& init, const TplParams& p,
                                 std::size_t bptt_window, TplState* final_state) {
    if (adj_temps.empty()) throw std::invalid_argument("run_sequence: no days");
    if (bptt_window == 0) throw ConfigError("tpl.bptt_window must be at least 1");
    std::vector<Tensor> outs;
    TplState state = init;
    for (std::size_t t = 0; t < adj_temps.size(); ++t) {
        if (t > 0 && t % bptt_window == 0) state = state.detached();
        auto [out, next] = tpl_step(adj_temps[t], state, p);
        outs.push_back(out);
        state = next;
    }
    if (final_state) *final_state = state;
    return outs;
}

}  // namespace gapnet
