#include "gapnet/backbone.hpp"

#include "gapnet/errors.hpp"
#include "gapnet/ops.hpp"
#include "gapnet/params.hpp"

namespace gapnet {
namespace {

// 1 + mean over Z of the masked attributes: the learned edge weight.
Tensor edge_weights(const RealizedGraph& g) { return add_scalar(mean_axis(g.masked, 0), 1.0); }

Tensor encode(const Tensor& x, const BackboneParams& p) {
    const std::size_t n = x.dim(0);
    return leaky_relu(add(matmul(reshape(x, {n, x.size() / n}), p.w_in), p.b_in));
}

Tensor head(const Tensor& h, const BackboneParams& p) {
    return reshape(add(matmul(h, p.w_head), p.b_head), {h.dim(0)});
}

}  // namespace

BackboneKind parse_backbone(const std::string& name) {
    if (name == "gcn") return BackboneKind::gcn;
    if (name == "hgcn") return BackboneKind::hgcn;
    if (name == "mlp") return BackboneKind::mlp;
    throw ConfigError("backbone must be one of gcn, hgcn, mlp; got '" + name + "'");
}

std::string backbone_name(BackboneKind kind) {
    switch (kind) {
        case BackboneKind::gcn: return "gcn";
        case BackboneKind::hgcn: return "hgcn";
        case BackboneKind::mlp: return "mlp";
    }
    return "mlp";
}

GraphMode graph_mode(BackboneKind kind) { return kind == BackboneKind::hgcn ? GraphMode::hyper : GraphMode::pairwise; }

BackboneParams BackboneParams::init(std::size_t in_dim, std::size_t hidden, std::mt19937_64& rng) {
    BackboneParams p;
    p.w_in = uniform_fan_in({in_dim, hidden}, in_dim, rng);
    p.b_in = uniform_fan_in({hidden}, in_dim, rng);
    p.w1 = uniform_fan_in({hidden, hidden}, hidden, rng);
    p.w2 = uniform_fan_in({hidden, hidden}, hidden, rng);
    p.w_head = uniform_fan_in({hidden, 1}, hidden, rng);
    p.b_head = uniform_fan_in({1}, hidden, rng);
    return p;
}

Tensor gcn_operator(const RealizedGraph& g) {
    if (g.mode != GraphMode::pairwise) throw std::invalid_argument("gcn_operator: needs a pairwise graph");
    const std::size_t n = g.nodes();
    Tensor off_diag = g.binary.detach();
    for (std::size_t i = 0; i < n; ++i) off_diag.mutable_data()[i * n + i] = 0.0;
    const Tensor a_hat = add(mul(off_diag, edge_weights(g)), Tensor::eye(n));
    const Tensor d_inv_sqrt = pow_scalar(sum_axis(a_hat, 1), -0.5);
    return mul(mul(a_hat, reshape(d_inv_sqrt, {n, 1})), reshape(d_inv_sqrt, {1, n}));
}

Tensor hgcn_operator(const RealizedGraph& g) {
    if (g.mode != GraphMode::hyper) throw std::invalid_argument("hgcn_operator: needs a hypergraph");
    const std::size_t n = g.nodes(), e_rows = g.binary.dim(0);
    const Tensor weighted = mul(g.binary.detach(), edge_weights(g));  // hyperedges x nodes

    // Masks are constants: dead hyperedges and uncovered nodes get unit
    // placeholder degrees and are then zeroed out of the operator.
    Tensor live({e_rows}, 0.0), covered({n}, 0.0);
    const auto b = g.binary.data();
    for (std::size_t e = 0; e < e_rows; ++e)
        for (std::size_t v = 0; v < n; ++v)
            if (b[e * n + v] != 0.0) {
                live.mutable_data()[e] = 1.0;
                covered.mutable_data()[v] = 1.0;
            }
    const Tensor one_e = Tensor({e_rows}, 1.0), one_v = Tensor({n}, 1.0);
    const Tensor de_inv = mul(pow_scalar(add(sum_axis(weighted, 1), sub(one_e, live)), -1.0), live);
    const Tensor dv_inv_sqrt = mul(pow_scalar(add(sum_axis(weighted, 0), sub(one_v, covered)), -0.5), covered);

    const Tensor incidence = transpose_last(weighted);  // nodes x hyperedges
    const Tensor left = mul(mul(incidence, reshape(dv_inv_sqrt, {n, 1})), reshape(de_inv, {1, e_rows}));
    const Tensor core = matmul(left, weighted);
    const Tensor op = mul(core, reshape(dv_inv_sqrt, {1, n}));
    Tensor pass_through({n, n}, 0.0);
    for (std::size_t v = 0; v < n; ++v) pass_through.mutable_data()[v * n + v] = 1.0 - covered[v];
    return add(op, pass_through);
}

Tensor propagate(const Tensor& op, const Tensor& x, const BackboneParams& p) {
    const Tensor h0 = encode(x, p);
    const Tensor h1 = leaky_relu(matmul(matmul(op, h0), p.w1));
    const Tensor h2 = leaky_relu(matmul(matmul(op, h1), p.w2));
    return head(h2, p);
}

Tensor mlp_forward(const Tensor& x, const BackboneParams& p) {
    const Tensor h0 = encode(x, p);
    const Tensor h1 = leaky_relu(matmul(h0, p.w1));
    const Tensor h2 = leaky_relu(matmul(h1, p.w2));
    return head(h2, p);
}

Tensor gcn_forward(const RealizedGraph& graph, const Tensor& x, const BackboneParams& p) {
    return propagate(gcn_operator(graph), x, p);
}

Tensor hgcn_forward(const RealizedGraph& graph, const Tensor& x, const BackboneParams& p) {
    if (graph.live_edges() == 0) return mlp_forward(x, p);
    return propagate(hgcn_operator(graph), x, p);
}

Tensor backbone_forward(BackboneKind kind, const RealizedGraph* graph, const Tensor& x, const BackboneParams& p) {
    if (kind == BackboneKind::mlp) return mlp_forward(x, p);
    if (!graph) throw std::invalid_argument("backbone_forward: graph backbone without a graph");
    return kind == BackboneKind::gcn ? gcn_forward(*graph, x, p) : hgcn_forward(*graph, x, p);
}

}  // namespace gapnet
