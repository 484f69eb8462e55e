#include "gapnet/realize.hpp"

#include <cmath>

#include "gapnet/errors.hpp"
#include "gapnet/ops.hpp"

namespace gapnet {

std::size_t RealizedGraph::live_edges() const {
    if (mode == GraphMode::hyper) return live_hyperedges(binary).size();
    std::size_t count = 0;
    for (double v : binary.data()) count += v != 0.0 ? 1 : 0;
    return count;
}

Tensor threshold_edges(const Tensor& adj_attr, double tau) {
    if (adj_attr.rank() != 3 || adj_attr.dim(1) != adj_attr.dim(2)) {
        throw ShapeError("threshold_edges: expected Z x N x N, got " + shape_str(adj_attr.shape()));
    }
    if (tau < 0.0) throw ConfigError("realization threshold must be non-negative");
    const std::size_t z = adj_attr.dim(0), nn = adj_attr.dim(1) * adj_attr.dim(2);
    Tensor binary({adj_attr.dim(1), adj_attr.dim(2)}, 0.0);
    auto b = binary.mutable_data();
    const auto a = adj_attr.data();
    for (std::size_t k = 0; k < nn; ++k) {
        double s = 0.0;
        for (std::size_t c = 0; c < z; ++c) s += a[c * nn + k];
        b[k] = std::abs(s / static_cast<double>(z)) > tau ? 1.0 : 0.0;
    }
    return binary;
}

Tensor mask_attributes(const Tensor& adj_attr, const Tensor& binary) { return mul(adj_attr, binary.detach()); }

RealizedGraph realize_pairwise(const Tensor& adj_attr, double tau) {
    const Tensor binary = threshold_edges(adj_attr, tau);
    return {GraphMode::pairwise, binary, mask_attributes(adj_attr, binary)};
}

RealizedGraph realize_hypergraph(const Tensor& adj_attr, double tau) {
    const Tensor binary = threshold_edges(adj_attr, tau);
    return {GraphMode::hyper, binary, mask_attributes(adj_attr, binary)};
}

RealizedGraph realize(const Tensor& adj_attr, double tau, GraphMode mode) {
    return mode == GraphMode::hyper ? realize_hypergraph(adj_attr, tau) : realize_pairwise(adj_attr, tau);
}

std::vector<std::size_t> live_hyperedges(const Tensor& membership) {
    const std::size_t rows = membership.dim(0), cols = membership.dim(1);
    std::vector<std::size_t> live;
    for (std::size_t e = 0; e < rows; ++e)
        for (std::size_t v = 0; v < cols; ++v)
            if (membership[e * cols + v] != 0.0) {
                live.push_back(e);
                break;
            }
    return live;
}

RealizedGraph prior_graph(const HyperGraph& prior, std::size_t z, GraphMode mode) {
    const std::size_t n = prior.n;
    RealizedGraph g;
    g.mode = mode;
    if (mode == GraphMode::pairwise) {
        g.binary = hyper_to_pairwise(prior).dense();
    } else {
        if (prior.edge_count() > n) {
            throw DataError("hypergraph prior has " + std::to_string(prior.edge_count()) + " hyperedges for " +
                            std::to_string(n) + " nodes");
        }
        g.binary = Tensor({n, n}, 0.0);
        auto b = g.binary.mutable_data();
        for (std::size_t e = 0; e < prior.edges.size(); ++e)
            for (std::size_t v : prior.edges[e]) b[e * n + v] = 1.0;
    }
    g.masked = Tensor({z, n, n}, 0.0);
    return g;
}

HyperGraph to_exchange(const RealizedGraph& g) {
    const std::size_t n = g.nodes();
    HyperGraph h;
    h.n = n;
    const auto b = g.binary.data();
    if (g.mode == GraphMode::pairwise) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (b[i * n + j] == 0.0) continue;
                h.edges.push_back(i == j ? std::vector<std::size_t>{i} : std::vector<std::size_t>{i, j});
            }
    } else {
        for (std::size_t e : live_hyperedges(g.binary)) {
            std::vector<std::size_t> members;
            for (std::size_t v = 0; v < n; ++v)
                if (b[e * n + v] != 0.0) members.push_back(v);
            h.edges.push_back(std::move(members));
        }
    }
    return h;
}

}  // namespace gapnet
