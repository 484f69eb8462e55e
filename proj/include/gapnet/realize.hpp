#pragma once

#include <vector>

#include "gapnet/graphs.hpp"
#include "gapnet/tensor.hpp"

namespace gapnet {

enum class GraphMode { pairwise, hyper };

/// `binary` is N x N: an adjacency matrix (pairwise) or hyperedge-by-node
/// membership (hyper, rows are hyperedges). It never carries gradients.
/// `masked` is the Z x N x N attribute tensor zeroed outside `binary`.
struct RealizedGraph {
    GraphMode mode = GraphMode::pairwise;
    Tensor binary;
    Tensor masked;

    std::size_t nodes() const { return binary.dim(1); }
    /// Non-zero entries (pairwise) or non-empty rows (hyper).
    std::size_t live_edges() const;
};

/// 1 where |mean over Z of adj_attr[:, i, j]| > tau.
Tensor threshold_edges(const Tensor& adj_attr, double tau);
Tensor mask_attributes(const Tensor& adj_attr, const Tensor& binary);

RealizedGraph realize_pairwise(const Tensor& adj_attr, double tau);
RealizedGraph realize_hypergraph(const Tensor& adj_attr, double tau);
RealizedGraph realize(const Tensor& adj_attr, double tau, GraphMode mode);

/// Indices of rows with at least one member.
std::vector<std::size_t> live_hyperedges(const Tensor& membership);

/// A prior graph as a realized graph with zero attributes.
RealizedGraph prior_graph(const HyperGraph& prior, std::size_t z, GraphMode mode);

/// Realized structure in exchange form: pairwise entries become size-2 edges
/// (or a size-1 edge on the diagonal), live hyperedge rows become member lists.
HyperGraph to_exchange(const RealizedGraph& g);

}  // namespace gapnet
