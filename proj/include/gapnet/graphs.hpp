#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gapnet/data.hpp"
#include "gapnet/tensor.hpp"

namespace gapnet {

/// Symmetric 0/1 adjacency with zero diagonal.
struct PairGraph {
    std::size_t n = 0;
    std::vector<unsigned char> adj;  // row-major n x n

    explicit PairGraph(std::size_t nodes = 0) : n(nodes), adj(nodes * nodes, 0) {}
    bool edge(std::size_t i, std::size_t j) const { return adj[i * n + j] != 0; }
    void connect(std::size_t i, std::size_t j);
    std::size_t edge_count() const;  // undirected edges
    Tensor dense() const;            // n x n floats
};

/// Hyperedges stored as sorted member lists; every stored edge is non-empty.
struct HyperGraph {
    std::size_t n = 0;
    std::vector<std::vector<std::size_t>> edges;

    std::size_t edge_count() const { return edges.size(); }
    Tensor incidence() const;  // E x n, rows are hyperedges
};

/// One hyperedge per sector with at least two members, ordered by first member.
HyperGraph industry_graph(const std::vector<std::string>& sector_of);

/// Reads `ticker,sector` rows and returns the sector of every ticker in order.
std::vector<std::string> read_membership(const std::filesystem::path& file, const std::vector<std::string>& tickers);
void write_membership(const std::filesystem::path& file, const std::vector<std::string>& tickers,
                      const std::vector<std::string>& sector_of);

/// Squared-difference DTW with steps (i-1,j), (i,j-1), (i-1,j-1) and no band.
double dtw_distance(std::span<const double> x, std::span<const double> y);

/// Each stock's close series over `window`, divided by its first close in the window.
Tensor normalized_closes(const Tensor& closes, const Segment& window);

/// All-pairs DTW matrix of the rows of `series` (N x W).
std::vector<double> dtw_matrix(const Tensor& series);

/// For each stock i: {i} plus its k nearest stocks by DTW (ties by index);
/// identical member sets are merged, keeping the first.
HyperGraph dtw_k_hypergraph(const Tensor& series, std::size_t k);

/// Edge iff the Pearson correlation of daily returns inside `window` exceeds rho.
PairGraph correlation_graph(const Tensor& closes, const Segment& window, double rho);

/// Clique expansion.
PairGraph hyper_to_pairwise(const HyperGraph& h);
HyperGraph pairwise_to_hyper(const PairGraph& g);

/// Exchange format: first line `N E`, then one line per hyperedge with member indices.
void write_graph(const std::filesystem::path& file, const HyperGraph& h);
HyperGraph read_graph(const std::filesystem::path& file);

}  // namespace gapnet
