#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "gapnet/errors.hpp"
#include "gapnet/graphs.hpp"
#include "graph_oracles.hpp"

namespace gapnet {
namespace {

using testing::dtw_table_oracle;

std::vector<std::size_t> members(std::initializer_list<std::size_t> v) { return v; }

TEST(Industry, SectorsBecomeHyperedges) {
    const HyperGraph two = industry_graph({"a", "a", "b", "b"});
    EXPECT_EQ(two.edge_count(), 2u);
    EXPECT_EQ(two.edges[0], members({0, 1}));
    EXPECT_EQ(two.edges[1], members({2, 3}));

    const HyperGraph one = industry_graph({"x", "x", "x", "x", "x"});
    ASSERT_EQ(one.edge_count(), 1u);
    EXPECT_EQ(one.edges[0].size(), 5u);

    EXPECT_EQ(industry_graph({"a", "b", "c"}).edge_count(), 0u);
}

TEST(Industry, MembershipFile) {
    const auto file = std::filesystem::temp_directory_path() / "gapnet_membership.csv";
    write_membership(file, {"A", "B", "C"}, {"tech", "energy", "tech"});
    EXPECT_EQ(read_membership(file, {"C", "A"}), (std::vector<std::string>{"tech", "tech"}));
    EXPECT_THROW(read_membership(file, {"A", "Z"}), DataError);
    std::filesystem::remove(file);
}

TEST(Dtw, HandFilledTable) {
    // table rows x=[0,1,0], columns y=[0,0,1,0]:
    //   0 0 1 1
    //   1 1 0 1
    //   1 1 1 0
    const std::vector<double> x = {0, 1, 0}, y = {0, 0, 1, 0};
    EXPECT_EQ(dtw_distance(x, y), 0.0);
    const std::vector<double> a = {0, 2}, b = {1};
    EXPECT_EQ(dtw_distance(a, b), 2.0);
    const std::vector<double> p = {1, 3, 4}, q = {2, 2};
    // table: 1 2 / 2 2 / 6 6
    EXPECT_EQ(dtw_distance(p, q), 6.0);
}

TEST(Dtw, BasicProperties) {
    const std::vector<double> x = {0.3, -1.2, 4.0};
    EXPECT_EQ(dtw_distance(x, x), 0.0);
    const std::vector<double> a = {2.5}, b = {-0.5};
    EXPECT_EQ(dtw_distance(a, b), 9.0);
    EXPECT_THROW(dtw_distance(std::vector<double>{}, x), std::invalid_argument);
}

TEST(Dtw, MatchesTableOracleAndIsSymmetric) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> len(1, 10);
    std::uniform_real_distribution<double> val(-2, 2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(len(rng)), y(len(rng));
        for (double& v : x) v = val(rng);
        for (double& v : y) v = val(rng);
        EXPECT_EQ(dtw_distance(x, y), dtw_table_oracle(x, y));
        EXPECT_EQ(dtw_distance(x, y), dtw_distance(y, x));
    }
}

TEST(DtwHypergraph, IdenticalSeriesMergeDuplicates) {
    const Tensor series({3, 4}, std::vector<double>{1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4});
    const HyperGraph h = dtw_k_hypergraph(series, 1);
    // stocks 0 and 1 both pick {0,1}; stock 2 picks its lowest-index tie, stock 0
    ASSERT_EQ(h.edge_count(), 2u);
    EXPECT_EQ(h.edges[0], members({0, 1}));
    EXPECT_EQ(h.edges[1], members({0, 2}));
    EXPECT_EQ(dtw_k_hypergraph(series, 2).edge_count(), 1u);
    EXPECT_THROW(dtw_k_hypergraph(series, 3), ConfigError);
}

TEST(DtwHypergraph, SeparatedClustersRecovered) {
    std::vector<double> v;
    for (int i = 0; i < 6; ++i)
        for (int t = 0; t < 8; ++t) v.push_back(i < 3 ? std::sin(t) : 10.0 + t);
    const HyperGraph h = dtw_k_hypergraph(Tensor({6, 8}, v), 2);
    ASSERT_EQ(h.edge_count(), 2u);
    EXPECT_EQ(h.edges[0], members({0, 1, 2}));
    EXPECT_EQ(h.edges[1], members({3, 4, 5}));
}

TEST(DtwHypergraph, MatchesExhaustiveOracle) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g;
    std::vector<double> v(6 * 50);
    for (double& x : v) x = g(rng);
    const Tensor series({6, 50}, v);
    const HyperGraph h = dtw_k_hypergraph(series, 2);

    std::set<std::vector<std::size_t>> expected;
    for (std::size_t i = 0; i < 6; ++i) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t j = 0; j < 6; ++j)
            if (j != i) {
                d.emplace_back(dtw_table_oracle({v.begin() + 50 * i, v.begin() + 50 * i + 50},
                                                {v.begin() + 50 * j, v.begin() + 50 * j + 50}),
                               j);
            }
        std::sort(d.begin(), d.end());
        std::vector<std::size_t> e = {i, d[0].second, d[1].second};
        std::sort(e.begin(), e.end());
        expected.insert(e);
    }
    EXPECT_EQ(std::set<std::vector<std::size_t>>(h.edges.begin(), h.edges.end()), expected);
    EXPECT_EQ(h.edge_count(), expected.size());
    EXPECT_LE(h.edge_count(), 6u);
}

TEST(Correlation, IdenticalAndOppositeReturns) {
    // stock 1 copies stock 0; stock 2 has the mirrored return path
    const std::vector<double> r = {0.01, -0.02, 0.03, 0.0, -0.01};
    std::vector<double> c(3 * 6);
    c[0] = c[6] = c[12] = 100;
    for (std::size_t t = 1; t < 6; ++t) {
        c[t] = c[t - 1] * (1 + r[t - 1]);
        c[6 + t] = c[6 + t - 1] * (1 + r[t - 1]);
        c[12 + t] = c[12 + t - 1] * (1 - r[t - 1]);
    }
    const Tensor closes({3, 6}, c);
    const PairGraph g = correlation_graph(closes, {0, 6}, 0.99);
    EXPECT_TRUE(g.edge(0, 1));
    EXPECT_FALSE(g.edge(0, 2));
    EXPECT_FALSE(correlation_graph(closes, {0, 6}, -1.0 + 1e-9).edge(0, 2));
}

TEST(Correlation, ZeroVarianceStockIsolated) {
    const Tensor closes({2, 5}, std::vector<double>{5, 5, 5, 5, 5, 1, 2, 3, 2, 1});
    const PairGraph g = correlation_graph(closes, {0, 5}, -2.0);
    EXPECT_EQ(g.edge_count(), 0u);
}

TEST(Correlation, MatchesDirectOracle) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0, 0.02);
    const std::size_t N = 5, T = 40;
    std::vector<double> c(N * T);
    std::vector<double> common(T);
    for (double& x : common) x = g(rng);
    for (std::size_t i = 0; i < N; ++i) {
        c[i * T] = 50;
        for (std::size_t t = 1; t < T; ++t) c[i * T + t] = c[i * T + t - 1] * (1 + (i < 3 ? common[t] : 0) + g(rng));
    }
    const PairGraph graph = correlation_graph(Tensor({N, T}, c), {0, T}, 0.3);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) {
                EXPECT_FALSE(graph.edge(i, i));
                continue;
            }
            std::vector<double> a, b;
            for (std::size_t t = 1; t < T; ++t) {
                a.push_back(c[i * T + t] / c[i * T + t - 1] - 1);
                b.push_back(c[j * T + t] / c[j * T + t - 1] - 1);
            }
            EXPECT_EQ(graph.edge(i, j), testing::pearson_oracle(a, b) > 0.3) << i << "," << j;
        }
}

TEST(CliqueExpansion, Counts) {
    HyperGraph h;
    h.n = 3;
    h.edges = {{0, 1, 2}};
    const PairGraph g = hyper_to_pairwise(h);
    EXPECT_EQ(g.edge_count(), 3u);
    EXPECT_TRUE(g.edge(0, 1) && g.edge(0, 2) && g.edge(1, 2));

    for (std::size_t m = 1; m <= 9; ++m) {
        HyperGraph big;
        big.n = 10;
        big.edges.push_back({});
        for (std::size_t v = 0; v < m; ++v) big.edges[0].push_back(v);
        EXPECT_EQ(hyper_to_pairwise(big).edge_count(), m * (m - 1) / 2);
    }
}

TEST(CliqueExpansion, DisjointEdgesAreBlockDiagonal) {
    HyperGraph h;
    h.n = 5;
    h.edges = {{0, 1}, {2, 3, 4}};
    const PairGraph g = hyper_to_pairwise(h);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(g.edge(i, j), i != j && (i < 2) == (j < 2));
}

TEST(CliqueExpansion, MonotoneInHyperedges) {
    std::mt19937_64 rng(4);
    HyperGraph h;
    h.n = 8;
    PairGraph before = hyper_to_pairwise(h);
    for (int step = 0; step < 10; ++step) {
        std::vector<std::size_t> e;
        for (std::size_t v = 0; v < 8; ++v)
            if (rng() % 3 == 0) e.push_back(v);
        if (e.empty()) e.push_back(0);
        h.edges.push_back(e);
        const PairGraph after = hyper_to_pairwise(h);
        for (std::size_t k = 0; k < before.adj.size(); ++k) EXPECT_LE(before.adj[k], after.adj[k]);
        before = after;
    }
}

TEST(Exchange, RoundTrip) {
    const auto file = std::filesystem::temp_directory_path() / "gapnet_graph.txt";
    HyperGraph h;
    h.n = 6;
    h.edges = {{0, 3, 5}, {1, 2}};
    write_graph(file, h);
    const HyperGraph back = read_graph(file);
    EXPECT_EQ(back.n, 6u);
    EXPECT_EQ(back.edges, h.edges);

    const PairGraph g = hyper_to_pairwise(h);
    write_graph(file, pairwise_to_hyper(g));
    EXPECT_EQ(hyper_to_pairwise(read_graph(file)).adj, g.adj);
    std::filesystem::remove(file);
}

TEST(Exchange, RejectsBadIndices) {
    const auto file = std::filesystem::temp_directory_path() / "gapnet_bad_graph.txt";
    {
        std::ofstream out(file);
        out << "3 1\n0 7\n";
    }
    EXPECT_THROW(read_graph(file), DataError);
    std::filesystem::remove(file);
}

}  // namespace
}  // namespace gapnet
