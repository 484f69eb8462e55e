#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fd_oracle.hpp"
#include "gapnet/backbone.hpp"
#include "gapnet/ops.hpp"

namespace gapnet {
namespace {

using testing::random_tensor;
using testing::struct_gradient_check;

RealizedGraph graph_from(GraphMode mode, const Tensor& binary, const Tensor& attr) {
    return {mode, binary, mask_attributes(attr, binary)};
}

Tensor random_binary(std::size_t n, std::mt19937_64& rng, double density = 0.5) {
    std::bernoulli_distribution coin(density);
    Tensor b({n, n}, 0.0);
    for (double& v : b.mutable_data()) v = coin(rng) ? 1.0 : 0.0;
    return b;
}

TEST(Gcn, EmptyGraphIsolatesNodes) {
    std::mt19937_64 rng(1);
    const std::size_t n = 5;
    const BackboneParams p = BackboneParams::init(8 * 5, 16, rng);
    const RealizedGraph empty{GraphMode::pairwise, Tensor({n, n}, 0.0), Tensor({2, n, n}, 0.0)};
    EXPECT_EQ(gcn_operator(empty).values(), Tensor::eye(n).values());

    Tensor x = random_tensor({n, 8, 5}, rng);
    const Tensor before = gcn_forward(empty, x, p);
    EXPECT_EQ(before.values(), mlp_forward(x, p).values());
    for (std::size_t k = 0; k < 40; ++k) x.mutable_data()[3 * 40 + k] += 0.5;
    const Tensor after = gcn_forward(empty, x, p);
    for (std::size_t i = 0; i < n; ++i) {
        if (i != 3) EXPECT_EQ(after[i], before[i]);
    }
    EXPECT_NE(after[3], before[3]);
}

TEST(Gcn, CompleteGraphWithIdenticalFeatures) {
    std::mt19937_64 rng(2);
    const std::size_t n = 6;
    const BackboneParams p = BackboneParams::init(4 * 5, 8, rng);
    const Tensor row = random_tensor({1, 4, 5}, rng);
    std::vector<Tensor> rows(n, row);
    const Tensor x = concat(rows, 0);
    Tensor complete({n, n}, 1.0);
    const Tensor scores = gcn_forward(graph_from(GraphMode::pairwise, complete, Tensor({2, n, n}, 0.3)), x, p);
    for (std::size_t i = 1; i < n; ++i) EXPECT_NEAR(scores[i], scores[0], 1e-12);
}

TEST(Gcn, OperatorMatchesDegreeNormalizationOracle) {
    std::mt19937_64 rng(3);
    const std::size_t n = 6;
    const Tensor b = random_binary(n, rng);
    const Tensor attr = random_tensor({3, n, n}, rng, -0.9, 0.9);
    const Tensor op = gcn_operator(graph_from(GraphMode::pairwise, b, attr));
    std::vector<double> a(n * n), deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double w = 0.0;
            if (i == j) {
                w = 1.0;
            } else if (b.at({i, j}) != 0.0) {
                w = 1.0 + (attr.at({0, i, j}) + attr.at({1, i, j}) + attr.at({2, i, j})) / 3.0;
            }
            a[i * n + j] = w;
            deg[i] += w;
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            EXPECT_NEAR(op.at({i, j}), a[i * n + j] / std::sqrt(deg[i] * deg[j]), 1e-12);
}

TEST(Gcn, RejectsHyperGraph) {
    const RealizedGraph h{GraphMode::hyper, Tensor({3, 3}, 1.0), Tensor({1, 3, 3}, 0.0)};
    EXPECT_THROW(gcn_operator(h), std::invalid_argument);
}

TEST(Hgcn, SingleFullHyperedgeWithIdenticalFeatures) {
    std::mt19937_64 rng(4);
    const std::size_t n = 5;
    const BackboneParams p = BackboneParams::init(4 * 5, 8, rng);
    const Tensor row = random_tensor({1, 4, 5}, rng);
    const Tensor x = concat(std::vector<Tensor>(n, row), 0);
    Tensor b({n, n}, 0.0);
    for (std::size_t v = 0; v < n; ++v) b.at({2, v}) = 1.0;
    const Tensor scores = hgcn_forward(graph_from(GraphMode::hyper, b, Tensor({2, n, n}, 0.0)), x, p);
    for (std::size_t i = 1; i < n; ++i) EXPECT_NEAR(scores[i], scores[0], 1e-12);
}

TEST(Hgcn, SingletonsGiveIdentityOnCoveredNodes) {
    const std::size_t n = 4;
    Tensor b({n, n}, 0.0);
    b.at({0, 0}) = 1.0;
    b.at({3, 2}) = 1.0;
    std::mt19937_64 rng(5);
    const Tensor op = hgcn_operator(graph_from(GraphMode::hyper, b, random_tensor({2, n, n}, rng, -0.9, 0.9)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(op.at({i, j}), i == j ? 1.0 : 0.0, 1e-15);
}

TEST(Hgcn, OperatorMatchesDenseAssembly) {
    std::mt19937_64 rng(6);
    const std::size_t n = 5;
    // rows 1 and 4 are live hyperedges plus row 3; node 4 uncovered
    Tensor b({n, n}, 0.0);
    for (std::size_t v : {0, 1, 2}) b.at({1, v}) = 1.0;
    for (std::size_t v : {2, 3}) b.at({3, v}) = 1.0;
    for (std::size_t v : {0, 3}) b.at({4, v}) = 1.0;
    const Tensor attr = random_tensor({2, n, n}, rng, -0.9, 0.9);
    const Tensor op = hgcn_operator(graph_from(GraphMode::hyper, b, attr));

    const std::vector<std::size_t> live = {1, 3, 4};
    auto weight = [&](std::size_t e, std::size_t v) {
        return b.at({e, v}) * (1.0 + (attr.at({0, e, v}) + attr.at({1, e, v})) / 2.0);
    };
    std::vector<double> dv(n, 0.0), de(n, 0.0);
    for (std::size_t e : live)
        for (std::size_t v = 0; v < n; ++v) {
            dv[v] += weight(e, v);
            de[e] += weight(e, v);
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double expected = 0.0;
            if (dv[i] == 0.0 || dv[j] == 0.0) {
                expected = i == j ? 1.0 : 0.0;
            } else {
                for (std::size_t e : live) expected += weight(e, i) * weight(e, j) / de[e];
                expected /= std::sqrt(dv[i] * dv[j]);
            }
            EXPECT_NEAR(op.at({i, j}), expected, 1e-12) << i << "," << j;
        }
}

TEST(Hgcn, NoLiveEdgesFallsBackToMlp) {
    std::mt19937_64 rng(7);
    const BackboneParams p = BackboneParams::init(20, 8, rng);
    const Tensor x = random_tensor({4, 4, 5}, rng);
    const RealizedGraph dead{GraphMode::hyper, Tensor({4, 4}, 0.0), Tensor({1, 4, 4}, 0.0)};
    EXPECT_EQ(hgcn_forward(dead, x, p).values(), mlp_forward(x, p).values());
}

TEST(Backbones, PermutationEquivariance) {
    std::mt19937_64 rng(8);
    const std::size_t n = 6;
    const BackboneParams p = BackboneParams::init(3 * 5, 8, rng);
    const Tensor x = random_tensor({n, 3, 5}, rng);
    const Tensor b = random_binary(n, rng);
    const Tensor attr = random_tensor({2, n, n}, rng, -0.9, 0.9);
    std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};

    Tensor px({n, 3, 5}, 0.0), pb({n, n}, 0.0), pa({2, n, n}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < 15; ++k) px.mutable_data()[i * 15 + k] = x[perm[i] * 15 + k];
        for (std::size_t j = 0; j < n; ++j) {
            pb.at({i, j}) = b.at({perm[i], perm[j]});
            for (std::size_t z = 0; z < 2; ++z) pa.at({z, i, j}) = attr.at({z, perm[i], perm[j]});
        }
    }
    for (GraphMode mode : {GraphMode::pairwise, GraphMode::hyper}) {
        const BackboneKind kind = mode == GraphMode::pairwise ? BackboneKind::gcn : BackboneKind::hgcn;
        const RealizedGraph g = graph_from(mode, b, attr), pg = graph_from(mode, pb, pa);
        const Tensor s = backbone_forward(kind, &g, x, p), ps = backbone_forward(kind, &pg, px, p);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ps[i], s[perm[i]], 1e-12);
    }
}

struct BackboneWithAttr {
    BackboneParams net;
    Tensor attr;
    template <class Self, class Fn>
    static void visit(Self& p, Fn&& fn) {
        BackboneParams::visit(p.net, fn);
        fn("attr", p.attr);
    }
};

TEST(Backbones, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(9);
    const std::size_t n = 5;
    const Tensor x = random_tensor({n, 3, 5}, rng);
    const Tensor b = random_binary(n, rng, 0.6);
    const Tensor target = random_tensor({n}, rng);
    const BackboneWithAttr start{BackboneParams::init(15, 6, rng), random_tensor({2, n, n}, rng, -0.9, 0.9)};
    for (BackboneKind kind : {BackboneKind::gcn, BackboneKind::hgcn, BackboneKind::mlp}) {
        const auto report = struct_gradient_check(start, [&](const BackboneWithAttr& q) {
            const RealizedGraph g = graph_from(graph_mode(kind), b, q.attr);
            return mse(backbone_forward(kind, &g, x, q.net), target);
        });
        EXPECT_LT(report.max_rel_error, 1e-4) << backbone_name(kind) << ": " << report.worst;
    }
}

TEST(Backbones, NamesRoundTrip) {
    for (auto kind : {BackboneKind::gcn, BackboneKind::hgcn, BackboneKind::mlp})
        EXPECT_EQ(parse_backbone(backbone_name(kind)), kind);
    EXPECT_THROW(parse_backbone("gat"), std::runtime_error);
}

}  // namespace
}  // namespace gapnet
