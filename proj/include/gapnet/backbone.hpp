#pragma once

#include <random>
#include <string>

#include "gapnet/realize.hpp"
#include "gapnet/tensor.hpp"

namespace gapnet {

enum class BackboneKind { gcn, hgcn, mlp };
BackboneKind parse_backbone(const std::string& name);
std::string backbone_name(BackboneKind kind);
/// The realization mode a backbone consumes (mlp ignores the graph).
GraphMode graph_mode(BackboneKind kind);

struct BackboneParams {
    Tensor w_in, b_in;      // (L*M) x H, H
    Tensor w1, w2;          // H x H
    Tensor w_head, b_head;  // H x 1, 1

    static BackboneParams init(std::size_t in_dim, std::size_t hidden, std::mt19937_64& rng);

    template <class Self, class Fn>
    static void visit(Self& p, Fn&& fn) {
        fn("backbone.w_in", p.w_in);
        fn("backbone.b_in", p.b_in);
        fn("backbone.w1", p.w1);
        fn("backbone.w2", p.w2);
        fn("backbone.w_head", p.w_head);
        fn("backbone.b_head", p.b_head);
    }
};

/// D^-1/2 (A' + I) D^-1/2 with A' = offdiag(binary) * (1 + mean_Z(masked)).
Tensor gcn_operator(const RealizedGraph& graph);

/// Dv^-1/2 H De^-1 H^T Dv^-1/2 over live hyperedges, H weighted by
/// (1 + mean_Z(masked)); nodes on no live hyperedge map to themselves.
Tensor hgcn_operator(const RealizedGraph& graph);

/// Scores [N] from windows [N, L, M] propagated twice by `op` ([N, N]).
Tensor propagate(const Tensor& op, const Tensor& x, const BackboneParams& p);
/// Same stack without any neighbourhood mixing.
Tensor mlp_forward(const Tensor& x, const BackboneParams& p);

Tensor gcn_forward(const RealizedGraph& graph, const Tensor& x, const BackboneParams& p);
Tensor hgcn_forward(const RealizedGraph& graph, const Tensor& x, const BackboneParams& p);
Tensor backbone_forward(BackboneKind kind, const RealizedGraph* graph, const Tensor& x, const BackboneParams& p);

}  // namespace gapnet
