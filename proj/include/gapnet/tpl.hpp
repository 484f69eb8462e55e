#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "gapnet/graphs.hpp"
#include "gapnet/tensor.hpp"

namespace gapnet {

/// Gate weights are N x 2N and act on the rows of concat(adj_temp, memory).
struct TplParams {
    Tensor wf, wi, wc, wo;
    Tensor bf, bi, bc, bo;

    static TplParams init(std::size_t n, std::mt19937_64& rng);
    static TplParams zeros(std::size_t n);

    template <class Self, class Fn>
    static void visit(Self& p, Fn&& fn) {
        fn("tpl.wf", p.wf);
        fn("tpl.wi", p.wi);
        fn("tpl.wc", p.wc);
        fn("tpl.wo", p.wo);
        fn("tpl.bf", p.bf);
        fn("tpl.bi", p.bi);
        fn("tpl.bc", p.bc);
        fn("tpl.bo", p.bo);
    }
};

struct TplState {
    Tensor memory;  // Z x N x N, previous day's attribute output
    Tensor cell;    // Z x N x N

    TplState detached() const { return {memory.detach(), cell.detach()}; }
};

/// Memory from a binary prior replicated over Z; cell zero.
TplState init_state(const PairGraph& prior, std::size_t z);
TplState init_state(const HyperGraph& prior, std::size_t z);
/// Memory uniform in [-0.1, 0.1) from `seed`; cell zero.
TplState init_state_random(std::size_t n, std::size_t z, std::uint64_t seed);

/// One recurrence step. Returns (adj_attr_t, new state).
std::pair<Tensor, TplState> tpl_step(const Tensor& adj_temp, const TplState& state, const TplParams& p);

inline constexpr std::size_t kUnboundedWindow = std::numeric_limits<std::size_t>::max();

/// Chronological fold of tpl_step; the state is cut from the tape every
/// `bptt_window` steps, which changes gradients but never values.
std::vector<Tensor> run_sequence(const std::vector<Tensor>& adj_temps, const TplState& init, const TplParams& p,
                                 std::size_t bptt_window = kUnboundedWindow, TplState* final_state = nullptr);

}  // namespace gapnet
