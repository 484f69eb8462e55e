#pragma once

#include <random>
#include <string>
#include <vector>

#include "gapnet/tensor.hpp"

namespace gapnet {

struct SplConfig {
    std::vector<std::size_t> kernel_sizes = {3, 5, 7};
    std::size_t channels_z = 4;
    std::size_t heads = 1;
    std::size_t lookback = 16;
    std::size_t features = 5;
    std::size_t ffn_dim = 128;
    double dropout = 0.1;

    /// Token width seen by attention: K * L.
    std::size_t token_dim() const { return kernel_sizes.size() * lookback; }
    void validate() const;
};

struct ResBlockParams {
    Tensor w;  // Z x Z x k
    Tensor b;  // Z
};

/// entry conv (M -> Z), res block, middle conv (Z -> Z), res block.
struct ScaleParams {
    Tensor entry_w, entry_b;
    ResBlockParams res1;
    Tensor mid_w, mid_b;
    ResBlockParams res2;
};

/// One pre-norm encoder layer over D = K*L features; weights map inputs on the left (x W).
struct EncoderParams {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor w1, b1, w2, b2;
};

struct SplParams {
    std::vector<ScaleParams> scales;  // one per kernel size, same order as the config
    std::vector<EncoderParams> heads;

    static SplParams init(const SplConfig& config, std::mt19937_64& rng);
    static SplParams zeros(const SplConfig& config);

    template <class Self, class Fn>
    static void visit(Self& p, Fn&& fn);
};

/// x + LeakyReLU(LayerNorm_time(Conv1D(x))) for x: [N, Z, L].
Tensor res_conv_block(const Tensor& x, const ResBlockParams& p);

/// [N, L, M] -> [N, Z, K*L]; scales concatenated along time in config order.
Tensor multi_scale_encode(const Tensor& x, const SplParams& p, const SplConfig& config);

/// Pre-norm encoder layer on [B, T, D] tokens; returns x + attention + feed-forward.
/// `dropout_rng` null disables dropout. `attention` (if given) receives the softmax weights.
Tensor encoder_layer(const Tensor& x, const EncoderParams& p, double dropout, std::mt19937_64* dropout_rng,
                     Tensor* attention = nullptr);

/// [N, Z, K*L] -> [Z, N, H*K*L]; nodes are tokens, Z is the batch.
Tensor attend_nodes(const Tensor& x_conv, const SplParams& p, const SplConfig& config,
                    std::mt19937_64* dropout_rng = nullptr);

/// Batched Gram matrix X X^T: [Z, N, D] -> [Z, N, N].
Tensor temp_adj(const Tensor& x_enc);

/// Whole layer: lookback window [N, L, M] -> adj_temp [Z, N, N].
Tensor spl_forward(const Tensor& x, const SplParams& p, const SplConfig& config,
                   std::mt19937_64* dropout_rng = nullptr);

template <class Self, class Fn>
void SplParams::visit(Self& p, Fn&& fn) {
    for (std::size_t s = 0; s < p.scales.size(); ++s) {
        auto& sc = p.scales[s];
        const std::string pre = "spl.scale" + std::to_string(s) + ".";
        fn(pre + "entry.w", sc.entry_w);
        fn(pre + "entry.b", sc.entry_b);
        fn(pre + "res1.w", sc.res1.w);
        fn(pre + "res1.b", sc.res1.b);
        fn(pre + "mid.w", sc.mid_w);
        fn(pre + "mid.b", sc.mid_b);
        fn(pre + "res2.w", sc.res2.w);
        fn(pre + "res2.b", sc.res2.b);
    }
    for (std::size_t h = 0; h < p.heads.size(); ++h) {
        auto& e = p.heads[h];
        const std::string pre = "spl.head" + std::to_string(h) + ".";
        fn(pre + "ln1.g", e.ln1_g);
        fn(pre + "ln1.b", e.ln1_b);
        fn(pre + "wq", e.wq);
        fn(pre + "bq", e.bq);
        fn(pre + "wk", e.wk);
        fn(pre + "bk", e.bk);
        fn(pre + "wv", e.wv);
        fn(pre + "bv", e.bv);
        fn(pre + "wo", e.wo);
        fn(pre + "bo", e.bo);
        fn(pre + "ln2.g", e.ln2_g);
        fn(pre + "ln2.b", e.ln2_b);
        fn(pre + "ffn.w1", e.w1);
        fn(pre + "ffn.b1", e.b1);
        fn(pre + "ffn.w2", e.w2);
        fn(pre + "ffn.b2", e.b2);
    }
}

}  // namespace gapnet
