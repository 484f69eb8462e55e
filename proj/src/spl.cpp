#include "gapnet/spl.hpp"

#include <algorithm>
#include <cmath>

#include "gapnet/errors.hpp"
#include "gapnet/ops.hpp"
#include "gapnet/params.hpp"

namespace gapnet {
namespace {

ScaleParams make_scale(std::size_t k, std::size_t m, std::size_t z, std::mt19937_64* rng) {
    auto w = [&](Shape shape, std::size_t fan_in) { return rng ? uniform_fan_in(shape, fan_in, *rng) : Tensor(shape, 0.0); };
    ScaleParams s;
    s.entry_w = w({z, m, k}, m * k);
    s.entry_b = w({z}, m * k);
    s.res1.w = w({z, z, k}, z * k);
    s.res1.b = w({z}, z * k);
    s.mid_w = w({z, z, k}, z * k);
    s.mid_b = w({z}, z * k);
    s.res2.w = w({z, z, k}, z * k);
    s.res2.b = w({z}, z * k);
    return s;
}

EncoderParams make_encoder(std::size_t d, std::size_t ffn, std::mt19937_64* rng) {
    auto w = [&](Shape shape, std::size_t fan_in) { return rng ? uniform_fan_in(shape, fan_in, *rng) : Tensor(shape, 0.0); };
    EncoderParams e;
    e.ln1_g = Tensor({d}, rng ? 1.0 : 0.0);
    e.ln1_b = Tensor({d}, 0.0);
    e.wq = w({d, d}, d);
    e.bq = w({d}, d);
    e.wk = w({d, d}, d);
    e.bk = w({d}, d);
    e.wv = w({d, d}, d);
    e.bv = w({d}, d);
    e.wo = w({d, d}, d);
    e.bo = w({d}, d);
    e.ln2_g = Tensor({d}, rng ? 1.0 : 0.0);
    e.ln2_b = Tensor({d}, 0.0);
    e.w1 = w({d, ffn}, d);
    e.b1 = w({ffn}, d);
    e.w2 = w({ffn, d}, ffn);
    e.b2 = w({d}, ffn);
    return e;
}

SplParams make_params(const SplConfig& c, std::mt19937_64* rng) {
    c.validate();
    SplParams p;
    for (std::size_t k : c.kernel_sizes) p.scales.push_back(make_scale(k, c.features, c.channels_z, rng));
    for (std::size_t h = 0; h < c.heads; ++h) p.heads.push_back(make_encoder(c.token_dim(), c.ffn_dim, rng));
    return p;
}

Tensor maybe_dropout(const Tensor& x, double p, std::mt19937_64* rng) {
    return rng && p > 0.0 ? dropout(x, p, *rng) : x;
}

}  // namespace

void SplConfig::validate() const {
    if (kernel_sizes.empty()) throw ConfigError("spl.kernel_sizes must not be empty");
    for (std::size_t k : kernel_sizes) {
        if (k % 2 == 0) throw ConfigError("spl.kernel_sizes must be odd, got " + std::to_string(k));
        if (k > lookback) {
            throw ConfigError("spl.kernel_sizes entry " + std::to_string(k) + " exceeds the lookback " +
                              std::to_string(lookback));
        }
    }
    if (channels_z == 0) throw ConfigError("spl.channels_z must be at least 1");
    if (heads == 0) throw ConfigError("spl.heads must be at least 1");
    if (ffn_dim == 0) throw ConfigError("spl.ffn_dim must be at least 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("spl.dropout must lie in [0, 1)");
}

SplParams SplParams::init(const SplConfig& config, std::mt19937_64& rng) { return make_params(config, &rng); }
SplParams SplParams::zeros(const SplConfig& config) { return make_params(config, nullptr); }

Tensor res_conv_block(const Tensor& x, const ResBlockParams& p) {
    if (x.rank() != 3 || p.w.rank() != 3 || p.w.dim(0) != x.dim(1) || p.w.dim(1) != x.dim(1)) {
        throw ShapeError("res_conv_block: weights " + shape_str(p.w.shape()) + " do not preserve channels of " +
                         shape_str(x.shape()));
    }
    return add(x, leaky_relu(layer_norm(conv1d(x, p.w, p.b), 2)));
}

Tensor multi_scale_encode(const Tensor& x, const SplParams& p, const SplConfig& config) {
    if (x.rank() != 3 || x.dim(1) != config.lookback || x.dim(2) != config.features) {
        throw ShapeError("multi_scale_encode: expected [N, " + std::to_string(config.lookback) + ", " +
                         std::to_string(config.features) + "], got " + shape_str(x.shape()));
    }
    const std::size_t largest = *std::max_element(config.kernel_sizes.begin(), config.kernel_sizes.end());
    if (x.dim(1) < largest) throw ShapeError("multi_scale_encode: lookback shorter than the largest kernel");
    const Tensor channels_first = transpose(x, {0, 2, 1});  // N x M x L
    std::vector<Tensor> outs;
    for (const ScaleParams& s : p.scales) {
        Tensor h = conv1d(channels_first, s.entry_w, s.entry_b);
        h = res_conv_block(h, s.res1);
        h = conv1d(h, s.mid_w, s.mid_b);
        outs.push_back(res_conv_block(h, s.res2));
    }
    return concat(outs, 2);
}

Tensor encoder_layer(const Tensor& x, const EncoderParams& p, double drop, std::mt19937_64* rng, Tensor* attention) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.dim(x.rank() - 1)));
    const Tensor h = add(mul(layer_norm(x, x.rank() - 1), p.ln1_g), p.ln1_b);
    const Tensor q = add(matmul(h, p.wq), p.bq);
    const Tensor k = add(matmul(h, p.wk), p.bk);
    const Tensor v = add(matmul(h, p.wv), p.bv);
    const Tensor weights = softmax(scale(matmul(q, transpose_last(k)), inv_sqrt_d), x.rank() - 1);
    if (attention) *attention = weights.detach();
    const Tensor attn = add(matmul(matmul(weights, v), p.wo), p.bo);
    const Tensor x1 = add(x, maybe_dropout(attn, drop, rng));

    const Tensor h2 = add(mul(layer_norm(x1, x.rank() - 1), p.ln2_g), p.ln2_b);
    const Tensor ffn = add(matmul(relu(add(matmul(h2, p.w1), p.b1)), p.w2), p.b2);
    return add(x1, maybe_dropout(ffn, drop, rng));
}

Tensor attend_nodes(const Tensor& x_conv, const SplParams& p, const SplConfig& config, std::mt19937_64* rng) {
    const Tensor tokens = transpose(x_conv, {1, 0, 2});  // Z x N x (K*L)
    std::vector<Tensor> heads;
    for (const EncoderParams& e : p.heads) heads.push_back(encoder_layer(tokens, e, config.dropout, rng));
    return heads.size() == 1 ? heads.front() : concat(heads, 2);
}

Tensor temp_adj(const Tensor& x_enc) { return matmul(x_enc, transpose_last(x_enc)); }

Tensor spl_forward(const Tensor& x, const SplParams& p, const SplConfig& config, std::mt19937_64* rng) {
    return temp_adj(attend_nodes(multi_scale_encode(x, p, config), p, config, rng));
}

}  // namespace gapnet
