#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gapnet/tensor.hpp"

// Differentiable tensor ops. Each op records itself on the tape of its tracked
// inputs (if any) together with its local gradient rule.
namespace gapnet {

// Elementwise binary ops with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
/// x^p elementwise; callers keep x inside the domain of p.
Tensor pow_scalar(const Tensor& x, double p);

/// Batched product over the trailing two axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& x, const std::vector<std::size_t>& perm);
/// Swaps the trailing two axes.
Tensor transpose_last(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
Tensor abs(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalizes to zero mean and unit (biased) variance along `axis`, no affine.
Tensor layer_norm(const Tensor& x, std::size_t axis, double eps = 1e-5);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reduces `axis` away.
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor mse(const Tensor& a, const Tensor& b);

/// Cross-correlation along the last axis with zero "same" padding.
/// x: [N, C_in, L], w: [C_out, C_in, k], b: [C_out]; k must be odd.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b);

/// Inverted dropout; the sampled mask is a constant for gradients.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

}  // namespace gapnet
