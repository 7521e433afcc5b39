#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hoic/tensor.hpp"

// Differentiable tensor operations.
//
// Layout conventions: images and feature maps are (B, C, H, W); token
// sequences are (B, N, D). Binary elementwise ops accept a right operand
// whose shape equals the left shape, equals a suffix of it (broadcast over
// the leading axes), or holds a single element.
namespace hoic::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);  // same shape only
Tensor maximum(const Tensor& a, const Tensor& b);  // same shape only

Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
// Natural log with the input clamped to [floor, inf).
Tensor log(const Tensor& a, double floor = 1e-300);
Tensor abs(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor slice(const Tensor& a, int axis, int start, int length);
Tensor concat(const std::vector<Tensor>& parts, int axis);
// Rows of a 2-D tensor in the given order.
Tensor gather_rows(const Tensor& a, const std::vector<int>& rows);
// (B, D) -> (B, n, D), repeating each row n times.
Tensor repeat_rows(const Tensor& a, int n);

// Batched matrix product over the last two axes. b may be rank 2, in which
// case it is shared across the leading axes of a.
Tensor matmul(const Tensor& a, const Tensor& b);
// x (..., in) * w^T (out, in) + bias (out). bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor softmax_last(const Tensor& a);
Tensor log_softmax_last(const Tensor& a);
// Log-softmax over axis 1 of a (B, K, H, W) tensor.
Tensor log_softmax_channels(const Tensor& a);

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
// Nearest-neighbour 2x upsampling of (B, C, H, W).
Tensor upsample2x(const Tensor& x);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};
// Normalizes over every axis except 1, for (B, C) or (B, C, H, W) input.
// In training mode batch statistics are used and the running statistics
// updated in place; otherwise the running statistics are used.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  bool training);
// Per-sample normalization over channel groups, for (B, C) or (B, C, H, W).
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  double eps = 1e-5);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool training);

// (B, C, H, W) -> (B, C).
Tensor global_avg_pool(const Tensor& x);

// Cell rectangle with exclusive max bounds.
struct CellRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

// Per-sample mean over a cell rectangle: (B, C, H, W) -> (B, C).
Tensor region_avg_pool(const Tensor& x, const std::vector<CellRect>& rects);
// Multiplies x at cells where mask[b][y * W + x] != 0 by the single-element
// tensor factor; all other values pass through unchanged.
Tensor scale_cells(const Tensor& x, const Tensor& factor,
                   const std::vector<std::vector<std::uint8_t>>& masks);
// x (B, C, H, W) times gate (B, C) broadcast over space.
Tensor mul_channels(const Tensor& x, const Tensor& gate);

// Mean binary cross-entropy of probabilities against {0, 1} targets, with
// probabilities clamped to [eps, 1 - eps].
Tensor binary_cross_entropy(const Tensor& probs, const std::vector<double>& targets,
                            double eps = 1e-12);
// Sum over rows of -logp[row, target[row]] for a (N, K) log-probability tensor.
Tensor nll_sum(const Tensor& log_probs, const std::vector<int>& targets);
// Weighted mean of -logp over pixels for (B, K, H, W) log-probabilities and
// (B, H, W) labels: sum(w[label] * nll) / sum(w[label]).
Tensor pixel_nll(const Tensor& log_probs, std::span<const int> labels,
                 std::span<const double> class_weights);

}  // namespace hoic::ops
