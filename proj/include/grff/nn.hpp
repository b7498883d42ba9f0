#pragma once

#include <span>

#include "grff/tensor.hpp"

namespace grff {

// Per-feature batch normalization over the batch dimension of [B x F].
// Train mode: biased batch variance with epsilon, running stats advanced by
// exponential average when update_running is set. Eval mode: running stats.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean, std::vector<double>& running_var, Mode mode,
                 bool update_running = true, double eps = 1e-5, double momentum = 0.1);

// Stride-1 valid cross-correlation: [B x C x H x W] * [K x C x kh x kw]
// -> [B x K x (H-kh+1) x (W-kw+1)].
Tensor conv2d_valid(const Tensor& x, const Tensor& kernels);

// Non-overlapping 2x2 max pooling; gradient goes to the first occurrence of
// the maximum within each window.
Tensor maxpool2(const Tensor& x);

// Mean over the batch of -log softmax at the true class, max-stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int64_t> labels);

// Row-wise softmax probabilities (no graph; evaluation helper).
std::vector<double> softmax_rows(const Tensor& logits);

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

std::vector<int64_t> argmax_rows(const Tensor& logits);
std::vector<int64_t> argmin_rows(const Tensor& logits);
double accuracy(std::span<const int64_t> predictions, std::span<const int64_t> labels);

}  // namespace grff
