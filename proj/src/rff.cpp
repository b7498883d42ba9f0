#include "grff/rff.hpp"

#include <cmath>

#include "grff/nn.hpp"

namespace grff {

double rbf_kernel(std::span<const double> x, std::span<const double> xp,
                  const RBFKernelSpec& spec) {
  if (spec.gamma <= 0.0) throw ConfigError("rbf_kernel: gamma must be positive");
  if (x.size() != xp.size())
    throw ShapeError("rbf_kernel: dimension mismatch " + std::to_string(x.size()) + " vs " +
                     std::to_string(xp.size()));
  double d2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - xp[i];
    d2 += d * d;
  }
  return std::exp(-spec.gamma * d2);
}

WeightBatch sample_spectral_weights(const RBFKernelSpec& spec, int64_t count, int64_t dim,
                                    Rng& rng) {
  if (spec.gamma <= 0.0) throw ConfigError("sample_spectral_weights: gamma must be positive");
  if (count < 1) throw ConfigError("sample_spectral_weights: count must be >= 1");
  std::vector<double> w(static_cast<size_t>(count * dim));
  rng.fill_normal(w);
  const double sd = std::sqrt(2.0 * spec.gamma);
  for (double& v : w) v *= sd;
  return Tensor::from_data({count, dim}, std::move(w));
}

Tensor rff_map(const Tensor& x, const WeightBatch& weights) {
  if (x.ndim() != 2 || weights.ndim() != 2 || x.dim(1) != weights.dim(1))
    throw ShapeError("rff_map: data " + shape_str(x.shape()) + " vs weights " +
                     shape_str(weights.shape()) + " (weights and points must share dimension)");
  const int64_t d_count = weights.dim(0);
  const double s = std::sqrt(1.0 / static_cast<double>(d_count));
  Tensor proj = matmul_nt(x, weights);  // [B x D] of w_j' x_i
  return concat(scale(cos(proj), s), scale(sin(proj), s), 1);
}

Tensor conv_rff_map(const Tensor& x, const WeightBatch& kernels) {
  const int64_t d_count = kernels.dim(0);
  const double s = std::sqrt(1.0 / static_cast<double>(d_count));
  Tensor response = conv2d_valid(x, kernels);
  const Shape& rs = response.shape();
  if (rs[2] % 2 != 0 || rs[3] % 2 != 0)
    throw ShapeError("conv_rff_map: convolution response " + shape_str(rs) +
                     " has odd spatial extent; pooling needs even sizes");
  Tensor both = concat(scale(cos(response), s), scale(sin(response), s), 1);
  return maxpool2(both);
}

ApproxErrorStats approximation_error(const Tensor& x, const RBFKernelSpec& spec, int64_t count,
                                     uint64_t seed) {
  if (x.ndim() != 2) throw ShapeError("approximation_error: expected [n x d] samples");
  Rng rng(seed);
  WeightBatch w = sample_spectral_weights(spec, count, x.dim(1), rng);
  NoGradGuard guard;
  Tensor z = rff_map(x, w);
  const int64_t n = x.dim(0), f = z.dim(1), d = x.dim(1);
  ApproxErrorStats stats;
  int64_t pairs = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i; j < n; ++j) {
      double dot = 0.0;
      for (int64_t k = 0; k < f; ++k) dot += z.data()[i * f + k] * z.data()[j * f + k];
      const double truth = rbf_kernel({x.data() + i * d, static_cast<size_t>(d)},
                                      {x.data() + j * d, static_cast<size_t>(d)}, spec);
      const double err = std::abs(dot - truth);
      stats.max_abs = std::max(stats.max_abs, err);
      stats.mean_abs += err;
      ++pairs;
    }
  stats.mean_abs /= static_cast<double>(pairs);
  return stats;
}

}  // namespace grff
