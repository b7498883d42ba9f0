#pragma once

#include <span>

#include "grff/rng.hpp"
#include "grff/tensor.hpp"

namespace grff {

// RBF kernel k(x, x') = exp(-gamma * ||x - x'||^2). Its spectral distribution
// is N(0, 2*gamma*I): with w ~ N(0, 2g I), E[cos(w'(x-x'))] equals the
// characteristic function of the normal evaluated at (x-x'), which is
// exp(-(1/2)*(x-x')' (2g I) (x-x')) = exp(-g ||x-x'||^2). Sampling from it
// makes the feature map below an unbiased kernel estimate.
struct RBFKernelSpec {
  double gamma = 1.0;
};

// A batch of spectral weights: [D x d] rows for vector inputs, or
// [D x C x kh x kw] kernels for the image variant.
using WeightBatch = Tensor;

double rbf_kernel(std::span<const double> x, std::span<const double> xp, const RBFKernelSpec& spec);

// Draws D weights from the spectral normal N(0, 2*gamma*I) of the RBF kernel.
WeightBatch sample_spectral_weights(const RBFKernelSpec& spec, int64_t count, int64_t dim,
                                    Rng& rng);

// Fourier feature map, cos block first then sin block, scaled by sqrt(1/D):
// [B x d], [D x d] -> [B x 2D]. Differentiable in both arguments.
Tensor rff_map(const Tensor& x, const WeightBatch& weights);

// Image variant: valid convolution, cos/sin of the response concatenated
// along channels (cos first, both scaled by sqrt(1/D)), then 2x2 max pooling.
// [B x C x H x W], [D x C x kh x kw] -> [B x 2D x (H-kh+1)/2 x (W-kw+1)/2].
Tensor conv_rff_map(const Tensor& x, const WeightBatch& kernels);

struct ApproxErrorStats {
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

// Monte Carlo check of the kernel estimate: samples D spectral weights with
// the given seed and compares phi(x)'phi(x') against the closed form over all
// pairs in X (diagonal included).
ApproxErrorStats approximation_error(const Tensor& x, const RBFKernelSpec& spec, int64_t count,
                                     uint64_t seed);

}  // namespace grff
