#pragma once

#include <optional>

#include "grff/optim.hpp"
#include "grff/rng.hpp"
#include "grff/tensor.hpp"

namespace grff {

struct NoiseSpec {
  int64_t noise_dim = 100;
  uint64_t seed = 0;
};

// Deterministic stream of standard-normal noise batches. Streams built from
// the same spec/purpose/index replay identically; sequential draws from one
// stream are disjoint.
class NoiseStream {
 public:
  NoiseStream(const NoiseSpec& spec, uint64_t purpose, uint64_t index = 0)
      : rng_(Rng(spec.seed).child(purpose, index)), dim_(spec.noise_dim) {}

  Tensor sample(int64_t count);

 private:
  Rng rng_;
  int64_t dim_;
};

Tensor sample_noise(NoiseStream& stream, int64_t count);

enum class HiddenActivation { LeakyRelu, Relu };

// MLP generator layout: every hidden block is linear -> batchnorm ->
// activation, the final block is linear -> tanh with no batchnorm.
struct GeneratorArchitecture {
  std::vector<int64_t> widths;  // [noise_dim, hidden..., out]
  HiddenActivation activation = HiddenActivation::LeakyRelu;
  double leaky_slope = 0.2;
  Shape out_shape;  // per-sample shape of one generated weight, product == widths.back()

  int64_t out_dim() const { return widths.back(); }
};

// Default hidden widths: the first layer's generator is 100->128->64->64->out,
// deeper layers use 100->512->256->256->out.
GeneratorArchitecture default_generator_arch(int layer_index, int64_t noise_dim, int64_t out_dim,
                                             HiddenActivation activation);

struct LinearLayer {
  Parameter weight;  // [in x out]
  Parameter bias;    // [out]
};

struct BatchNormLayer {
  Parameter gamma, beta;
  std::vector<double> running_mean, running_var;
};

struct GeneratorParams {
  GeneratorArchitecture arch;
  std::vector<LinearLayer> linears;  // one per block
  std::vector<BatchNormLayer> bns;   // hidden blocks only
  bool frozen = false;

  std::vector<Parameter*> parameters();
  int64_t parameter_count() const;
};

GeneratorParams build_generator(const GeneratorArchitecture& arch, uint64_t seed);

// Image-variant generator: an MLP whose final layer emits count*channels*k*k
// values reshaped to [count x channels x k x k] kernels. The output width is
// bounded because a generator emitting full-image-sized weights would need an
// impractically large final layer.
GeneratorParams build_image_generator(int64_t count, int64_t channels, int64_t kernel_size,
                                      uint64_t seed, int64_t noise_dim = 100, int layer_index = 1,
                                      int64_t max_outputs = 100000);

// Push-forward of the noise batch through the generator. Train mode uses
// batch statistics in the batchnorms (noise batch >= 2) and advances running
// stats; eval mode uses running stats. Frozen generators never record
// gradients and never touch running stats.
Tensor generate_weights(GeneratorParams& gen, const Tensor& noise, Mode mode);

}  // namespace grff
