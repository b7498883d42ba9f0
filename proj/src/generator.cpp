#include "grff/generator.hpp"

#include <cmath>

#include "grff/nn.hpp"

namespace grff {

Tensor NoiseStream::sample(int64_t count) {
  if (count < 1) throw ContractError("NoiseStream::sample: count must be >= 1");
  std::vector<double> d(static_cast<size_t>(count * dim_));
  rng_.fill_normal(d);
  return Tensor::from_data({count, dim_}, std::move(d));
}

Tensor sample_noise(NoiseStream& stream, int64_t count) { return stream.sample(count); }

GeneratorArchitecture default_generator_arch(int layer_index, int64_t noise_dim, int64_t out_dim,
                                             HiddenActivation activation) {
  GeneratorArchitecture arch;
  if (layer_index <= 1)
    arch.widths = {noise_dim, 128, 64, 64, out_dim};
  else
    arch.widths = {noise_dim, 512, 256, 256, out_dim};
  arch.activation = activation;
  arch.out_shape = {out_dim};
  return arch;
}

std::vector<Parameter*> GeneratorParams::parameters() {
  std::vector<Parameter*> ps;
  for (size_t i = 0; i < linears.size(); ++i) {
    ps.push_back(&linears[i].weight);
    ps.push_back(&linears[i].bias);
    if (i < bns.size()) {
      ps.push_back(&bns[i].gamma);
      ps.push_back(&bns[i].beta);
    }
  }
  return ps;
}

int64_t GeneratorParams::parameter_count() const {
  int64_t n = 0;
  for (const auto& l : linears) n += l.weight.value.numel() + l.bias.value.numel();
  for (const auto& b : bns) n += b.gamma.value.numel() + b.beta.value.numel();
  return n;
}

GeneratorParams build_generator(const GeneratorArchitecture& arch, uint64_t seed) {
  if (arch.widths.size() < 2)
    throw ConfigError("build_generator: need at least [in, out] widths, got " +
                      std::to_string(arch.widths.size()));
  if (!arch.out_shape.empty() && shape_numel(arch.out_shape) != arch.widths.back())
    throw ConfigError("build_generator: out_shape product " +
                      std::to_string(shape_numel(arch.out_shape)) + " != final width " +
                      std::to_string(arch.widths.back()));
  GeneratorParams gen;
  gen.arch = arch;
  if (gen.arch.out_shape.empty()) gen.arch.out_shape = {arch.widths.back()};

  Rng rng = Rng(seed).child(stream::kParamInit);
  const size_t blocks = arch.widths.size() - 1;
  for (size_t i = 0; i < blocks; ++i) {
    const int64_t fan_in = arch.widths[i], fan_out = arch.widths[i + 1];
    std::vector<double> w(static_cast<size_t>(fan_in * fan_out));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : w) v = rng.uniform(-bound, bound);
    LinearLayer layer{Parameter(Tensor::from_data({fan_in, fan_out}, std::move(w))),
                      Parameter(Tensor::zeros({fan_out}))};
    gen.linears.push_back(std::move(layer));
    if (i + 1 < blocks) {
      BatchNormLayer bn{Parameter(Tensor::full({fan_out}, 1.0)), Parameter(Tensor::zeros({fan_out})),
                        std::vector<double>(static_cast<size_t>(fan_out), 0.0),
                        std::vector<double>(static_cast<size_t>(fan_out), 1.0)};
      gen.bns.push_back(std::move(bn));
    }
  }
  return gen;
}

GeneratorParams build_image_generator(int64_t count, int64_t channels, int64_t kernel_size,
                                      uint64_t seed, int64_t noise_dim, int layer_index,
                                      int64_t max_outputs) {
  const int64_t total = count * channels * kernel_size * kernel_size;
  if (total > max_outputs)
    throw ConfigError("build_image_generator: a batch of " + std::to_string(count) +
                      " kernels would mean " + std::to_string(total) + " generated values (limit " +
                      std::to_string(max_outputs) +
                      "); emitting weights of this size from a generator output layer is "
                      "impractical, use smaller or fewer kernels");
  GeneratorArchitecture arch = default_generator_arch(
      layer_index, noise_dim, channels * kernel_size * kernel_size, HiddenActivation::Relu);
  arch.out_shape = {channels, kernel_size, kernel_size};
  return build_generator(arch, seed);
}

Tensor generate_weights(GeneratorParams& gen, const Tensor& noise, Mode mode) {
  if (noise.ndim() != 2 || noise.dim(1) != gen.arch.widths.front())
    throw ShapeError("generate_weights: noise " + shape_str(noise.shape()) +
                     " does not match noise_dim " + std::to_string(gen.arch.widths.front()));
  if (mode == Mode::Train && noise.dim(0) < 2)
    throw ContractError("generate_weights: degenerate noise batch of size " +
                        std::to_string(noise.dim(0)) + " in train mode (batchnorm needs >= 2)");

  std::optional<NoGradGuard> guard;
  if (gen.frozen) guard.emplace();
  const bool update_running = mode == Mode::Train && !gen.frozen;

  Tensor h = noise;
  const size_t blocks = gen.linears.size();
  for (size_t i = 0; i < blocks; ++i) {
    h = linear(h, gen.linears[i].weight.value, gen.linears[i].bias.value);
    if (i + 1 < blocks) {
      auto& bn = gen.bns[i];
      h = batchnorm(h, bn.gamma.value, bn.beta.value, bn.running_mean, bn.running_var, mode,
                    update_running);
      h = gen.arch.activation == HiddenActivation::LeakyRelu
              ? leaky_relu(h, gen.arch.leaky_slope)
              : relu(h);
    } else {
      h = tanh(h);
    }
  }
  if (gen.arch.out_shape.size() > 1) {
    Shape full{noise.dim(0)};
    full.insert(full.end(), gen.arch.out_shape.begin(), gen.arch.out_shape.end());
    h = reshape(h, std::move(full));
  }
  return h;
}

}  // namespace grff
