#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "grff/generator.hpp"
#include "grff/nn.hpp"

using namespace grff;

TEST_CASE("noise stream determinism and independence") {
  NoiseSpec spec{100, 77};
  NoiseStream a(spec, stream::kTrainNoise), b(spec, stream::kTrainNoise);
  auto na = a.sample(8), nb = b.sample(8);
  CHECK(std::memcmp(na.data(), nb.data(), sizeof(double) * na.numel()) == 0);

  // advancing the stream yields disjoint draws
  auto nc = a.sample(8);
  CHECK(std::memcmp(nc.data(), na.data(), sizeof(double) * na.numel()) != 0);
  std::set<double> first(na.data(), na.data() + na.numel());
  for (int64_t i = 0; i < nc.numel(); ++i) CHECK(first.count(nc.data()[i]) == 0);

  // different purposes are separated
  NoiseStream c(spec, stream::kEvalNoise);
  auto nd = c.sample(8);
  CHECK(std::memcmp(nd.data(), na.data(), sizeof(double) * na.numel()) != 0);
}

TEST_CASE("noise stream matches N(0,1) moments") {
  NoiseSpec spec{100, 5};
  NoiseStream s(spec, stream::kTrainNoise);
  auto n = s.sample(10000);
  for (int64_t j = 0; j < 4; ++j) {  // a few coordinates
    double mean = 0, var = 0;
    for (int64_t i = 0; i < 10000; ++i) mean += n.at({i, j});
    mean /= 10000.0;
    for (int64_t i = 0; i < 10000; ++i) var += (n.at({i, j}) - mean) * (n.at({i, j}) - mean);
    var /= 10000.0;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.05);
  }
}

TEST_CASE("build_generator structure for the reference architecture") {
  auto arch = default_generator_arch(1, 100, 8, HiddenActivation::LeakyRelu);
  CHECK(arch.widths == std::vector<int64_t>{100, 128, 64, 64, 8});
  auto gen = build_generator(arch, 42);
  CHECK(gen.linears.size() == 4);
  CHECK(gen.bns.size() == 3);  // no batchnorm in the final block
  CHECK_FALSE(gen.frozen);

  // parameter count: linears + batchnorm affine pairs for hidden blocks
  int64_t expected = 0;
  for (size_t i = 0; i + 1 < arch.widths.size(); ++i)
    expected += arch.widths[i] * arch.widths[i + 1] + arch.widths[i + 1];
  for (size_t i = 0; i + 2 < arch.widths.size(); ++i) expected += 2 * arch.widths[i + 1];
  CHECK(gen.parameter_count() == expected);
}

TEST_CASE("build_generator is seed-deterministic") {
  auto arch = default_generator_arch(1, 100, 4, HiddenActivation::LeakyRelu);
  auto g1 = build_generator(arch, 9), g2 = build_generator(arch, 9);
  CHECK(std::memcmp(g1.linears[0].weight.value.data(), g2.linears[0].weight.value.data(),
                    sizeof(double) * g1.linears[0].weight.value.numel()) == 0);
  auto g3 = build_generator(arch, 10);
  CHECK(std::memcmp(g1.linears[0].weight.value.data(), g3.linears[0].weight.value.data(),
                    sizeof(double) * g1.linears[0].weight.value.numel()) != 0);
}

TEST_CASE("build_generator rejects malformed widths") {
  GeneratorArchitecture arch;
  arch.widths = {100};
  CHECK_THROWS_AS(build_generator(arch, 1), ConfigError);
}

TEST_CASE("generated weights live strictly inside (-1, 1)") {
  auto gen = build_generator(default_generator_arch(1, 20, 6, HiddenActivation::LeakyRelu), 3);
  NoiseSpec spec{20, 8};
  NoiseStream s(spec, stream::kTrainNoise);
  auto w = generate_weights(gen, s.sample(64), Mode::Train);
  CHECK(w.shape() == Shape{64, 6});
  for (int64_t i = 0; i < w.numel(); ++i) {
    CHECK(w.data()[i] > -1.0);
    CHECK(w.data()[i] < 1.0);
  }
}

TEST_CASE("eval mode weights are reproducible, fresh noise is not") {
  auto gen = build_generator(default_generator_arch(1, 10, 3, HiddenActivation::LeakyRelu), 3);
  NoiseSpec spec{10, 12};
  NoiseStream s(spec, stream::kTrainNoise);
  auto noise = s.sample(16);
  auto w1 = generate_weights(gen, noise, Mode::Eval);
  auto w2 = generate_weights(gen, noise, Mode::Eval);
  CHECK(std::memcmp(w1.data(), w2.data(), sizeof(double) * w1.numel()) == 0);

  auto w3 = generate_weights(gen, s.sample(16), Mode::Eval);
  CHECK(std::memcmp(w1.data(), w3.data(), sizeof(double) * w1.numel()) != 0);
}

TEST_CASE("train mode rejects degenerate noise batches") {
  auto gen = build_generator(default_generator_arch(1, 10, 3, HiddenActivation::LeakyRelu), 3);
  NoiseSpec spec{10, 12};
  NoiseStream s(spec, stream::kTrainNoise);
  CHECK_THROWS_AS(generate_weights(gen, s.sample(1), Mode::Train), ContractError);
  CHECK_NOTHROW(generate_weights(gen, s.sample(1), Mode::Eval));
}

TEST_CASE("generator batchnorm normalizes over the noise batch") {
  // with gamma=1, beta=0, the pre-activation after batchnorm has zero mean
  // and unit variance over the D sampled noises
  auto gen = build_generator(default_generator_arch(1, 10, 3, HiddenActivation::LeakyRelu), 3);
  NoiseSpec spec{10, 12};
  NoiseStream s(spec, stream::kTrainNoise);
  auto noise = s.sample(128);
  auto h = linear(noise, gen.linears[0].weight.value, gen.linears[0].bias.value);
  auto& bn = gen.bns[0];
  auto y = batchnorm(h, bn.gamma.value, bn.beta.value, bn.running_mean, bn.running_var,
                     Mode::Train, false);
  for (int64_t j = 0; j < 3; ++j) {
    double mean = 0;
    for (int64_t i = 0; i < 128; ++i) mean += y.at({i, j});
    CHECK(std::abs(mean / 128.0) < 1e-10);
  }
}

TEST_CASE("frozen generators are bit-stable through training-mode passes") {
  auto gen = build_generator(default_generator_arch(2, 10, 4, HiddenActivation::LeakyRelu), 5);
  gen.frozen = true;
  std::vector<std::vector<double>> before;
  for (auto* p : gen.parameters())
    before.emplace_back(p->value.data(), p->value.data() + p->value.numel());
  auto rm = gen.bns[0].running_mean, rv = gen.bns[0].running_var;

  NoiseSpec spec{10, 2};
  NoiseStream s(spec, stream::kTrainNoise);
  for (int it = 0; it < 3; ++it) {
    auto w = generate_weights(gen, s.sample(32), Mode::Train);
    CHECK_FALSE(w.requires_grad());  // no graph is recorded for frozen generators
  }
  auto ps = gen.parameters();
  for (size_t i = 0; i < ps.size(); ++i)
    CHECK(std::memcmp(ps[i]->value.data(), before[i].data(),
                      sizeof(double) * before[i].size()) == 0);
  CHECK(gen.bns[0].running_mean == rm);
  CHECK(gen.bns[0].running_var == rv);
}

TEST_CASE("image generator emits reshaped kernel stacks") {
  auto gen = build_image_generator(16, 1, 5, 7);
  CHECK(gen.arch.activation == HiddenActivation::Relu);
  NoiseSpec spec{100, 3};
  NoiseStream s(spec, stream::kTrainNoise);
  auto w = generate_weights(gen, s.sample(16), Mode::Train);
  // 16x1x5x5 stack: 400 generated values for the 16-noise batch
  CHECK(w.shape() == Shape{16, 1, 5, 5});
  CHECK(w.numel() == 400);

  auto gen2 = build_image_generator(8, 32, 5, 7, 100, 2);
  auto w2 = generate_weights(gen2, s.sample(8), Mode::Train);
  CHECK(w2.shape() == Shape{8, 32, 5, 5});
  CHECK(w2.numel() == 6400);

  // flatten -> reshape round trip preserves values
  auto flat = reshape(w, {16, 400});
  auto back = reshape(flat, {16, 1, 5, 5});
  CHECK(std::memcmp(back.data(), w.data(), sizeof(double) * w.numel()) == 0);
}

TEST_CASE("image generator enforces the output budget") {
  CHECK_THROWS_AS(build_image_generator(512, 512, 3, 1), ConfigError);
}
