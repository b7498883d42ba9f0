#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "grff/nn.hpp"
#include "grff/optim.hpp"
#include "grff/rng.hpp"

using namespace grff;

namespace {

Tensor random_tensor(Shape s, Rng& rng) {
  std::vector<double> d(static_cast<size_t>(shape_numel(s)));
  rng.fill_normal(d);
  return Tensor::from_data(std::move(s), std::move(d));
}

// independent oracle: direct quadruple loop over output positions
std::vector<double> conv_oracle(const Tensor& x, const Tensor& k) {
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t nk = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const int64_t oh = h - kh + 1, ow = w - kw + 1;
  std::vector<double> out(static_cast<size_t>(b * nk * oh * ow), 0.0);
  for (int64_t ib = 0; ib < b; ++ib)
    for (int64_t ik = 0; ik < nk; ++ik)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          double s = 0;
          for (int64_t ic = 0; ic < c; ++ic)
            for (int64_t di = 0; di < kh; ++di)
              for (int64_t dj = 0; dj < kw; ++dj)
                s += x.at({ib, ic, i + di, j + dj}) * k.at({ik, ic, di, dj});
          out[static_cast<size_t>(((ib * nk + ik) * oh + i) * ow + j)] = s;
        }
  return out;
}

// independent oracle: window scan
std::vector<double> pool_oracle(const Tensor& x) {
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<double> out;
  for (int64_t ib = 0; ib < b; ++ib)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t i = 0; i < h; i += 2)
        for (int64_t j = 0; j < w; j += 2) {
          double m = x.at({ib, ic, i, j});
          m = std::max(m, x.at({ib, ic, i, j + 1}));
          m = std::max(m, x.at({ib, ic, i + 1, j}));
          m = std::max(m, x.at({ib, ic, i + 1, j + 1}));
          out.push_back(m);
        }
  return out;
}

}  // namespace

TEST_CASE("batchnorm constant column maps to zero") {
  auto x = Tensor::full({4, 3}, 2.5);
  Parameter gamma(Tensor::full({3}, 1.0)), beta(Tensor::zeros({3}));
  std::vector<double> rm(3, 0.0), rv(3, 1.0);
  auto y = batchnorm(x, gamma.value, beta.value, rm, rv, Mode::Train);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(0.0));
}

TEST_CASE("batchnorm two-sample batch hand computation") {
  // per feature batch {0, 2}: mean 1, biased var 1, xhat = +-1/sqrt(1 + 1e-5)
  auto x = Tensor::from_data({2, 1}, {0.0, 2.0});
  Parameter gamma(Tensor::full({1}, 1.0)), beta(Tensor::zeros({1}));
  std::vector<double> rm(1, 0.0), rv(1, 1.0);
  auto y = batchnorm(x, gamma.value, beta.value, rm, rv, Mode::Train);
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(y.data()[0] == doctest::Approx(-expected).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(expected).epsilon(1e-12));
  // running stats advanced with momentum 0.1
  CHECK(rm[0] == doctest::Approx(0.1 * 1.0));
  CHECK(rv[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0));
}

TEST_CASE("batchnorm eval mode with unit running stats is near identity") {
  Rng rng(5);
  auto x = random_tensor({3, 4}, rng);
  Parameter gamma(Tensor::full({4}, 1.0)), beta(Tensor::zeros({4}));
  std::vector<double> rm(4, 0.0), rv(4, 1.0);
  auto y = batchnorm(x, gamma.value, beta.value, rm, rv, Mode::Eval);
  for (int64_t i = 0; i < y.numel(); ++i)
    CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));
}

TEST_CASE("batchnorm rejects degenerate train batch") {
  auto x = Tensor::zeros({1, 3});
  Parameter gamma(Tensor::full({3}, 1.0)), beta(Tensor::zeros({3}));
  std::vector<double> rm(3, 0.0), rv(3, 1.0);
  CHECK_THROWS_AS(batchnorm(x, gamma.value, beta.value, rm, rv, Mode::Train), ContractError);
}

TEST_CASE("conv2d delta kernel picks the center pixel") {
  Rng rng(17);
  auto x = random_tensor({1, 1, 5, 5}, rng);
  std::vector<double> kd(25, 0.0);
  kd[2 * 5 + 2] = 1.0;
  auto k = Tensor::from_data({1, 1, 5, 5}, std::move(kd));
  auto y = conv2d_valid(x, k);
  CHECK(y.numel() == 1);
  CHECK(y.item() == doctest::Approx(x.at({0, 0, 2, 2})));
}

TEST_CASE("conv2d all-ones counting") {
  auto x = Tensor::full({1, 1, 6, 6}, 1.0);
  auto k = Tensor::full({1, 1, 5, 5}, 1.0);
  auto y = conv2d_valid(x, k);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (int64_t i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(25.0));
}

TEST_CASE("conv2d matches quadruple-loop oracle") {
  Rng rng(99);
  auto x = random_tensor({2, 3, 8, 7}, rng);
  auto k = random_tensor({4, 3, 5, 5}, rng);
  auto y = conv2d_valid(x, k);
  auto expected = conv_oracle(x, k);
  CHECK(y.shape() == Shape{2, 4, 4, 3});
  double max_diff = 0;
  for (int64_t i = 0; i < y.numel(); ++i)
    max_diff = std::max(max_diff, std::abs(y.data()[i] - expected[static_cast<size_t>(i)]));
  CHECK(max_diff < 1e-10);
}

TEST_CASE("conv2d rejects undersized images") {
  CHECK_THROWS_AS(conv2d_valid(Tensor::zeros({1, 1, 4, 9}), Tensor::zeros({1, 1, 5, 5})),
                  ShapeError);
  CHECK_THROWS_AS(conv2d_valid(Tensor::zeros({1, 2, 9, 9}), Tensor::zeros({1, 1, 5, 5})),
                  ShapeError);
}

TEST_CASE("maxpool basics and tie rule") {
  auto y = maxpool2(Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4}));
  CHECK(y.item() == 4.0);

  Parameter p(Tensor::full({1, 1, 2, 2}, 7.0));
  auto out = maxpool2(p.value);
  CHECK(out.item() == 7.0);
  backward(sum(out));
  CHECK(p.value.grad()[0] == 1.0);  // top-left wins ties
  CHECK(p.value.grad()[1] == 0.0);
  CHECK(p.value.grad()[2] == 0.0);
  CHECK(p.value.grad()[3] == 0.0);

  CHECK_THROWS_AS(maxpool2(Tensor::zeros({1, 1, 3, 4})), ShapeError);
}

TEST_CASE("maxpool matches window-scan oracle") {
  Rng rng(31);
  auto x = random_tensor({2, 3, 4, 4}, rng);
  auto y = maxpool2(x);
  auto expected = pool_oracle(x);
  for (int64_t i = 0; i < y.numel(); ++i)
    CHECK(y.data()[i] == expected[static_cast<size_t>(i)]);
}

TEST_CASE("cross entropy on uniform logits is ln C") {
  auto logits = Tensor::zeros({3, 2});
  std::vector<int64_t> labels{0, 1, 0};
  auto loss = softmax_cross_entropy(logits, labels);
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy is overflow-stable") {
  auto logits = Tensor::from_data({1, 2}, {1000.0, -1000.0});
  std::vector<int64_t> labels{0};
  auto loss = softmax_cross_entropy(logits, labels);
  CHECK(std::isfinite(loss.item()));
  CHECK(loss.item() == doctest::Approx(0.0));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  auto logits = Tensor::zeros({2, 3});
  std::vector<int64_t> labels{0, 3};
  CHECK_THROWS_AS(softmax_cross_entropy(logits, labels), DataError);
}

TEST_CASE("cross entropy gradient matches finite differences") {
  Rng rng(8);
  Parameter logits(random_tensor({4, 3}, rng));
  std::vector<int64_t> labels{2, 0, 1, 1};
  auto f = [&] { return softmax_cross_entropy(logits.value, labels); };
  Parameter* ps[] = {&logits};
  CHECK(gradcheck(f, ps, 1e-5) < 1e-6);
}

TEST_CASE("argmax/argmin and accuracy helpers") {
  auto logits = Tensor::from_data({2, 3}, {0.1, 0.9, 0.0, 2.0, -1.0, 0.5});
  auto top = argmax_rows(logits);
  CHECK(top == std::vector<int64_t>{1, 0});
  auto bottom = argmin_rows(logits);
  CHECK(bottom == std::vector<int64_t>{2, 1});
  std::vector<int64_t> y{1, 1};
  CHECK(accuracy(top, y) == doctest::Approx(0.5));
}
