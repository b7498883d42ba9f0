#pragma once

#include <functional>
#include <span>

#include "grff/tensor.hpp"

namespace grff {

// A trainable leaf tensor together with its Adam state.
struct Parameter {
  Tensor value;
  std::vector<double> m, v;  // first/second moment buffers
  int64_t step = 0;

  Parameter() = default;
  explicit Parameter(Tensor t) : value(std::move(t)) {
    value.set_requires_grad(true);
    m.assign(static_cast<size_t>(value.numel()), 0.0);
    v.assign(static_cast<size_t>(value.numel()), 0.0);
  }

  void zero_grad() { value.zero_grad(); }
};

// Bias-corrected Adam update over the given parameters.
void adam_step(std::span<Parameter* const> params, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Compares reverse-mode gradients of f() against central finite differences
// over every coordinate of every parameter. Returns the maximum error scaled
// by max(1, |g_ad|, |g_fd|). f must be deterministic.
double gradcheck(const std::function<Tensor()>& f, std::span<Parameter* const> params,
                 double h = 1e-5);

}  // namespace grff
