#include "grff/optim.hpp"

#include <cmath>

namespace grff {

void adam_step(std::span<Parameter* const> params, double lr, double beta1, double beta2,
               double eps) {
  for (Parameter* p : params) {
    if (!p->value.requires_grad() || !p->value.has_grad())
      throw ContractError("adam_step: parameter without gradient buffer");
    p->step += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(p->step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(p->step));
    double* theta = p->value.data();
    const std::span<const double> g = p->value.grad();
    for (size_t i = 0; i < g.size(); ++i) {
      p->m[i] = beta1 * p->m[i] + (1.0 - beta1) * g[i];
      p->v[i] = beta2 * p->v[i] + (1.0 - beta2) * g[i] * g[i];
      theta[i] -= lr * (p->m[i] / c1) / (std::sqrt(p->v[i] / c2) + eps);
    }
  }
}

double gradcheck(const std::function<Tensor()>& f, std::span<Parameter* const> params, double h) {
  for (Parameter* p : params) p->zero_grad();
  Tensor loss = f();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) {
    auto g = p->value.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  double max_err = 0.0;
  NoGradGuard guard;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    double* data = params[pi]->value.data();
    const int64_t n = params[pi]->value.numel();
    for (int64_t i = 0; i < n; ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = f().item();
      data[i] = orig - h;
      const double fm = f().item();
      data[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = analytic[pi][static_cast<size_t>(i)];
      const double err = std::abs(fd - ad) / std::max({1.0, std::abs(fd), std::abs(ad)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace grff
