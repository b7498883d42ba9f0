#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "grff/common.hpp"

namespace grff {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

namespace detail {

// One node of the recorded computation. `backprop`, when set, reads this
// node's grad and accumulates into the parents' grads; the reverse sweep in
// backward() visits each node exactly once, after all of its consumers.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // persistent for leaves, transient for op nodes
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void()> backprop;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool is_leaf() const { return !backprop; }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Disables graph recording for its scope (inference, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Dense row-major 64-bit tensor with reverse-mode autodiff. Value-like
// handle: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, double v);
  static Tensor from_data(Shape s, std::vector<double> d);
  static Tensor scalar(double v);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t ndim() const { return static_cast<int64_t>(shape().size()); }
  int64_t dim(int64_t i) const { return shape()[static_cast<size_t>(i)]; }
  int64_t numel() const;

  double* data();
  const double* data() const;
  std::span<const double> values() const { return {data(), static_cast<size_t>(numel())}; }
  double item() const;  // numel()==1 only
  double at(std::initializer_list<int64_t> idx) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);  // leaves only
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;  // ContractError when absent
  std::vector<double>& grad_buffer();
  void zero_grad();

  Tensor detach() const;  // copies data into a fresh leaf
  Tensor clone() const { return detach(); }

  std::shared_ptr<detail::TensorImpl> impl_;

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_op_result(Shape shape, std::vector<double> data,
                               std::vector<Tensor> parents, std::function<void()>* out_hook);
  friend class TensorFactory;
};

// Internal factory used by op implementations.
class TensorFactory {
 public:
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(std::move(impl)); }
};

// Runs one reverse sweep from a scalar loss. Leaf grads accumulate across
// calls until zero_grad().
void backward(const Tensor& loss);

// --- primitive ops ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T, [m x k] * [n x k] -> [m x n]

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor cos(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);

Tensor reshape(const Tensor& x, Shape target);
Tensor concat(const Tensor& a, const Tensor& b, int64_t axis);
Tensor add_rowvec(const Tensor& x, const Tensor& row);  // [B x F] + [F]
Tensor sum(const Tensor& x);                            // scalar

bool all_finite(const Tensor& x);

}  // namespace grff
