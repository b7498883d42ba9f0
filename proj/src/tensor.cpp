#include "grff/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace grff {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(s));
    n *= e;
  }
  return n;
}

namespace {
thread_local int g_no_grad_depth = 0;

std::shared_ptr<detail::TensorImpl> make_impl(Shape s, std::vector<double> d) {
  if (shape_numel(s) != static_cast<int64_t>(d.size()))
    throw ShapeError("tensor data length " + std::to_string(d.size()) +
                     " does not match shape " + shape_str(s));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(s);
  impl->data = std::move(d);
  return impl;
}
}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor Tensor::zeros(Shape s) {
  auto n = shape_numel(s);
  return TensorFactory::wrap(make_impl(std::move(s), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape s, double v) {
  auto n = shape_numel(s);
  return TensorFactory::wrap(make_impl(std::move(s), std::vector<double>(n, v)));
}

Tensor Tensor::from_data(Shape s, std::vector<double> d) {
  return TensorFactory::wrap(make_impl(std::move(s), std::move(d)));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

int64_t Tensor::numel() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->numel();
}

double* Tensor::data() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data.data();
}

const double* Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data.data();
}

double Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item() requires a scalar tensor, got shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size())
    throw ShapeError("index rank " + std::to_string(idx.size()) + " vs shape " + shape_str(s));
  int64_t off = 0;
  size_t k = 0;
  for (int64_t i : idx) {
    off = off * s[k] + i;
    ++k;
  }
  return impl_->data[static_cast<size_t>(off)];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
  if (!impl_) throw ContractError("use of undefined tensor");
  if (!impl_->is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = v;
  if (v)
    impl_->ensure_grad();
  else
    impl_->grad.clear();
  return *this;
}

bool Tensor::is_leaf() const { return impl_ && impl_->is_leaf(); }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return {impl_->grad.data(), impl_->grad.size()};
}

std::vector<double>& Tensor::grad_buffer() {
  if (!impl_) throw ContractError("use of undefined tensor");
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return from_data(impl_->shape, impl_->data);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined loss");
  auto* root = loss.impl_.get();
  if (root->numel() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(root->shape));
  if (!root->requires_grad) return;  // nothing reachable wants gradients

  // Post-order DFS: producers end up before consumers.
  std::vector<detail::TensorImpl*> topo;
  std::unordered_set<detail::TensorImpl*> visited;
  struct Frame {
    detail::TensorImpl* node;
    size_t next;
  };
  std::vector<Frame> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      detail::TensorImpl* p = f.node->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  for (auto* n : topo) {
    if (n->is_leaf())
      n->ensure_grad();
    else
      n->grad.assign(n->data.size(), 0.0);
  }
  root->grad[0] += 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
}

// --- op helpers -----------------------------------------------------------

namespace {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

Tensor make_node(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                 const std::function<std::function<void()>(detail::TensorImpl*)>& make_backprop) {
  auto impl = make_impl(std::move(shape), std::move(data));
  impl->requires_grad = true;
  for (auto& p : parents) impl->parents.push_back(p.impl_);
  impl->backprop = make_backprop(impl.get());
  return TensorFactory::wrap(std::move(impl));
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

template <typename Fwd, typename Dfdx>
Tensor unary_op(const Tensor& x, Fwd f, Dfdx dfdx) {
  const size_t n = static_cast<size_t>(x.numel());
  std::vector<double> out(n);
  const double* xs = x.data();
  for (size_t i = 0; i < n; ++i) out[i] = f(xs[i]);
  if (!should_record({&x})) return Tensor::from_data(x.shape(), std::move(out));
  auto xi = x.impl_;
  return make_node(x.shape(), std::move(out), {x}, [xi, dfdx](detail::TensorImpl* self) {
    return [xi, dfdx, self]() {
      xi->ensure_grad();
      const size_t n = xi->data.size();
      for (size_t i = 0; i < n; ++i)
        xi->grad[i] += self->grad[i] * dfdx(xi->data[i], self->data[i]);
    };
  });
}

}  // namespace

// --- arithmetic -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n));
  MapM(out.data(), m, n).noalias() = CMapM(a.data(), m, k) * CMapM(b.data(), k, n);
  if (!should_record({&a, &b})) return Tensor::from_data({m, n}, std::move(out));
  auto ai = a.impl_, bi = b.impl_;
  return make_node({m, n}, std::move(out), {a, b}, [=](detail::TensorImpl* self) {
    return [=]() {
      CMapM dC(self->grad.data(), m, n);
      if (ai->requires_grad) {
        ai->ensure_grad();
        MapM(ai->grad.data(), m, k).noalias() += dC * CMapM(bi->data.data(), k, n).transpose();
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        MapM(bi->grad.data(), k, n).noalias() += CMapM(ai->data.data(), m, k).transpose() * dC;
      }
    };
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
    throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  std::vector<double> out(static_cast<size_t>(m * n));
  MapM(out.data(), m, n).noalias() =
      CMapM(a.data(), m, k) * CMapM(b.data(), n, k).transpose();
  if (!should_record({&a, &b})) return Tensor::from_data({m, n}, std::move(out));
  auto ai = a.impl_, bi = b.impl_;
  return make_node({m, n}, std::move(out), {a, b}, [=](detail::TensorImpl* self) {
    return [=]() {
      CMapM dC(self->grad.data(), m, n);
      if (ai->requires_grad) {
        ai->ensure_grad();
        MapM(ai->grad.data(), m, k).noalias() += dC * CMapM(bi->data.data(), n, k);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        MapM(bi->grad.data(), n, k).noalias() += dC.transpose() * CMapM(ai->data.data(), m, k);
      }
    };
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  const size_t n = static_cast<size_t>(a.numel());
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a.data()[i] + b.data()[i];
  if (!should_record({&a, &b})) return Tensor::from_data(a.shape(), std::move(out));
  auto ai = a.impl_, bi = b.impl_;
  return make_node(a.shape(), std::move(out), {a, b}, [=](detail::TensorImpl* self) {
    return [=]() {
      const size_t n = self->data.size();
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (size_t i = 0; i < n; ++i) ai->grad[i] += self->grad[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (size_t i = 0; i < n; ++i) bi->grad[i] += self->grad[i];
      }
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  const size_t n = static_cast<size_t>(a.numel());
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a.data()[i] - b.data()[i];
  if (!should_record({&a, &b})) return Tensor::from_data(a.shape(), std::move(out));
  auto ai = a.impl_, bi = b.impl_;
  return make_node(a.shape(), std::move(out), {a, b}, [=](detail::TensorImpl* self) {
    return [=]() {
      const size_t n = self->data.size();
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (size_t i = 0; i < n; ++i) ai->grad[i] += self->grad[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (size_t i = 0; i < n; ++i) bi->grad[i] -= self->grad[i];
      }
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  const size_t n = static_cast<size_t>(a.numel());
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a.data()[i] * b.data()[i];
  if (!should_record({&a, &b})) return Tensor::from_data(a.shape(), std::move(out));
  auto ai = a.impl_, bi = b.impl_;
  return make_node(a.shape(), std::move(out), {a, b}, [=](detail::TensorImpl* self) {
    return [=]() {
      const size_t n = self->data.size();
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (size_t i = 0; i < n; ++i) ai->grad[i] += self->grad[i] * bi->data[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (size_t i = 0; i < n; ++i) bi->grad[i] += self->grad[i] * ai->data[i];
      }
    };
  });
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      a, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor cos(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

Tensor sin(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary_op(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor reshape(const Tensor& x, Shape target) {
  if (shape_numel(target) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(target));
  std::vector<double> out(x.data(), x.data() + x.numel());
  if (!should_record({&x})) return Tensor::from_data(std::move(target), std::move(out));
  auto xi = x.impl_;
  return make_node(std::move(target), std::move(out), {x}, [xi](detail::TensorImpl* self) {
    return [xi, self]() {
      xi->ensure_grad();
      for (size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += self->grad[i];
    };
  });
}

Tensor concat(const Tensor& a, const Tensor& b, int64_t axis) {
  const Shape &sa = a.shape(), &sb = b.shape();
  if (sa.size() != sb.size() || axis < 0 || axis >= static_cast<int64_t>(sa.size()))
    throw ShapeError("concat: rank mismatch " + shape_str(sa) + " vs " + shape_str(sb));
  for (size_t i = 0; i < sa.size(); ++i)
    if (static_cast<int64_t>(i) != axis && sa[i] != sb[i])
      throw ShapeError("concat: shapes differ off axis " + std::to_string(axis) + ": " +
                       shape_str(sa) + " vs " + shape_str(sb));
  Shape so = sa;
  so[static_cast<size_t>(axis)] += sb[static_cast<size_t>(axis)];

  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= sa[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < sa.size(); ++i) inner *= sa[i];
  const int64_t wa = sa[static_cast<size_t>(axis)] * inner;
  const int64_t wb = sb[static_cast<size_t>(axis)] * inner;

  std::vector<double> out(static_cast<size_t>(outer * (wa + wb)));
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(a.data() + o * wa, wa, out.data() + o * (wa + wb));
    std::copy_n(b.data() + o * wb, wb, out.data() + o * (wa + wb) + wa);
  }
  if (!should_record({&a, &b})) return Tensor::from_data(std::move(so), std::move(out));
  auto ai = a.impl_, bi = b.impl_;
  return make_node(std::move(so), std::move(out), {a, b}, [=](detail::TensorImpl* self) {
    return [=]() {
      for (int64_t o = 0; o < outer; ++o) {
        const double* g = self->grad.data() + o * (wa + wb);
        if (ai->requires_grad) {
          ai->ensure_grad();
          for (int64_t i = 0; i < wa; ++i) ai->grad[static_cast<size_t>(o * wa + i)] += g[i];
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          for (int64_t i = 0; i < wb; ++i) bi->grad[static_cast<size_t>(o * wb + i)] += g[wa + i];
        }
      }
    };
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& row) {
  if (x.ndim() != 2 || row.ndim() != 1 || x.dim(1) != row.dim(0))
    throw ShapeError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(row.shape()));
  const int64_t b = x.dim(0), f = x.dim(1);
  std::vector<double> out(static_cast<size_t>(b * f));
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < f; ++j)
      out[static_cast<size_t>(i * f + j)] = x.data()[i * f + j] + row.data()[j];
  if (!should_record({&x, &row})) return Tensor::from_data(x.shape(), std::move(out));
  auto xi = x.impl_, ri = row.impl_;
  return make_node(x.shape(), std::move(out), {x, row}, [=](detail::TensorImpl* self) {
    return [=]() {
      if (xi->requires_grad) {
        xi->ensure_grad();
        for (size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += self->grad[i];
      }
      if (ri->requires_grad) {
        ri->ensure_grad();
        for (int64_t i = 0; i < b; ++i)
          for (int64_t j = 0; j < f; ++j)
            ri->grad[static_cast<size_t>(j)] += self->grad[static_cast<size_t>(i * f + j)];
      }
    };
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  if (!should_record({&x})) return Tensor::scalar(s);
  auto xi = x.impl_;
  return make_node({1}, {s}, {x}, [xi](detail::TensorImpl* self) {
    return [xi, self]() {
      xi->ensure_grad();
      const double g = self->grad[0];
      for (double& v : xi->grad) v += g;
    };
  });
}

bool all_finite(const Tensor& x) {
  for (int64_t i = 0; i < x.numel(); ++i)
    if (!std::isfinite(x.data()[i])) return false;
  return true;
}

}  // namespace grff
