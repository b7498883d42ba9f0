#include "grff/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace grff {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

namespace {

Tensor make_recorded(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                     const std::function<std::function<void()>(detail::TensorImpl*)>& mk) {
  auto out = Tensor::from_data(std::move(shape), std::move(data));
  out.impl_->requires_grad = true;
  for (auto& p : parents) out.impl_->parents.push_back(p.impl_);
  out.impl_->backprop = mk(out.impl_.get());
  return out;
}

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

}  // namespace

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean, std::vector<double>& running_var, Mode mode,
                 bool update_running, double eps, double momentum) {
  if (x.ndim() != 2) throw ShapeError("batchnorm: expected [B x F], got " + shape_str(x.shape()));
  const int64_t b = x.dim(0), f = x.dim(1);
  if (gamma.numel() != f || beta.numel() != f)
    throw ShapeError("batchnorm: gamma/beta length must be " + std::to_string(f));
  if (static_cast<int64_t>(running_mean.size()) != f ||
      static_cast<int64_t>(running_var.size()) != f)
    throw ContractError("batchnorm: running stats length must be " + std::to_string(f));
  if (mode == Mode::Train && b < 2)
    throw ContractError("batchnorm: degenerate batch of size " + std::to_string(b) +
                        " in train mode (need >= 2)");

  std::vector<double> mean(static_cast<size_t>(f)), inv_std(static_cast<size_t>(f));
  if (mode == Mode::Train) {
    for (int64_t j = 0; j < f; ++j) {
      double m = 0.0;
      for (int64_t i = 0; i < b; ++i) m += x.data()[i * f + j];
      m /= static_cast<double>(b);
      double v = 0.0;
      for (int64_t i = 0; i < b; ++i) {
        const double d = x.data()[i * f + j] - m;
        v += d * d;
      }
      v /= static_cast<double>(b);
      mean[static_cast<size_t>(j)] = m;
      inv_std[static_cast<size_t>(j)] = 1.0 / std::sqrt(v + eps);
      if (update_running) {
        running_mean[static_cast<size_t>(j)] = (1.0 - momentum) * running_mean[static_cast<size_t>(j)] + momentum * m;
        running_var[static_cast<size_t>(j)] = (1.0 - momentum) * running_var[static_cast<size_t>(j)] + momentum * v;
      }
    }
  } else {
    for (int64_t j = 0; j < f; ++j) {
      mean[static_cast<size_t>(j)] = running_mean[static_cast<size_t>(j)];
      inv_std[static_cast<size_t>(j)] = 1.0 / std::sqrt(running_var[static_cast<size_t>(j)] + eps);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(b * f));
  std::vector<double> out(static_cast<size_t>(b * f));
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < f; ++j) {
      const double h = (x.data()[i * f + j] - mean[static_cast<size_t>(j)]) * inv_std[static_cast<size_t>(j)];
      (*xhat)[static_cast<size_t>(i * f + j)] = h;
      out[static_cast<size_t>(i * f + j)] = gamma.data()[j] * h + beta.data()[j];
    }

  if (!recording({&x, &gamma, &beta})) return Tensor::from_data(x.shape(), std::move(out));

  auto xi = x.impl_, gi = gamma.impl_, bi = beta.impl_;
  const bool train = mode == Mode::Train;
  auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
  return make_recorded(x.shape(), std::move(out), {x, gamma, beta}, [=](detail::TensorImpl* self) {
    return [=]() {
      const double* dy = self->grad.data();
      if (gi->requires_grad) {
        gi->ensure_grad();
        for (int64_t j = 0; j < f; ++j) {
          double s = 0.0;
          for (int64_t i = 0; i < b; ++i) s += dy[i * f + j] * (*xhat)[static_cast<size_t>(i * f + j)];
          gi->grad[static_cast<size_t>(j)] += s;
        }
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (int64_t j = 0; j < f; ++j) {
          double s = 0.0;
          for (int64_t i = 0; i < b; ++i) s += dy[i * f + j];
          bi->grad[static_cast<size_t>(j)] += s;
        }
      }
      if (xi->requires_grad) {
        xi->ensure_grad();
        for (int64_t j = 0; j < f; ++j) {
          const double g = gi->data[static_cast<size_t>(j)];
          const double is = (*istd)[static_cast<size_t>(j)];
          if (train) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (int64_t i = 0; i < b; ++i) {
              const double dh = dy[i * f + j] * g;
              sum_dh += dh;
              sum_dh_h += dh * (*xhat)[static_cast<size_t>(i * f + j)];
            }
            const double inv_b = 1.0 / static_cast<double>(b);
            for (int64_t i = 0; i < b; ++i) {
              const double dh = dy[i * f + j] * g;
              xi->grad[static_cast<size_t>(i * f + j)] +=
                  is * (dh - inv_b * sum_dh -
                        (*xhat)[static_cast<size_t>(i * f + j)] * inv_b * sum_dh_h);
            }
          } else {
            for (int64_t i = 0; i < b; ++i)
              xi->grad[static_cast<size_t>(i * f + j)] += dy[i * f + j] * g * is;
          }
        }
      }
    };
  });
}

Tensor conv2d_valid(const Tensor& x, const Tensor& kernels) {
  if (x.ndim() != 4 || kernels.ndim() != 4)
    throw ShapeError("conv2d_valid: expected [B x C x H x W] and [K x C x kh x kw], got " +
                     shape_str(x.shape()) + " and " + shape_str(kernels.shape()));
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t k = kernels.dim(0), kc = kernels.dim(1), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kc != c)
    throw ShapeError("conv2d_valid: channel mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(kernels.shape()));
  if (h < kh || w < kw)
    throw ShapeError("conv2d_valid: image " + shape_str(x.shape()) + " smaller than kernel " +
                     shape_str(kernels.shape()));
  const int64_t oh = h - kh + 1, ow = w - kw + 1;
  const int64_t patch = c * kh * kw, rows = b * oh * ow;

  // im2col, then one GEMM against the flattened kernels
  auto col = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * patch));
  {
    double* cp = col->data();
    for (int64_t ib = 0; ib < b; ++ib)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          for (int64_t ic = 0; ic < c; ++ic) {
            const double* src = x.data() + ((ib * c + ic) * h + i) * w + j;
            for (int64_t di = 0; di < kh; ++di) {
              std::copy_n(src + di * w, kw, cp);
              cp += kw;
            }
          }
        }
  }

  std::vector<double> out_mat(static_cast<size_t>(rows * k));
  MapM(out_mat.data(), rows, k).noalias() =
      CMapM(col->data(), rows, patch) * CMapM(kernels.data(), k, patch).transpose();

  // [rows x K] -> [B x K x oh x ow]
  std::vector<double> out(static_cast<size_t>(b * k * oh * ow));
  for (int64_t ib = 0; ib < b; ++ib)
    for (int64_t o = 0; o < oh * ow; ++o)
      for (int64_t ik = 0; ik < k; ++ik)
        out[static_cast<size_t>(((ib * k + ik) * oh * ow) + o)] =
            out_mat[static_cast<size_t>((ib * oh * ow + o) * k + ik)];

  if (!recording({&x, &kernels}))
    return Tensor::from_data({b, k, oh, ow}, std::move(out));

  auto xi = x.impl_, ki = kernels.impl_;
  return make_recorded({b, k, oh, ow}, std::move(out), {x, kernels}, [=](detail::TensorImpl* self) {
    return [=]() {
      // regroup output grad as [rows x K]
      std::vector<double> dmat(static_cast<size_t>(rows * k));
      for (int64_t ib = 0; ib < b; ++ib)
        for (int64_t o = 0; o < oh * ow; ++o)
          for (int64_t ik = 0; ik < k; ++ik)
            dmat[static_cast<size_t>((ib * oh * ow + o) * k + ik)] =
                self->grad[static_cast<size_t>(((ib * k + ik) * oh * ow) + o)];
      if (ki->requires_grad) {
        ki->ensure_grad();
        MapM(ki->grad.data(), k, patch).noalias() +=
            CMapM(dmat.data(), rows, k).transpose() * CMapM(col->data(), rows, patch);
      }
      if (xi->requires_grad) {
        xi->ensure_grad();
        std::vector<double> dcol(static_cast<size_t>(rows * patch));
        MapM(dcol.data(), rows, patch).noalias() =
            CMapM(dmat.data(), rows, k) * CMapM(ki->data.data(), k, patch);
        // col2im scatter-add
        const double* cp = dcol.data();
        for (int64_t ib = 0; ib < b; ++ib)
          for (int64_t i = 0; i < oh; ++i)
            for (int64_t j = 0; j < ow; ++j)
              for (int64_t ic = 0; ic < c; ++ic) {
                double* dst = xi->grad.data() + ((ib * c + ic) * h + i) * w + j;
                for (int64_t di = 0; di < kh; ++di) {
                  for (int64_t dj = 0; dj < kw; ++dj) dst[di * w + dj] += cp[dj];
                  cp += kw;
                }
              }
      }
    };
  });
}

Tensor maxpool2(const Tensor& x) {
  if (x.ndim() != 4)
    throw ShapeError("maxpool2: expected [B x C x H x W], got " + shape_str(x.shape()));
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError("maxpool2: odd spatial extent in " + shape_str(x.shape()));
  const int64_t oh = h / 2, ow = w / 2;
  std::vector<double> out(static_cast<size_t>(b * c * oh * ow));
  auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
  for (int64_t bc = 0; bc < b * c; ++bc) {
    const double* plane = x.data() + bc * h * w;
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        int64_t best = (2 * i) * w + 2 * j;
        double bv = plane[best];
        for (int64_t di = 0; di < 2; ++di)
          for (int64_t dj = 0; dj < 2; ++dj) {
            const int64_t idx = (2 * i + di) * w + (2 * j + dj);
            if (plane[idx] > bv) {  // strict: first occurrence wins ties
              bv = plane[idx];
              best = idx;
            }
          }
        out[static_cast<size_t>(bc * oh * ow + i * ow + j)] = bv;
        (*argmax)[static_cast<size_t>(bc * oh * ow + i * ow + j)] = bc * h * w + best;
      }
  }
  if (!recording({&x})) return Tensor::from_data({b, c, oh, ow}, std::move(out));
  auto xi = x.impl_;
  return make_recorded({b, c, oh, ow}, std::move(out), {x}, [=](detail::TensorImpl* self) {
    return [=]() {
      xi->ensure_grad();
      for (size_t i = 0; i < self->grad.size(); ++i)
        xi->grad[static_cast<size_t>((*argmax)[i])] += self->grad[i];
    };
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int64_t> labels) {
  if (logits.ndim() != 2)
    throw ShapeError("softmax_cross_entropy: expected [B x C], got " + shape_str(logits.shape()));
  const int64_t b = logits.dim(0), c = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != b)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(b) + " rows");
  for (int64_t i = 0; i < b; ++i)
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= c)
      throw DataError("softmax_cross_entropy: label " + std::to_string(labels[static_cast<size_t>(i)]) +
                      " out of range [0, " + std::to_string(c) + ") at row " + std::to_string(i));

  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(b * c));
  double loss = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const double* row = logits.data() + i * c;
    double mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z);
    for (int64_t j = 0; j < c; ++j)
      (*probs)[static_cast<size_t>(i * c + j)] = std::exp(row[j] - mx) / z;
    loss -= row[labels[static_cast<size_t>(i)]] - mx - logz;
  }
  loss /= static_cast<double>(b);

  if (!recording({&logits})) return Tensor::scalar(loss);
  auto li = logits.impl_;
  std::vector<int64_t> lab(labels.begin(), labels.end());
  return make_recorded({1}, {loss}, {logits}, [=, lab = std::move(lab)](detail::TensorImpl* self) {
    return [=]() {
      li->ensure_grad();
      const double g = self->grad[0] / static_cast<double>(b);
      for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < c; ++j)
          li->grad[static_cast<size_t>(i * c + j)] +=
              g * ((*probs)[static_cast<size_t>(i * c + j)] -
                   (j == lab[static_cast<size_t>(i)] ? 1.0 : 0.0));
    };
  });
}

std::vector<double> softmax_rows(const Tensor& logits) {
  const int64_t b = logits.dim(0), c = logits.dim(1);
  std::vector<double> p(static_cast<size_t>(b * c));
  for (int64_t i = 0; i < b; ++i) {
    const double* row = logits.data() + i * c;
    double mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    for (int64_t j = 0; j < c; ++j) p[static_cast<size_t>(i * c + j)] = std::exp(row[j] - mx) / z;
  }
  return p;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_rowvec(matmul(x, weight), bias);
}

std::vector<int64_t> argmax_rows(const Tensor& logits) {
  const int64_t b = logits.dim(0), c = logits.dim(1);
  std::vector<int64_t> out(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    const double* row = logits.data() + i * c;
    int64_t best = 0;
    for (int64_t j = 1; j < c; ++j)
      if (row[j] > row[best]) best = j;
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

std::vector<int64_t> argmin_rows(const Tensor& logits) {
  const int64_t b = logits.dim(0), c = logits.dim(1);
  std::vector<int64_t> out(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    const double* row = logits.data() + i * c;
    int64_t best = 0;
    for (int64_t j = 1; j < c; ++j)
      if (row[j] < row[best]) best = j;
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

double accuracy(std::span<const int64_t> predictions, std::span<const int64_t> labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw ContractError("accuracy: size mismatch or empty input");
  size_t hit = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

}  // namespace grff
