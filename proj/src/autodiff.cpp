#include "ecgxai/autodiff.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Core>

#include "ecgxai/error.hpp"

namespace ecgxai::ad {

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::input(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw Error(ErrorKind::NonFinite, "input tensor");
  nodes_.push_back({std::move(value), {}, {}, nullptr, requires_grad, false});
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(Tensor value) {
  if (!value.all_finite()) throw Error(ErrorKind::NonFinite, "parameter tensor");
  nodes_.push_back({std::move(value), {}, {}, nullptr, true, true});
  return {this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  if (!value.all_finite()) throw Error(ErrorKind::NonFinite, "operation produced NaN or Inf");
  bool needs = false;
  for (auto p : parents) needs = needs || nodes_.at(p).requires_grad;
  nodes_.push_back({std::move(value), {}, std::move(parents), needs ? std::move(backward) : nullptr, needs, false});
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var output) {
  if (output.graph != this) throw Error(ErrorKind::ShapeMismatch, "output belongs to another graph");
  if (nodes_.at(output.id).value.size() != 1) {
    throw Error(ErrorKind::NotScalar, "backward needs a scalar output, got " +
                                          shape_string(nodes_[output.id].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[output.id].requires_grad) return;
  grad_buffer(output.id)->fill(1.0);
  for (std::size_t i = output.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

Tensor Graph::grad(Var v) const {
  const auto& n = nodes_.at(v.id);
  if (n.grad.size() == 0 && n.value.size() != 0) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Tensor* Graph::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Tensor(n.value.shape(), 0.0);
  return &n.grad;
}

namespace {

void same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw Error(ErrorKind::ShapeMismatch, "operands belong to different graphs");
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::ShapeMismatch,
                std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

template <class F, class D>
Var unary(Var a, F forward, D derivative) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return a.graph->record(std::move(y), {a.id}, [ai = a.id, derivative](Graph& g, std::size_t self) {
    Tensor* gx = g.grad_buffer(ai);
    if (!gx) return;
    const Tensor& gy = g.upstream(self);
    const Tensor& x = g.value(ai);
    const Tensor& y = g.value(self);
    for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * derivative(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  same_graph(a, b);
  same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  y += b.value();
  return a.graph->record(std::move(y), {a.id, b.id}, [ai = a.id, bi = b.id](Graph& g, std::size_t self) {
    const Tensor& gy = g.upstream(self);
    if (Tensor* ga = g.grad_buffer(ai)) *ga += gy;
    if (Tensor* gb = g.grad_buffer(bi)) *gb += gy;
  });
}

Var mul(Var a, Var b) {
  same_graph(a, b);
  same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return a.graph->record(std::move(y), {a.id, b.id}, [ai = a.id, bi = b.id](Graph& g, std::size_t self) {
    const Tensor& gy = g.upstream(self);
    const Tensor& av = g.value(ai);
    const Tensor& bv = g.value(bi);
    if (Tensor* ga = g.grad_buffer(ai)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bv[i];
    }
    if (Tensor* gb = g.grad_buffer(bi)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.graph->record(Tensor::scalar(s), {a.id}, [ai = a.id](Graph& g, std::size_t self) {
    Tensor* ga = g.grad_buffer(ai);
    if (!ga) return;
    const double gy = g.upstream(self)[0];
    for (auto& v : ga->data()) v += gy;
  });
}

Var conv1d(Var x, Var kernels, std::size_t stride, Padding padding) {
  same_graph(x, kernels);
  const Tensor& X = x.value();
  const Tensor& W = kernels.value();
  if (X.rank() != 2 && X.rank() != 3) throw Error(ErrorKind::ShapeMismatch, "conv1d input must be [C][T] or [N][C][T]");
  if (W.rank() != 3) throw Error(ErrorKind::ShapeMismatch, "conv1d kernels must be [C_out][C_in][K]");
  if (stride == 0) throw Error(ErrorKind::ShapeMismatch, "conv1d stride must be >= 1");
  const bool batched = X.rank() == 3;
  const std::size_t n_batch = batched ? X.dim(0) : 1;
  const std::size_t c_in = X.dim(batched ? 1 : 0);
  const std::size_t len = X.dim(batched ? 2 : 1);
  const std::size_t c_out = W.dim(0);
  const std::size_t k_size = W.dim(2);
  if (W.dim(1) != c_in) {
    throw Error(ErrorKind::ShapeMismatch, "conv1d kernels expect " + std::to_string(W.dim(1)) +
                                              " input channels, got " + std::to_string(c_in));
  }
  const std::size_t pad = padding.mode == PadMode::None ? 0 : padding.amount;
  const std::size_t padded_len = len + 2 * pad;
  if (k_size == 0 || k_size > padded_len || len == 0) {
    throw Error(ErrorKind::ShapeMismatch, "conv1d kernel of " + std::to_string(k_size) +
                                              " exceeds padded length " + std::to_string(padded_len));
  }
  const std::size_t out_len = (padded_len - k_size) / stride + 1;

  auto xp = std::make_shared<Tensor>(Shape{n_batch, c_in, padded_len});
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t c = 0; c < c_in; ++c) {
      const double* src = X.ptr() + (n * c_in + c) * len;
      double* dst = xp->ptr() + (n * c_in + c) * padded_len;
      for (std::size_t t = 0; t < pad; ++t) dst[t] = src[0];
      for (std::size_t t = 0; t < len; ++t) dst[pad + t] = src[t];
      for (std::size_t t = 0; t < pad; ++t) dst[pad + len + t] = src[len - 1];
    }
  }

  // im2col per sample, then one GEMM: Y_n = W [C_out x C_in*K] * cols_n [C_in*K x T_out]
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::size_t rows = c_in * k_size;
  auto cols = std::make_shared<std::vector<double>>(n_batch * rows * out_len);
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t c = 0; c < c_in; ++c) {
      const double* xr = xp->ptr() + (n * c_in + c) * padded_len;
      for (std::size_t k = 0; k < k_size; ++k) {
        double* dst = cols->data() + (n * rows + c * k_size + k) * out_len;
        for (std::size_t t = 0; t < out_len; ++t) dst[t] = xr[t * stride + k];
      }
    }
  }
  const Eigen::Map<const RowMat> w_mat(W.ptr(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(rows));
  const auto ci = [](std::size_t v) { return static_cast<Eigen::Index>(v); };

  Tensor y(batched ? Shape{n_batch, c_out, out_len} : Shape{c_out, out_len});
  for (std::size_t n = 0; n < n_batch; ++n) {
    Eigen::Map<RowMat> y_n(y.ptr() + n * c_out * out_len, ci(c_out), ci(out_len));
    Eigen::Map<const RowMat> col_n(cols->data() + n * rows * out_len, ci(rows), ci(out_len));
    y_n.noalias() = w_mat * col_n;
  }

  return x.graph->record(
      std::move(y), {x.id, kernels.id},
      [xi = x.id, wi = kernels.id, cols, stride, pad, n_batch, c_in, len, c_out, k_size, rows, padded_len, out_len,
       ci](Graph& g, std::size_t self) {
        const Tensor& gy = g.upstream(self);
        const Tensor& W = g.value(wi);
        if (Tensor* gw = g.grad_buffer(wi)) {
          Eigen::Map<RowMat> gw_mat(gw->ptr(), ci(c_out), ci(rows));
          for (std::size_t n = 0; n < n_batch; ++n) {
            Eigen::Map<const RowMat> gy_n(gy.ptr() + n * c_out * out_len, ci(c_out), ci(out_len));
            Eigen::Map<const RowMat> col_n(cols->data() + n * rows * out_len, ci(rows), ci(out_len));
            gw_mat.noalias() += gy_n * col_n.transpose();
          }
        }
        Tensor* gx = g.grad_buffer(xi);
        if (!gx) return;
        const Eigen::Map<const RowMat> w_mat(W.ptr(), ci(c_out), ci(rows));
        RowMat gcol(ci(rows), ci(out_len));
        std::vector<double> gxp(padded_len);
        for (std::size_t n = 0; n < n_batch; ++n) {
          Eigen::Map<const RowMat> gy_n(gy.ptr() + n * c_out * out_len, ci(c_out), ci(out_len));
          gcol.noalias() = w_mat.transpose() * gy_n;
          for (std::size_t c = 0; c < c_in; ++c) {
            std::fill(gxp.begin(), gxp.end(), 0.0);
            for (std::size_t k = 0; k < k_size; ++k) {
              const double* src = gcol.data() + (c * k_size + k) * out_len;
              for (std::size_t t = 0; t < out_len; ++t) gxp[t * stride + k] += src[t];
            }
            double* dst = gx->ptr() + (n * c_in + c) * len;
            for (std::size_t t = 0; t < pad; ++t) {
              dst[0] += gxp[t];
              dst[len - 1] += gxp[pad + len + t];
            }
            for (std::size_t t = 0; t < len; ++t) dst[t] += gxp[pad + t];
          }
        }
      });
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, bool training, double momentum, double eps) {
  same_graph(x, gamma);
  same_graph(x, beta);
  const Tensor& X = x.value();
  if (X.rank() != 3 && X.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "batch_norm input must be [N][C][T]");
  const bool batched = X.rank() == 3;
  const std::size_t n_batch = batched ? X.dim(0) : 1;
  const std::size_t channels = X.dim(batched ? 1 : 0);
  const std::size_t len = X.dim(batched ? 2 : 1);
  const Shape cshape{channels};
  if (gamma.value().shape() != cshape || beta.value().shape() != cshape) {
    throw Error(ErrorKind::ShapeMismatch, "batch_norm affine parameters must be [C]");
  }
  if (state.running_mean.size() == 0) state.running_mean = Tensor(cshape, 0.0);
  if (state.running_var.size() == 0) state.running_var = Tensor(cshape, 1.0);
  if (state.running_mean.shape() != cshape || state.running_var.shape() != cshape) {
    throw Error(ErrorKind::ShapeMismatch, "batch_norm running statistics must be [C]");
  }

  const double count = static_cast<double>(n_batch * len);
  auto xhat = std::make_shared<Tensor>(X.shape());
  auto inv_std = std::make_shared<std::vector<double>>(channels);
  Tensor y(X.shape());
  const Tensor& G = gamma.value();
  const Tensor& B = beta.value();
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = state.running_mean[c];
    double var = state.running_var[c];
    if (training) {
      double s = 0.0;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const double* row = X.ptr() + (n * channels + c) * len;
        for (std::size_t t = 0; t < len; ++t) s += row[t];
      }
      mean = s / count;
      double ss = 0.0;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const double* row = X.ptr() + (n * channels + c) * len;
        for (std::size_t t = 0; t < len; ++t) ss += (row[t] - mean) * (row[t] - mean);
      }
      var = ss / count;
      const double unbiased = count > 1.0 ? ss / (count - 1.0) : var;
      state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * mean;
      state.running_var[c] = (1.0 - momentum) * state.running_var[c] + momentum * unbiased;
    }
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[c] = is;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const std::size_t off = (n * channels + c) * len;
      for (std::size_t t = 0; t < len; ++t) {
        const double h = (X[off + t] - mean) * is;
        (*xhat)[off + t] = h;
        y[off + t] = G[c] * h + B[c];
      }
    }
  }

  return x.graph->record(
      std::move(y), {x.id, gamma.id, beta.id},
      [xi = x.id, gi = gamma.id, bi = beta.id, xhat, inv_std, training, n_batch, channels, len, count](
          Graph& g, std::size_t self) {
        const Tensor& gy = g.upstream(self);
        const Tensor& G = g.value(gi);
        Tensor* gx = g.grad_buffer(xi);
        Tensor* gg = g.grad_buffer(gi);
        Tensor* gb = g.grad_buffer(bi);
        for (std::size_t c = 0; c < channels; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xhat = 0.0;
          for (std::size_t n = 0; n < n_batch; ++n) {
            const std::size_t off = (n * channels + c) * len;
            for (std::size_t t = 0; t < len; ++t) {
              sum_dy += gy[off + t];
              sum_dy_xhat += gy[off + t] * (*xhat)[off + t];
            }
          }
          if (gg) (*gg)[c] += sum_dy_xhat;
          if (gb) (*gb)[c] += sum_dy;
          if (!gx) continue;
          const double k = G[c] * (*inv_std)[c];
          for (std::size_t n = 0; n < n_batch; ++n) {
            const std::size_t off = (n * channels + c) * len;
            for (std::size_t t = 0; t < len; ++t) {
              if (training) {
                (*gx)[off + t] += k / count * (count * gy[off + t] - sum_dy - (*xhat)[off + t] * sum_dy_xhat);
              } else {
                (*gx)[off + t] += k * gy[off + t];
              }
            }
          }
        }
      });
}

Var global_avg_pool(Var x) {
  const Tensor& X = x.value();
  if (X.rank() != 2 && X.rank() != 3) throw Error(ErrorKind::ShapeMismatch, "global_avg_pool needs [C][T] or [N][C][T]");
  const std::size_t len = X.shape().back();
  if (len == 0) throw Error(ErrorKind::ShapeMismatch, "global_avg_pool over an empty time axis");
  const std::size_t rows = X.size() / len;
  Shape out_shape(X.shape().begin(), X.shape().end() - 1);
  Tensor y(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += X[r * len + t];
    y[r] = s / static_cast<double>(len);
  }
  return x.graph->record(std::move(y), {x.id}, [xi = x.id, rows, len](Graph& g, std::size_t self) {
    Tensor* gx = g.grad_buffer(xi);
    if (!gx) return;
    const Tensor& gy = g.upstream(self);
    for (std::size_t r = 0; r < rows; ++r) {
      const double v = gy[r] / static_cast<double>(len);
      for (std::size_t t = 0; t < len; ++t) (*gx)[r * len + t] += v;
    }
  });
}

Var dense(Var x, Var weight, Var bias) {
  same_graph(x, weight);
  same_graph(x, bias);
  const Tensor& X = x.value();
  const Tensor& W = weight.value();
  const Tensor& B = bias.value();
  if (W.rank() != 2 || (X.rank() != 1 && X.rank() != 2)) {
    throw Error(ErrorKind::ShapeMismatch, "dense expects x [F] or [N][F] and weight [O][F]");
  }
  const std::size_t features = X.shape().back();
  const std::size_t rows = X.rank() == 2 ? X.dim(0) : 1;
  const std::size_t outputs = W.dim(0);
  if (W.dim(1) != features || B.shape() != Shape{outputs}) {
    throw Error(ErrorKind::ShapeMismatch, "dense weight " + shape_string(W.shape()) + " / bias " +
                                              shape_string(B.shape()) + " vs input " + shape_string(X.shape()));
  }
  Tensor y(X.rank() == 2 ? Shape{rows, outputs} : Shape{outputs});
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t o = 0; o < outputs; ++o) {
      double s = B[o];
      for (std::size_t f = 0; f < features; ++f) s += W[o * features + f] * X[n * features + f];
      y[n * outputs + o] = s;
    }
  }
  return x.graph->record(
      std::move(y), {x.id, weight.id, bias.id},
      [xi = x.id, wi = weight.id, bi = bias.id, rows, features, outputs](Graph& g, std::size_t self) {
        const Tensor& gy = g.upstream(self);
        const Tensor& X = g.value(xi);
        const Tensor& W = g.value(wi);
        Tensor* gx = g.grad_buffer(xi);
        Tensor* gw = g.grad_buffer(wi);
        Tensor* gb = g.grad_buffer(bi);
        for (std::size_t n = 0; n < rows; ++n) {
          for (std::size_t o = 0; o < outputs; ++o) {
            const double d = gy[n * outputs + o];
            if (gb) (*gb)[o] += d;
            for (std::size_t f = 0; f < features; ++f) {
              if (gw) (*gw)[o * features + f] += d * X[n * features + f];
              if (gx) (*gx)[n * features + f] += d * W[o * features + f];
            }
          }
        }
      });
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Var dropout(Var x, double rate, bool training, std::uint64_t seed, std::uint64_t counter) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::InvalidConfig, "dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const Tensor& X = x.value();
  auto mask = std::make_shared<std::vector<double>>(X.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  const std::uint64_t stream = mix64(seed ^ mix64(counter));
  Tensor y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double u = static_cast<double>(mix64(stream + i) >> 11) * 0x1.0p-53;
    (*mask)[i] = u >= rate ? keep_scale : 0.0;
    y[i] = X[i] * (*mask)[i];
  }
  return x.graph->record(std::move(y), {x.id}, [xi = x.id, mask](Graph& g, std::size_t self) {
    Tensor* gx = g.grad_buffer(xi);
    if (!gx) return;
    const Tensor& gy = g.upstream(self);
    for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * (*mask)[i];
  });
}

namespace {

std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw Error(ErrorKind::ShapeMismatch, std::string(op) + " expects [K] or [N][K]");
}

void softmax_rows(const Tensor& logits, Tensor& out, std::size_t rows, std::size_t cols) {
  for (std::size_t n = 0; n < rows; ++n) {
    const double* z = logits.ptr() + n * cols;
    double* p = out.ptr() + n * cols;
    double m = z[0];
    for (std::size_t k = 1; k < cols; ++k) m = std::max(m, z[k]);
    double s = 0.0;
    for (std::size_t k = 0; k < cols; ++k) s += (p[k] = std::exp(z[k] - m));
    for (std::size_t k = 0; k < cols; ++k) p[k] /= s;
  }
}

}  // namespace

Var softmax(Var logits) {
  const Tensor& Z = logits.value();
  auto [rows, cols] = rows_cols(Z, "softmax");
  Tensor p(Z.shape());
  softmax_rows(Z, p, rows, cols);
  return logits.graph->record(std::move(p), {logits.id}, [zi = logits.id, rows, cols](Graph& g, std::size_t self) {
    Tensor* gz = g.grad_buffer(zi);
    if (!gz) return;
    const Tensor& gy = g.upstream(self);
    const Tensor& p = g.value(self);
    for (std::size_t n = 0; n < rows; ++n) {
      double dot = 0.0;
      for (std::size_t k = 0; k < cols; ++k) dot += gy[n * cols + k] * p[n * cols + k];
      for (std::size_t k = 0; k < cols; ++k) (*gz)[n * cols + k] += p[n * cols + k] * (gy[n * cols + k] - dot);
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& Z = logits.value();
  auto [rows, cols] = rows_cols(Z, "softmax_cross_entropy");
  if (labels.size() != rows) throw Error(ErrorKind::ShapeMismatch, "one label per logit row required");
  auto probs = std::make_shared<Tensor>(Z.shape());
  softmax_rows(Z, *probs, rows, cols);
  std::vector<int> lab(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t n = 0; n < rows; ++n) {
    if (lab[n] < 0 || static_cast<std::size_t>(lab[n]) >= cols) throw Error(ErrorKind::ShapeMismatch, "label out of range");
    const double* z = Z.ptr() + n * cols;
    double m = z[0];
    for (std::size_t k = 1; k < cols; ++k) m = std::max(m, z[k]);
    double s = 0.0;
    for (std::size_t k = 0; k < cols; ++k) s += std::exp(z[k] - m);
    loss += m + std::log(s) - z[lab[n]];
  }
  loss /= static_cast<double>(rows);
  return logits.graph->record(Tensor::scalar(loss), {logits.id},
                              [zi = logits.id, probs, lab, rows, cols](Graph& g, std::size_t self) {
                                Tensor* gz = g.grad_buffer(zi);
                                if (!gz) return;
                                const double gy = g.upstream(self)[0] / static_cast<double>(rows);
                                for (std::size_t n = 0; n < rows; ++n) {
                                  for (std::size_t k = 0; k < cols; ++k) {
                                    const double onehot = static_cast<int>(k) == lab[n] ? 1.0 : 0.0;
                                    (*gz)[n * cols + k] += gy * ((*probs)[n * cols + k] - onehot);
                                  }
                                }
                              });
}

Var column_sum(Var x, std::size_t k) {
  auto [rows, cols] = rows_cols(x.value(), "column_sum");
  if (k >= cols) throw Error(ErrorKind::ShapeMismatch, "column index out of range");
  double s = 0.0;
  for (std::size_t n = 0; n < rows; ++n) s += x.value()[n * cols + k];
  return x.graph->record(Tensor::scalar(s), {x.id}, [xi = x.id, rows, cols, k](Graph& g, std::size_t self) {
    Tensor* gx = g.grad_buffer(xi);
    if (!gx) return;
    const double gy = g.upstream(self)[0];
    for (std::size_t n = 0; n < rows; ++n) (*gx)[n * cols + k] += gy;
  });
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, const AdamOptions& options) {
  if (params.size() != grads.size()) throw Error(ErrorKind::ShapeMismatch, "one gradient per parameter required");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape(), 0.0);
      state.v.emplace_back(p.shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "optimiser state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || state.m[i].shape() != params[i].shape()) {
      throw Error(ErrorKind::ShapeMismatch, "parameter " + std::to_string(i) + " shape mismatch");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g[j];
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * g[j] * g[j];
      p[j] -= options.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + options.eps);
    }
  }
}

}  // namespace ecgxai::ad
