// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dkgh {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

using detail::Node;
using detail::TensorImpl;

thread_local Tape* g_active_tape = nullptr;

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(x.shape()));
  }
}

// C[m x n] += A[m x k] * B[k x n], all row-major and contiguous.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

// C[m x n] += A[m x k] * B[n x k]^T.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
  }
}

// C[m x n] += A[k x m]^T * B[k x n].
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct ConvGeometry {
  std::size_t channels, height, width, kh, kw, stride, pad, out_h, out_w;
  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

// cols[(c*kh + i)*kw + j][oy*out_w + ox]
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.height)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = x + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.width)) ? 0.0
                                                                    : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* dx) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          double* dst = dx + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            dst[static_cast<std::size_t>(ix)] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

// --- Tensor ------------------------------------------------------------------

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = {1};
  impl_->data = {0.0};
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) : impl_(std::make_shared<TensorImpl>()) {
  validate_shape(shape);
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  validate_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw DimensionError("index rank mismatch for " + shape_str(shape()));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= impl_->shape[axis]) throw DimensionError("index out of range for " + shape_str(shape()));
    flat = flat * impl_->shape[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->data, false);
}

// --- Tape --------------------------------------------------------------------

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::shared_ptr<Node> node) { ops_.push_back(std::move(node)); }

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  const auto& root = loss.impl();
  if (root->is_leaf) {
    if (root->requires_grad) {
      root->ensure_grad();
      root->grad[0] += 1.0;
    }
    return;
  }
  if (root->tape != this) throw ContractError("loss was not recorded on this tape");

  for (auto& op : ops_) op->output->grad.clear();
  root->ensure_grad();
  root->grad[0] = 1.0;

  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    Node& node = **it;
    if (node.output->grad.empty()) continue;
    node.backward();
  }
}

void backward(const Tensor& loss) {
  const auto* tape = static_cast<const Tape*>(loss.impl()->tape);
  if (tape == nullptr) {
    if (loss.impl()->is_leaf && loss.requires_grad()) {
      if (loss.numel() != 1) throw ContractError("backward requires a scalar loss");
      Tensor l = loss;
      l.mutable_grad()[0] += 1.0;
      return;
    }
    throw ContractError("backward: loss is not on an active tape");
  }
  const_cast<Tape*>(tape)->backward(loss);
}

Tensor make_result(const char* name, Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, BackwardFn backward_fn) {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(name) + ": produced a non-finite value");
  }
  Tensor out(std::move(shape), std::move(values));
  Tape* tape = Tape::active();
  if (tape == nullptr) return out;
  const bool any_grad = std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
  if (!any_grad) return out;

  auto node = std::make_shared<Node>();
  node->name = name;
  node->output = out.impl();
  for (auto& in : inputs) node->inputs.push_back(in.impl());
  out.impl()->requires_grad = true;
  out.impl()->is_leaf = false;
  out.impl()->tape = tape;

  Node* raw = node.get();
  node->backward = [raw, fn = std::move(backward_fn)]() {
    std::vector<std::span<double>> grad_in;
    grad_in.reserve(raw->inputs.size());
    for (auto& in : raw->inputs) {
      if (in->requires_grad) {
        in->ensure_grad();
        grad_in.emplace_back(in->grad);
      } else {
        grad_in.emplace_back();
      }
    }
    fn(raw->output->grad, grad_in);
  };
  tape->record(std::move(node));
  return out;
}

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result("add", a.shape(), std::move(out), {a, b},
                     [](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (auto& d : gi) {
                         if (d.empty()) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result("sub", a.shape(), std::move(out), {a, b},
                     [](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       if (!gi[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                       if (!gi[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] -= g[i];
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result("mul", a.shape(), std::move(out), {a, b},
                     [a, b](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       if (!gi[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * b[i];
                       if (!gi[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] += g[i] * a[i];
                     });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return make_result("scale", a.shape(), std::move(out), {a},
                     [factor](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * factor;
                     });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return make_result("relu", x.shape(), std::move(out), {x},
                     [x](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (x[i] > 0.0) gi[0][i] += g[i];
                     });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    // Evaluate on the side that keeps exp() bounded.
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  std::vector<double> y = out;
  return make_result("sigmoid", x.shape(), std::move(out), {x},
                     [y = std::move(y)](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * y[i] * (1.0 - y[i]);
                     });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  }
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];

  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = x[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, x[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(x[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  std::vector<double> y = out;
  return make_result(
      "softmax", s, std::move(out), {x},
      [y = std::move(y), outer, inner, len](std::span<const double> g, std::vector<std::span<double>>& gi) {
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double gy = 0.0;
            for (std::size_t j = 0; j < len; ++j) gy += g[base + j * inner] * y[base + j * inner];
            for (std::size_t j = 0; j < len; ++j) {
              const std::size_t idx = base + j * inner;
              gi[0][idx] += y[idx] * (g[idx] - gy);
            }
          }
        }
      });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result("sum", {1}, {total}, {x},
                     [](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (auto& d : gi[0]) d += g[0];
                     });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {x},
                     [](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                     });
}

// --- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data());
  return make_result("matmul", {m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       // dA = dY * B^T, dB = A^T * dY
                       if (!gi[0].empty()) gemm_nt(m, k, n, g.data(), b.data().data(), gi[0].data());
                       if (!gi[1].empty()) gemm_tn(k, n, m, a.data().data(), g.data(), gi[1].data());
                     });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return make_result("transpose", {c, r}, std::move(out), {a},
                     [r, c](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) gi[0][i * c + j] += g[j * r + i];
                     });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank("add_row_bias", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (bias.numel() != cols) {
    throw DimensionError("add_row_bias: bias " + shape_str(bias.shape()) + " vs input " + shape_str(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] + bias[c];
  return make_result("add_row_bias", x.shape(), std::move(out), {x, bias},
                     [rows, cols](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       if (!gi[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                       if (!gi[1].empty())
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c) gi[1][c] += g[r * cols + c];
                     });
}

// --- convolution / pooling ---------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  require_rank("conv2d input", x, 4);
  require_rank("conv2d weight", w, 4);
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  const std::size_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t out_ch = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != channels) {
    throw DimensionError("conv2d: weight " + shape_str(w.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  if (kh > h + 2 * pad || kw > wd + 2 * pad) {
    throw DimensionError("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
                         shape_str(x.shape()) + " with pad " + std::to_string(pad));
  }
  const ConvGeometry geo{channels, h, wd, kh, kw, stride, pad,
                         (h + 2 * pad - kh) / stride + 1, (wd + 2 * pad - kw) / stride + 1};
  const std::size_t patch = geo.patch(), positions = geo.positions();
  const std::size_t in_sample = channels * h * wd, out_sample = out_ch * positions;

  std::vector<double> out(batch * out_sample, 0.0);
  std::vector<double> cols(patch * positions);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(geo, x.data().data() + b * in_sample, cols.data());
    gemm_nn(out_ch, positions, patch, w.data().data(), cols.data(), out.data() + b * out_sample);
  }
  return make_result(
      "conv2d", {batch, out_ch, geo.out_h, geo.out_w}, std::move(out), {x, w},
      [x, w, geo, batch, out_ch, in_sample, out_sample](std::span<const double> g,
                                                        std::vector<std::span<double>>& gi) {
        const std::size_t patch = geo.patch(), positions = geo.positions();
        std::vector<double> cols(patch * positions);
        std::vector<double> dcols(patch * positions);
        for (std::size_t b = 0; b < batch; ++b) {
          const double* gb = g.data() + b * out_sample;
          if (!gi[1].empty()) {
            im2col(geo, x.data().data() + b * in_sample, cols.data());
            gemm_nt(out_ch, patch, positions, gb, cols.data(), gi[1].data());
          }
          if (!gi[0].empty()) {
            std::fill(dcols.begin(), dcols.end(), 0.0);
            gemm_tn(patch, positions, out_ch, w.data().data(), gb, dcols.data());
            col2im_add(geo, dcols.data(), gi[0].data() + b * in_sample);
          }
        }
      });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank("add_channel_bias", x, 4);
  const std::size_t batch = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (bias.numel() != ch) {
    throw DimensionError("add_channel_bias: bias " + shape_str(bias.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t base = (b * ch + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[base + i] = x[base + i] + bias[c];
    }
  return make_result("add_channel_bias", x.shape(), std::move(out), {x, bias},
                     [batch, ch, plane](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       if (!gi[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                       if (!gi[1].empty())
                         for (std::size_t b = 0; b < batch; ++b)
                           for (std::size_t c = 0; c < ch; ++c) {
                             const std::size_t base = (b * ch + c) * plane;
                             double s = 0.0;
                             for (std::size_t i = 0; i < plane; ++i) s += g[base + i];
                             gi[1][c] += s;
                           }
                     });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 4);
  const std::size_t batch = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(batch * ch);
  for (std::size_t i = 0; i < batch * ch; ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += x[i * plane + p];
    out[i] = s / static_cast<double>(plane);
  }
  return make_result("global_avg_pool", {batch, ch}, std::move(out), {x},
                     [batch, ch, plane](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       const double inv = 1.0 / static_cast<double>(plane);
                       for (std::size_t i = 0; i < batch * ch; ++i)
                         for (std::size_t p = 0; p < plane; ++p) gi[0][i * plane + p] += g[i] * inv;
                     });
}

// --- batch-axis indexing -----------------------------------------------------

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank("concat_cols", a, 2);
  require_rank("concat_cols", b, 2);
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1), cw = ca + cb;
  std::vector<double> out(rows * cw);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * ca, ca, out.data() + r * cw);
    std::copy_n(b.data().data() + r * cb, cb, out.data() + r * cw + ca);
  }
  return make_result("concat_cols", {rows, cw}, std::move(out), {a, b},
                     [rows, ca, cb, cw](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (!gi[0].empty())
                           for (std::size_t c = 0; c < ca; ++c) gi[0][r * ca + c] += g[r * cw + c];
                         if (!gi[1].empty())
                           for (std::size_t c = 0; c < cb; ++c) gi[1][r * cb + c] += g[r * cw + ca + c];
                       }
                     });
}

Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (rows.empty()) throw DimensionError("index_rows: empty selection");
  const std::size_t row_size = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = rows.size();
  std::vector<double> out(rows.size() * row_size);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0)) throw DimensionError("index_rows: row index out of range");
    std::copy_n(x.data().data() + rows[i] * row_size, row_size, out.data() + i * row_size);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result("index_rows", std::move(shape), std::move(out), {x},
                     [idx = std::move(idx), row_size](std::span<const double> g,
                                                      std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < row_size; ++j)
                           gi[0][idx[i] * row_size + j] += g[i * row_size + j];
                     });
}

Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> rows, std::size_t batch) {
  if (rows.size() != src.dim(0)) throw DimensionError("scatter_rows: index count does not match rows");
  const std::size_t row_size = src.numel() / src.dim(0);
  Shape shape = src.shape();
  shape[0] = batch;
  std::vector<double> out(batch * row_size, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= batch) throw DimensionError("scatter_rows: row index out of range");
    for (std::size_t j = 0; j < row_size; ++j) out[rows[i] * row_size + j] += src[i * row_size + j];
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result("scatter_rows", std::move(shape), std::move(out), {src},
                     [idx = std::move(idx), row_size](std::span<const double> g,
                                                      std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < row_size; ++j)
                           gi[0][i * row_size + j] += g[idx[i] * row_size + j];
                     });
}

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols, std::size_t width) {
  require_rank("gather_cols", x, 2);
  const std::size_t rows = x.dim(0), n = x.dim(1);
  if (cols.size() != rows * width) throw DimensionError("gather_cols: index count mismatch");
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t c = cols[r * width + j];
      if (c >= n) throw DimensionError("gather_cols: column index out of range");
      out[r * width + j] = x[r * n + c];
    }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return make_result("gather_cols", {rows, width}, std::move(out), {x},
                     [idx = std::move(idx), rows, n, width](std::span<const double> g,
                                                            std::vector<std::span<double>>& gi) {
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < width; ++j) gi[0][r * n + idx[r * width + j]] += g[r * width + j];
                     });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  require_rank("pick", x, 2);
  if (rows.size() != cols.size() || rows.empty()) throw DimensionError("pick: index lists differ in length");
  const std::size_t n = x.dim(1);
  std::vector<std::size_t> flat(rows.size());
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0) || cols[i] >= n) throw DimensionError("pick: index out of range");
    flat[i] = rows[i] * n + cols[i];
    out[i] = x[flat[i]];
  }
  return make_result("pick", {rows.size(), 1}, std::move(out), {x},
                     [flat = std::move(flat)](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < flat.size(); ++i) gi[0][flat[i]] += g[i];
                     });
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  const std::size_t batch = x.dim(0);
  if (w.numel() != batch) {
    throw DimensionError("scale_rows: weights " + shape_str(w.shape()) + " vs input " + shape_str(x.shape()));
  }
  const std::size_t row_size = x.numel() / batch;
  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < row_size; ++j) out[b * row_size + j] = x[b * row_size + j] * w[b];
  return make_result("scale_rows", x.shape(), std::move(out), {x, w},
                     [x, w, batch, row_size](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t b = 0; b < batch; ++b) {
                         double acc = 0.0;
                         for (std::size_t j = 0; j < row_size; ++j) {
                           const std::size_t i = b * row_size + j;
                           if (!gi[0].empty()) gi[0][i] += g[i] * w[b];
                           acc += g[i] * x[i];
                         }
                         if (!gi[1].empty()) gi[1][b] += acc;
                       }
                     });
}

Tensor lerp_rows(const Tensor& a, const Tensor& b, const Tensor& p) {
  require_same_shape("lerp_rows", a, b);
  const std::size_t batch = a.dim(0);
  if (p.numel() != batch) {
    throw DimensionError("lerp_rows: gate " + shape_str(p.shape()) + " vs input " + shape_str(a.shape()));
  }
  const std::size_t row_size = a.numel() / batch;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < batch; ++r) {
    const double t = p[r];
    for (std::size_t j = 0; j < row_size; ++j) {
      const std::size_t i = r * row_size + j;
      const double v = (1.0 - t) * a[i] + t * b[i];
      // The exact value lies between the endpoints; rounding may overshoot by an ulp.
      out[i] = std::clamp(v, std::min(a[i], b[i]), std::max(a[i], b[i]));
    }
  }
  return make_result("lerp_rows", a.shape(), std::move(out), {a, b, p},
                     [a, b, p, batch, row_size](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t r = 0; r < batch; ++r) {
                         const double t = p[r];
                         double acc = 0.0;
                         for (std::size_t j = 0; j < row_size; ++j) {
                           const std::size_t i = r * row_size + j;
                           if (!gi[0].empty()) gi[0][i] += g[i] * (1.0 - t);
                           if (!gi[1].empty()) gi[1][i] += g[i] * t;
                           acc += g[i] * (b[i] - a[i]);
                         }
                         if (!gi[2].empty()) gi[2][r] += acc;
                       }
                     });
}

Tensor mean_rows(const Tensor& x) {
  require_rank("mean_rows", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += x[r * cols + c];
  for (auto& v : out) v /= static_cast<double>(rows);
  return make_result("mean_rows", {cols}, std::move(out), {x},
                     [rows, cols](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       const double inv = 1.0 / static_cast<double>(rows);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) gi[0][r * cols + c] += g[c] * inv;
                     });
}

}  // namespace dkgh
