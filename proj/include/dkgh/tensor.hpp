// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dkgh/errors.hpp"

namespace dkgh {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct TensorImpl;

// One recorded operation. `backward` reads output->grad and accumulates into
// the grads of `inputs`.
struct Node {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  std::function<void()> backward;
  const char* name = "";
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  const void* tape = nullptr;  // tape that produced this value, if any

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

class Tape;

/// Dense row-major tensor handle. Copies share storage; use `clone()` for a
/// deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor scalar(double v) { return Tensor(Shape{1}, v); }
  /// 2-D tensor from nested rows.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; zeros of the right shape when nothing accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad() { impl_->grad.clear(); }

  /// Detached deep copy (leaf, no grad).
  Tensor clone() const;
  /// Same values, cut off from the tape.
  Tensor detach() const { return clone(); }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Ordered record of differentiable operations. Operations are recorded only
/// while a tape is active on the current thread and at least one input
/// requires a gradient.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Makes `tape` the active tape for the lifetime of the guard.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  /// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
  /// calls; intermediate gradients are recomputed each call.
  void backward(const Tensor& loss);

  void record(std::shared_ptr<detail::Node> node);

 private:
  std::vector<std::shared_ptr<detail::Node>> ops_;
};

/// Convenience: backward on the tape that produced `loss`.
void backward(const Tensor& loss);

/// Builds the output tensor of an operation and, when recording, attaches a
/// backward rule. `backward_fn` receives the output gradient and must
/// accumulate into the input gradient spans (empty span for inputs that do
/// not require grad).
using BackwardFn = std::function<void(std::span<const double> grad_out,
                                      std::vector<std::span<double>>& grad_in)>;
Tensor make_result(const char* name, Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, BackwardFn backward_fn);

// --- elementwise and structural ops ---------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Numerically stable softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// --- linear algebra ---------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// y[b, j] = x[b, j] + bias[j].
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

// --- convolution / pooling ------------------------------------------------
Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad);
/// y[b, c, h, w] = x[b, c, h, w] + bias[c].
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
Tensor global_avg_pool(const Tensor& x);

// --- batch-axis indexing (used by routing) -------------------------------
/// Concatenate two [B, d] matrices along columns.
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Rows `rows` of x along axis 0.
Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows);
/// Zero tensor with `batch` rows where row rows[i] receives src[i].
Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> rows, std::size_t batch);
/// out[b, j] = x[b, cols[b * width + j]] for a [B, N] input.
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols, std::size_t width);
/// out[i, 0] = x[rows[i], cols[i]].
Tensor pick(const Tensor& x, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
/// Multiplies every element of sample b by w[b, 0].
Tensor scale_rows(const Tensor& x, const Tensor& w);
/// Per-sample convex blend (1 - p[b]) * a + p[b] * b, kept inside
/// [min(a, b), max(a, b)] elementwise.
Tensor lerp_rows(const Tensor& a, const Tensor& b, const Tensor& p);
/// Mean over axis 0 of a [B, N] matrix -> [N].
Tensor mean_rows(const Tensor& x);

}  // namespace dkgh
