// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/layers.hpp"

#include <cmath>

namespace dkgh {

void kaiming_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.mutable_data()) v = dist(rng);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight({out, in}, 0.0, true), bias({out}, 0.0, true) {
  kaiming_uniform(weight, in, rng);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_features()) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  return add_row_bias(matmul(x, transpose(weight)), bias);
}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride_, std::size_t pad_,
               Rng& rng)
    : weight({out, in, kernel, kernel}, 0.0, true), bias({out}, 0.0, true), stride(stride_), pad(pad_) {
  kaiming_uniform(weight, in * kernel * kernel, rng);
}

Tensor Conv2d::forward(const Tensor& x) const {
  return add_channel_bias(conv2d(x, weight, stride, pad), bias);
}

void Conv2d::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

ResidualBasicBlock::ResidualBasicBlock(std::size_t in, std::size_t out, std::size_t stride, Rng& rng)
    : conv1(in, out, 3, stride, 1, rng), conv2(out, out, 3, 1, 1, rng) {
  if (in != out || stride != 1) projection.emplace(in, out, 1, stride, 0, rng);
}

Tensor ResidualBasicBlock::forward(const Tensor& x) const {
  Tensor branch = conv2.forward(relu(conv1.forward(x)));
  Tensor skip = projection ? projection->forward(x) : x;
  if (branch.shape() != skip.shape()) {
    throw std::logic_error("residual block: branch " + shape_str(branch.shape()) + " vs skip " +
                           shape_str(skip.shape()));
  }
  return relu(add(branch, skip));
}

void ResidualBasicBlock::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
  if (projection) projection->collect(prefix + ".proj", out);
}

Mlp::Mlp(std::vector<Linear> layers_) : layers(std::move(layers_)) {
  if (layers.empty()) throw ContractError("mlp needs at least one layer");
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].out_features() != layers[i + 1].in_features()) {
      throw DimensionError("mlp: layer " + std::to_string(i) + " width does not feed layer " + std::to_string(i + 1));
    }
  }
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Rng& rng) {
  if (widths.size() < 2) throw ContractError("mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers.emplace_back(widths[i], widths[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = layers.front().forward(x);
  for (std::size_t i = 1; i < layers.size(); ++i) h = layers[i].forward(relu(h));
  return h;
}

void Mlp::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), out);
}

std::size_t parameter_count(const std::vector<NamedTensor>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

}  // namespace dkgh
