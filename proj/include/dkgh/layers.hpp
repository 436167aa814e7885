// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dkgh/gradcheck.hpp"
#include "dkgh/tensor.hpp"

namespace dkgh {

using Rng = std::mt19937_64;

/// Fills `t` from U(-b, b) with b = sqrt(6 / fan_in).
void kaiming_uniform(Tensor& t, std::size_t fan_in, Rng& rng);

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct Conv2d {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]
  std::size_t stride = 1;
  std::size_t pad = 0;

  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// relu(conv2(relu(conv1(x))) + skip(x)); skip is a strided 1x1 projection
/// whenever the channel count or stride changes.
struct ResidualBasicBlock {
  Conv2d conv1;
  Conv2d conv2;
  std::optional<Conv2d> projection;

  ResidualBasicBlock() = default;
  ResidualBasicBlock(std::size_t in, std::size_t out, std::size_t stride, Rng& rng);

  std::size_t in_channels() const { return conv1.weight.dim(1); }
  std::size_t out_channels() const { return conv2.weight.dim(0); }
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Linear layers with relu between them and no activation after the last.
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  explicit Mlp(std::vector<Linear> layers);
  Mlp(const std::vector<std::size_t>& widths, Rng& rng);

  std::size_t in_features() const { return layers.front().in_features(); }
  std::size_t out_features() const { return layers.back().out_features(); }
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

std::size_t parameter_count(const std::vector<NamedTensor>& params);

}  // namespace dkgh
