// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dkgh/tensor.hpp"

namespace dkgh {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-6;
  // Denominator floor for the relative error so vanishing gradients compare
  // on an absolute scale.
  double abs_floor = 1e-6;
  // 0 checks every coordinate; otherwise a seeded sample per parameter.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
  bool passed = true;
};

/// Compares reverse-mode gradients of `loss_fn` with central differences.
///
/// `loss_fn` must rebuild the loss from the current parameter values each
/// call; the parameters are perturbed in place and restored. A loss that
/// differs between two evaluations at the same point raises ContractError.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn,
                                  std::vector<NamedTensor> params,
                                  const GradCheckOptions& options = {});

}  // namespace dkgh
