// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dkgh {

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn,
                                  std::vector<NamedTensor> params, const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");

  const double first = loss_fn().item();
  const double second = loss_fn().item();
  if (first != second) throw ContractError("finite_diff_check: loss function is not deterministic");

  for (auto& p : params) p.tensor.zero_grad();
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (auto& p : params) {
    const std::vector<double> analytic = p.tensor.grad();
    std::vector<std::size_t> coords(p.tensor.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    auto values = p.tensor.mutable_data();
    for (auto i : coords) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double plus = loss_fn().item();
      values[i] = saved - options.eps;
      const double minus = loss_fn().item();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

}  // namespace dkgh
