// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "dkgh/tensor.hpp"

namespace dkgh {

/// A metric is undefined for the given labels (e.g. AUC with one class).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Mean negative log-likelihood of `labels` under softmax(logits), via
/// log-sum-exp. Returns a scalar tensor on the active tape.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

/// sum_i f_i * p_i for normalized f and p (no N scaling).
double load_balance_loss(std::span<const double> f, std::span<const double> p_bar);

/// Differentiable form of the load-balancing term for one branch: f is held
/// constant and p_bar = mean_b softmax(raw_scores[b]).
Tensor load_balance_term(const Tensor& raw_scores, std::span<const double> f);

struct LossBreakdown {
  double cls = 0.0;
  double lb = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

/// total = cls + lambda * sum(lb_terms).
LossBreakdown total_loss(double cls, std::span<const double> lb_terms, double lambda);

struct Objective {
  Tensor total;
  LossBreakdown breakdown;
};

/// Tensor version of total_loss: gradients flow through every term.
Objective combine_objective(const Tensor& cls, const std::vector<Tensor>& lb_terms, double lambda);

/// Percentage of rows whose argmax (ties to the lowest class) equals the label.
double accuracy(const Tensor& logits, std::span<const std::size_t> labels);

/// Macro one-vs-rest AUC in percent. Ties count one half; classes without
/// both positives and negatives are skipped.
double macro_auc(const Tensor& scores, std::span<const std::size_t> labels);

/// Size-weighted mean over groups of the largest single-expert share.
double routing_purity(std::span<const std::size_t> top1, std::span<const std::size_t> groups,
                      std::size_t num_experts);

/// Shannon entropy (nats) of a distribution, 0 log 0 = 0.
double entropy(std::span<const double> dist);

}  // namespace dkgh
