// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace dkgh {

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [B,C], got " + shape_str(logits.shape()));
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) throw DimensionError("cross_entropy: label count does not match batch");
  for (auto l : labels) {
    if (l >= classes) {
      throw ValidationError("cross_entropy: label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  std::vector<double> probs(batch * classes);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = logits.data().data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    total += lse - row[labels[b]];
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] = std::exp(row[c] - lse);
  }
  std::vector<std::size_t> targets(labels.begin(), labels.end());
  return make_result("cross_entropy", {1}, {total / static_cast<double>(batch)}, {logits},
                     [probs = std::move(probs), targets = std::move(targets), batch, classes](
                         std::span<const double> g, std::vector<std::span<double>>& gi) {
                       const double s = g[0] / static_cast<double>(batch);
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t c = 0; c < classes; ++c) {
                           const double indicator = c == targets[b] ? 1.0 : 0.0;
                           gi[0][b * classes + c] += s * (probs[b * classes + c] - indicator);
                         }
                       }
                     });
}

double load_balance_loss(std::span<const double> f, std::span<const double> p_bar) {
  if (f.size() != p_bar.size() || f.empty()) throw ContractError("load_balance_loss: f and p have different lengths");
  const double sf = std::accumulate(f.begin(), f.end(), 0.0);
  const double sp = std::accumulate(p_bar.begin(), p_bar.end(), 0.0);
  if (std::abs(sf - 1.0) > 1e-6 || std::abs(sp - 1.0) > 1e-6) {
    throw ContractError("load_balance_loss: f and p must each sum to 1");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) total += f[i] * p_bar[i];
  return total;
}

Tensor load_balance_term(const Tensor& raw_scores, std::span<const double> f) {
  if (raw_scores.rank() != 2 || raw_scores.dim(1) != f.size()) {
    throw DimensionError("load_balance_term: scores " + shape_str(raw_scores.shape()) + " vs " +
                         std::to_string(f.size()) + " frequencies");
  }
  const Tensor freq({f.size()}, std::vector<double>(f.begin(), f.end()));
  return sum(mul(mean_rows(softmax(raw_scores, 1)), freq));
}

LossBreakdown total_loss(double cls, std::span<const double> lb_terms, double lambda) {
  if (lambda < 0.0) throw ContractError("lambda must be non-negative");
  LossBreakdown out;
  out.cls = cls;
  out.lambda = lambda;
  for (double v : lb_terms) out.lb += v;
  out.total = cls + lambda * out.lb;
  return out;
}

Objective combine_objective(const Tensor& cls, const std::vector<Tensor>& lb_terms, double lambda) {
  std::vector<double> values;
  values.reserve(lb_terms.size());
  for (const auto& t : lb_terms) values.push_back(t.item());
  Objective out{cls, total_loss(cls.item(), values, lambda)};
  if (!lb_terms.empty() && lambda != 0.0) {
    Tensor lb = lb_terms.front();
    for (std::size_t i = 1; i < lb_terms.size(); ++i) lb = add(lb, lb_terms[i]);
    out.total = add(cls, scale(lb, lambda));
  }
  return out;
}

double accuracy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("accuracy: logits " + shape_str(logits.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels");
  }
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits.data().data() + r * classes;
    const auto best = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
    if (best == labels[r]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(rows);
}

double macro_auc(const Tensor& scores, std::span<const std::size_t> labels) {
  if (scores.rank() != 2 || scores.dim(0) != labels.size()) {
    throw DimensionError("macro_auc: scores " + shape_str(scores.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels");
  }
  const std::size_t rows = scores.dim(0), classes = scores.dim(1);
  std::vector<std::size_t> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw MetricError("macro_auc needs at least two distinct labels");

  std::vector<std::size_t> order(rows);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
    const std::size_t negatives = rows - positives;
    if (positives == 0 || negatives == 0) continue;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a * classes + c] < scores[b * classes + c]; });
    // Mann-Whitney U from mid-ranks (1-based).
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < rows;) {
      std::size_t j = i;
      while (j < rows && scores[order[j] * classes + c] == scores[order[i] * classes + c]) ++j;
      const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
      for (std::size_t t = i; t < j; ++t)
        if (labels[order[t]] == c) rank_sum += mid_rank;
      i = j;
    }
    const double p = static_cast<double>(positives), n = static_cast<double>(negatives);
    total += (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
    ++used;
  }
  return 100.0 * total / static_cast<double>(used);
}

double routing_purity(std::span<const std::size_t> top1, std::span<const std::size_t> groups,
                      std::size_t num_experts) {
  if (top1.size() != groups.size()) throw DimensionError("routing_purity: assignment and group counts differ");
  if (top1.empty()) throw ContractError("routing_purity needs at least one sample");
  std::map<std::size_t, std::vector<std::size_t>> counts;
  for (std::size_t i = 0; i < top1.size(); ++i) {
    if (top1[i] >= num_experts) throw DimensionError("routing_purity: expert index out of range");
    auto& c = counts[groups[i]];
    if (c.empty()) c.assign(num_experts, 0);
    ++c[top1[i]];
  }
  std::size_t modal = 0;
  for (const auto& [group, c] : counts) modal += *std::max_element(c.begin(), c.end());
  return static_cast<double>(modal) / static_cast<double>(top1.size());
}

double entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace dkgh
