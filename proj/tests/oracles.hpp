// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

// Slow reference implementations used to check the metric and loss code.

#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <vector>

namespace dkgh::oracle {

using Table = std::vector<std::vector<double>>;  // [M][C]

/// Mean cross-entropy in extended precision.
inline long double cross_entropy(const Table& logits, const std::vector<std::size_t>& labels) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    long double m = logits[i][0];
    for (double z : logits[i]) m = std::max<long double>(m, z);
    long double s = 0.0L;
    for (double z : logits[i]) s += std::exp(static_cast<long double>(z) - m);
    total += m + std::log(s) - logits[i][labels[i]];
  }
  return total / logits.size();
}

inline double accuracy(const Table& scores, const std::vector<std::size_t>& labels) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores[i].size(); ++c)
      if (scores[i][c] > scores[i][best]) best = c;
    hit += best == labels[i];
  }
  return 100.0 * double(hit) / double(scores.size());
}

/// Macro one-vs-rest AUC by counting every positive/negative pair. Returns a
/// negative value when fewer than two labels are present.
inline double macro_auc(const Table& scores, const std::vector<std::size_t>& labels) {
  if (std::set<std::size_t>(labels.begin(), labels.end()).size() < 2) return -1.0;
  double sum = 0.0;
  int used = 0;
  for (std::size_t c = 0; c < scores[0].size(); ++c) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] != c) continue;
      for (std::size_t j = 0; j < scores.size(); ++j) {
        if (labels[j] == c) continue;
        ++pairs;
        if (scores[i][c] > scores[j][c]) wins += 1.0;
        else if (scores[i][c] == scores[j][c]) wins += 0.5;
      }
    }
    if (pairs == 0) continue;
    sum += wins / double(pairs);
    ++used;
  }
  return 100.0 * sum / used;
}

}  // namespace dkgh::oracle
