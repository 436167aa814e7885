// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkgh/layers.hpp"
#include "dkgh/tensor.hpp"

namespace dkgh {

enum class Branch { kDataDriven, kDomainExpert };

/// "DD" or "DE".
const char* branch_name(Branch branch);

/// Routing decision of one branch for one sample.
struct RoutingRecord {
  std::string sample_id;
  std::size_t block_id = 0;
  Branch branch = Branch::kDataDriven;
  std::vector<double> raw_scores;     // N router outputs
  std::vector<std::size_t> selected;  // k indices, best first
  std::vector<double> weights;        // k combination weights
  double gate_p = 0.0;

  std::size_t top1() const { return selected.front(); }
};

/// Maps a routing feature to N raw expert scores.
struct Router {
  Mlp mlp;

  Router() = default;
  explicit Router(Mlp mlp);
  /// Two-layer router: feature -> max(8, feature / 2) -> num_experts.
  Router(std::size_t feature_width, std::size_t num_experts, Rng& rng);

  std::size_t num_experts() const { return mlp.out_features(); }
  std::size_t feature_width() const { return mlp.in_features(); }
};

struct ExpertBank {
  std::vector<ResidualBasicBlock> experts;

  ExpertBank() = default;
  explicit ExpertBank(std::vector<ResidualBasicBlock> experts);
  ExpertBank(std::size_t count, std::size_t in, std::size_t out, std::size_t stride, Rng& rng);

  std::size_t size() const { return experts.size(); }
};

/// Router + expert bank + top-k. The DD and DE branches are both MoeBranch
/// instances; they differ only in the routing feature fed to them.
struct MoeBranch {
  Router router;
  ExpertBank experts;
  std::size_t k = 1;
  // Per-sample expert evaluations since the last reset.
  mutable std::size_t evaluations = 0;

  MoeBranch() = default;
  MoeBranch(Router router, ExpertBank experts, std::size_t k);

  std::size_t num_experts() const { return experts.size(); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct RouteResult {
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // [B * k], best first per sample
  Tensor weights;                    // [B, k]
  Tensor raw_scores;                 // [B, N]
};

/// Indices of the k largest scores, highest first, ties to the lower index.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

/// Router scores, top-k selection and softmax over the selected scores.
RouteResult route(const MoeBranch& branch, const Tensor& routing_feature);

struct BranchOutput {
  Tensor h;
  RouteResult routing;
  std::vector<RoutingRecord> records;
};

/// h[b] = sum over selected j of weight[b, j] * E_j(x[b]). Only selected
/// experts run on a sample.
BranchOutput branch_forward(const MoeBranch& branch, const Tensor& x, const Tensor& routing_feature,
                            Branch kind = Branch::kDataDriven, std::size_t block_id = 0);

struct FusionGate {
  Linear w_p;  // [x_f || x_exp] -> 1

  FusionGate() = default;
  explicit FusionGate(Linear w_p);
  FusionGate(std::size_t image_width, std::size_t expert_width, Rng& rng);
};

/// p = sigmoid(w_p([x_f || x_exp])), shape [B, 1].
Tensor gate_value(const FusionGate& gate, const Tensor& x_f, const Tensor& x_exp);

/// One hybrid block: data-driven branch, gaze-routed branch and fusion gate.
struct DkghBlock {
  MoeBranch dd;
  MoeBranch de;
  FusionGate gate;
  std::size_t block_id = 0;

  DkghBlock() = default;
  DkghBlock(MoeBranch dd, MoeBranch de, FusionGate gate, std::size_t block_id = 0);
  /// Experts mirror ResidualBasicBlock(in, out, stride); the DE router and the
  /// gate read an expert feature of width `expert_width`.
  DkghBlock(std::size_t in, std::size_t out, std::size_t stride, std::size_t expert_width,
            std::size_t num_experts, std::size_t k, Rng& rng, std::size_t block_id = 0);

  std::size_t in_channels() const { return dd.experts.experts.front().in_channels(); }
  std::size_t expert_width() const { return de.router.feature_width(); }
  std::size_t evaluations() const { return dd.evaluations + de.evaluations; }
  void reset_evaluations() const { dd.evaluations = de.evaluations = 0; }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct DkghOutput {
  Tensor out;   // x_hat
  Tensor gate;  // p, [B, 1]
  BranchOutput dd;
  BranchOutput de;
};

/// x_hat = p * h_DE + (1 - p) * h_DD with x_f = global_avg_pool(x). A missing
/// expert feature is an error; there is no DD-only fallback.
DkghOutput dkgh_forward(const DkghBlock& block, const Tensor& x, const std::optional<Tensor>& x_exp);

struct RoutingStats {
  std::vector<double> f;      // top-1 usage frequency
  std::vector<double> p_bar;  // mean full softmax probability
};

/// Usage frequencies and mean routing probabilities over one batch of
/// records from a single branch.
RoutingStats batch_routing_stats(std::span<const RoutingRecord> records, std::size_t num_experts);

/// CSV: sample_id,block_id,branch,raw_score_0..N-1,top1_index,gate_p
void write_routing_header(std::ostream& out, std::size_t num_experts);
void write_routing_rows(std::ostream& out, std::span<const RoutingRecord> records);

}  // namespace dkgh
