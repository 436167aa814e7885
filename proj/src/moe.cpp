// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/moe.hpp"

#include "dkgh/config.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace dkgh {

const char* branch_name(Branch branch) { return branch == Branch::kDataDriven ? "DD" : "DE"; }

Router::Router(Mlp mlp_) : mlp(std::move(mlp_)) {}

Router::Router(std::size_t feature_width, std::size_t num_experts, Rng& rng)
    : mlp({feature_width, std::max<std::size_t>(8, feature_width / 2), num_experts}, rng) {}

ExpertBank::ExpertBank(std::vector<ResidualBasicBlock> experts_) : experts(std::move(experts_)) {
  if (experts.empty()) throw ConfigError("expert bank needs at least one expert");
  for (const auto& e : experts) {
    if (e.in_channels() != experts.front().in_channels() || e.out_channels() != experts.front().out_channels() ||
        e.conv1.stride != experts.front().conv1.stride) {
      throw ConfigError("experts in one bank must share a shape");
    }
  }
}

ExpertBank::ExpertBank(std::size_t count, std::size_t in, std::size_t out, std::size_t stride, Rng& rng) {
  if (count == 0) throw ConfigError("expert bank needs at least one expert");
  experts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) experts.emplace_back(in, out, stride, rng);
}

MoeBranch::MoeBranch(Router router_, ExpertBank experts_, std::size_t k_)
    : router(std::move(router_)), experts(std::move(experts_)), k(k_) {
  if (router.num_experts() != experts.size()) {
    throw ConfigError("router emits " + std::to_string(router.num_experts()) + " scores for " +
                      std::to_string(experts.size()) + " experts");
  }
  if (k < 1 || k > experts.size()) {
    throw ConfigError("top-k must lie in [1, " + std::to_string(experts.size()) + "], got " + std::to_string(k));
  }
}

void MoeBranch::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  router.mlp.collect(prefix + ".router", out);
  for (std::size_t i = 0; i < experts.size(); ++i) {
    experts.experts[i].collect(prefix + ".experts." + std::to_string(i), out);
  }
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw ConfigError("top-k must lie in [1, " + std::to_string(scores.size()) + "], got " + std::to_string(k));
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

RouteResult route(const MoeBranch& branch, const Tensor& routing_feature) {
  const std::size_t n = branch.num_experts();
  if (branch.k < 1 || branch.k > n) {
    throw ConfigError("top-k must lie in [1, " + std::to_string(n) + "], got " + std::to_string(branch.k));
  }
  if (routing_feature.rank() != 2 || routing_feature.dim(1) != branch.router.feature_width()) {
    throw DimensionError("route: feature " + shape_str(routing_feature.shape()) + " but router expects width " +
                         std::to_string(branch.router.feature_width()));
  }
  RouteResult result;
  result.k = branch.k;
  result.raw_scores = branch.router.mlp.forward(routing_feature);
  const std::size_t batch = routing_feature.dim(0);
  result.indices.reserve(batch * branch.k);
  for (std::size_t b = 0; b < batch; ++b) {
    auto row = result.raw_scores.data().subspan(b * n, n);
    auto top = top_k_indices(row, branch.k);
    result.indices.insert(result.indices.end(), top.begin(), top.end());
  }
  result.weights = softmax(gather_cols(result.raw_scores, result.indices, branch.k), 1);
  return result;
}

BranchOutput branch_forward(const MoeBranch& branch, const Tensor& x, const Tensor& routing_feature,
                            Branch kind, std::size_t block_id) {
  if (x.rank() != 4 || x.dim(0) != routing_feature.dim(0)) {
    throw DimensionError("branch_forward: input " + shape_str(x.shape()) + " vs routing feature " +
                         shape_str(routing_feature.shape()));
  }
  BranchOutput out;
  out.routing = route(branch, routing_feature);
  const std::size_t batch = x.dim(0), k = branch.k, n = branch.num_experts();

  std::optional<Tensor> h;
  for (std::size_t e = 0; e < n; ++e) {
    std::vector<std::size_t> rows, slots;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < k; ++j) {
        if (out.routing.indices[b * k + j] == e) {
          rows.push_back(b);
          slots.push_back(j);
        }
      }
    }
    if (rows.empty()) continue;
    branch.evaluations += rows.size();
    Tensor y = branch.experts.experts[e].forward(index_rows(x, rows));
    Tensor weighted = scale_rows(y, pick(out.routing.weights, rows, slots));
    Tensor placed = scatter_rows(weighted, rows, batch);
    h = h ? add(*h, placed) : placed;
  }
  out.h = *h;

  out.records.reserve(batch);
  const auto scores = out.routing.raw_scores.data();
  const auto weights = out.routing.weights.data();
  for (std::size_t b = 0; b < batch; ++b) {
    RoutingRecord r;
    r.sample_id = std::to_string(b);
    r.block_id = block_id;
    r.branch = kind;
    r.raw_scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(b * n),
                        scores.begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
    r.selected.assign(out.routing.indices.begin() + static_cast<std::ptrdiff_t>(b * k),
                      out.routing.indices.begin() + static_cast<std::ptrdiff_t>((b + 1) * k));
    r.weights.assign(weights.begin() + static_cast<std::ptrdiff_t>(b * k),
                     weights.begin() + static_cast<std::ptrdiff_t>((b + 1) * k));
    out.records.push_back(std::move(r));
  }
  return out;
}

FusionGate::FusionGate(Linear w_p_) : w_p(std::move(w_p_)) {
  if (w_p.out_features() != 1) throw ConfigError("fusion gate must produce one value per sample");
}

FusionGate::FusionGate(std::size_t image_width, std::size_t expert_width, Rng& rng)
    : w_p(image_width + expert_width, 1, rng) {}

Tensor gate_value(const FusionGate& gate, const Tensor& x_f, const Tensor& x_exp) {
  if (x_f.rank() != 2 || x_exp.rank() != 2 || x_f.dim(1) + x_exp.dim(1) != gate.w_p.in_features()) {
    throw DimensionError("gate: features " + shape_str(x_f.shape()) + " and " + shape_str(x_exp.shape()) +
                         " do not match gate input width " + std::to_string(gate.w_p.in_features()));
  }
  return sigmoid(gate.w_p.forward(concat_cols(x_f, x_exp)));
}

DkghBlock::DkghBlock(MoeBranch dd_, MoeBranch de_, FusionGate gate_, std::size_t block_id_)
    : dd(std::move(dd_)), de(std::move(de_)), gate(std::move(gate_)), block_id(block_id_) {
  const auto& a = dd.experts.experts.front();
  const auto& b = de.experts.experts.front();
  if (a.in_channels() != b.in_channels() || a.out_channels() != b.out_channels() ||
      a.conv1.stride != b.conv1.stride) {
    throw ConfigError("DD and DE experts must share a shape");
  }
  if (dd.router.feature_width() != a.in_channels()) {
    throw ConfigError("DD router must read the pooled input feature");
  }
  if (gate.w_p.in_features() != dd.router.feature_width() + de.router.feature_width()) {
    throw ConfigError("gate width must equal image feature width plus expert feature width");
  }
}

DkghBlock::DkghBlock(std::size_t in, std::size_t out, std::size_t stride, std::size_t expert_width,
                     std::size_t num_experts, std::size_t k, Rng& rng, std::size_t block_id_)
    : dd(Router(in, num_experts, rng), ExpertBank(num_experts, in, out, stride, rng), k),
      de(Router(expert_width, num_experts, rng), ExpertBank(num_experts, in, out, stride, rng), k),
      gate(in, expert_width, rng),
      block_id(block_id_) {}

void DkghBlock::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  dd.collect(prefix + ".dd", out);
  de.collect(prefix + ".de", out);
  gate.w_p.collect(prefix + ".gate", out);
}

DkghOutput dkgh_forward(const DkghBlock& block, const Tensor& x, const std::optional<Tensor>& x_exp) {
  if (!x_exp) throw ContractError("DKGH block requires the expert feature for every sample");
  if (x.rank() != 4) throw DimensionError("DKGH block expects [B,C,H,W], got " + shape_str(x.shape()));
  if (x_exp->rank() != 2 || x_exp->dim(0) != x.dim(0)) {
    throw ContractError("expert feature " + shape_str(x_exp->shape()) + " does not cover batch of " +
                        std::to_string(x.dim(0)));
  }
  DkghOutput out;
  const Tensor x_f = global_avg_pool(x);
  out.dd = branch_forward(block.dd, x, x_f, Branch::kDataDriven, block.block_id);
  out.de = branch_forward(block.de, x, *x_exp, Branch::kDomainExpert, block.block_id);
  out.gate = gate_value(block.gate, x_f, *x_exp);
  out.out = lerp_rows(out.dd.h, out.de.h, out.gate);
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    out.dd.records[b].gate_p = out.gate[b];
    out.de.records[b].gate_p = out.gate[b];
  }
  return out;
}

RoutingStats batch_routing_stats(std::span<const RoutingRecord> records, std::size_t num_experts) {
  if (records.empty()) throw ContractError("routing statistics need at least one record");
  RoutingStats stats{std::vector<double>(num_experts, 0.0), std::vector<double>(num_experts, 0.0)};
  std::vector<double> probs(num_experts);
  for (const auto& r : records) {
    if (r.raw_scores.size() != num_experts) throw DimensionError("routing record has wrong score width");
    stats.f[r.top1()] += 1.0;
    const double mx = *std::max_element(r.raw_scores.begin(), r.raw_scores.end());
    double total = 0.0;
    for (std::size_t i = 0; i < num_experts; ++i) total += probs[i] = std::exp(r.raw_scores[i] - mx);
    for (std::size_t i = 0; i < num_experts; ++i) stats.p_bar[i] += probs[i] / total;
  }
  const double m = static_cast<double>(records.size());
  for (auto& v : stats.f) v /= m;
  for (auto& v : stats.p_bar) v /= m;
  return stats;
}

void write_routing_header(std::ostream& out, std::size_t num_experts) {
  out << "sample_id,block_id,branch";
  for (std::size_t i = 0; i < num_experts; ++i) out << ",raw_score_" << i;
  out << ",top1_index,gate_p\n";
}

void write_routing_rows(std::ostream& out, std::span<const RoutingRecord> records) {
  for (const auto& r : records) {
    out << r.sample_id << ',' << r.block_id << ',' << branch_name(r.branch);
    for (double s : r.raw_scores) out << ',' << format_real(s);
    out << ',' << r.top1() << ',' << format_real(r.gate_p) << '\n';
  }
}

}  // namespace dkgh
