// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkgh/config.hpp"
#include "dkgh/data.hpp"
#include "dkgh/gradcheck.hpp"
#include "dkgh/model.hpp"
#include "dkgh/serialize.hpp"

namespace dkgh {

struct TrainConfig {
  double lr = 5e-4;
  std::size_t step_size = 10;
  double gamma = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lambda = 0.01;
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::size_t folds = 5;
  DType precision = DType::kF64;
  ModelConfig model;  // N and k live here
  AugmentConfig augment;

  void validate() const;
  void to_kv(KeyValues& kv) const;
  /// Unknown keys are rejected with ConfigError.
  static TrainConfig from_kv(const KeyValues& kv);
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

/// One bias-corrected Adam update of every parameter from its gradient
/// buffer. A non-finite gradient aborts before anything changes.
void adam_step(AdamState& state, std::span<const NamedTensor> params, double lr);

double step_lr(std::size_t epoch, double base_lr, std::size_t step_size, double gamma);

/// Rounds parameter values to binary32 in place.
void round_to_f32(std::span<const NamedTensor> params);

struct BranchUsage {
  std::size_t block_id = 0;
  Branch branch = Branch::kDataDriven;
  std::vector<double> f;  // top-1 usage frequency over the split
};

struct SplitMetrics {
  std::size_t samples = 0;
  double loss_cls = 0.0;
  double loss_lb = 0.0;
  double loss_total = 0.0;
  double acc = 0.0;
  double auc = 0.0;
  std::vector<BranchUsage> usage;  // one entry per hybrid block and branch
  std::vector<RoutingRecord> records;
  /// Mean usage entropy over blocks and branches; 0 in baseline mode.
  double usage_entropy() const;
};

/// Forward passes in manifest order, batch by batch, without updates. The
/// load-balancing term uses per-batch frequencies.
SplitMetrics evaluate_rows(const DkghNet& net, const SampleStore& store, std::span<const std::size_t> rows,
                           std::size_t batch_size, double lambda);

struct TrainResult {
  SplitMetrics final_train;
  SplitMetrics final_test;
  std::size_t best_epoch = 0;
  double best_auc = 0.0;
  std::filesystem::path best_checkpoint;  // out/checkpoint
  std::filesystem::path last_checkpoint;  // out/last
  std::filesystem::path metrics_csv;      // out/metrics.csv
};

/// Subject-wise fold `cfg.fold` of `cfg.folds`, uniform class sampling,
/// L = L_cls + lambda * sum of per-branch load-balancing terms.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                  std::ostream* log = nullptr);

struct PurityEntry {
  std::size_t block_id = 0;
  Branch branch = Branch::kDataDriven;
  double purity = 0.0;
};

struct EvalResult {
  SplitMetrics test;
  std::vector<PurityEntry> purity;  // empty without a groups.csv sidecar
};

/// Loads a checkpoint, rebuilds the fold split from its stored seed and fold
/// count, evaluates the test split of `fold` and optionally writes the
/// routing CSV.
EvalResult evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest, std::size_t fold,
                    const std::optional<std::filesystem::path>& routing_csv = std::nullopt);

/// Routing purity of each hybrid branch against `groups` keyed by sample id.
std::vector<PurityEntry> routing_purity_by_branch(std::span<const RoutingRecord> records,
                                                  const std::map<std::string, std::size_t>& groups,
                                                  std::size_t num_experts);

struct ModelGradCheck {
  ModelConfig model = ModelConfig::toy();
  std::size_t batch = 2;
  std::size_t image_size = 32;
  double lambda = 0.01;
  GradCheckOptions options{1e-5, 1e-4, 1e-6, 24, 0};

  /// Model keys plus batch, image_size, lambda, eps, tol, abs_floor,
  /// max_coords and seed.
  static ModelGradCheck from_kv(const KeyValues& kv);
};

/// Finite-difference check of cross-entropy plus the load-balancing terms
/// of a seeded net on seeded random images and heatmaps.
GradCheckReport gradcheck_model(const ModelGradCheck& setup);

}  // namespace dkgh
