// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "dkgh/config.hpp"
#include "dkgh/layers.hpp"
#include "dkgh/moe.hpp"
#include "dkgh/serialize.hpp"

namespace dkgh {

struct BlockPosition {
  std::size_t stage = 0;
  std::size_t block = 0;
  auto operator<=>(const BlockPosition&) const = default;
};

struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t stem_channels = 16;
  std::size_t stem_stride = 1;
  std::vector<std::size_t> stage_channels = {16, 32};
  std::vector<std::size_t> stage_blocks = {2, 2};
  std::vector<BlockPosition> dkgh_positions = {{0, 1}, {1, 1}};
  std::size_t num_experts = 4;
  std::size_t top_k = 1;
  std::size_t gaze_width = 16;     // d2, width of x_exp
  std::size_t gaze_channels = 8;   // gaze encoder conv width
  std::size_t num_classes = 3;
  std::uint64_t seed = 0;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  /// Small net used by tests and the gradient check: 2 stages, one hybrid block.
  static ModelConfig toy();

  void to_kv(KeyValues& kv) const;
  static ModelConfig from_kv(const KeyValues& kv);
  static ModelConfig from_kv(const KeyValues& kv, ModelConfig defaults);
};

std::string format_positions(const std::vector<BlockPosition>& positions);
std::vector<BlockPosition> parse_positions(const std::string& text);

/// 3 stride-2 relu convs, global average pool, then a linear map to d2.
struct GazeEncoder {
  Conv2d conv1, conv2, conv3;
  Linear out;

  GazeEncoder() = default;
  GazeEncoder(std::size_t channels, std::size_t width, Rng& rng);

  std::size_t width() const { return out.out_features(); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Heatmap values must lie in [0, 1]; otherwise ValidationError.
Tensor encode_gaze(const GazeEncoder& enc, const Tensor& heatmap);

/// A hybrid block plus the projection adapting x_exp to its width.
struct HybridSlot {
  Linear gaze_projection;
  DkghBlock block;
};

using NetBlock = std::variant<ResidualBasicBlock, HybridSlot>;

struct NetOutput {
  Tensor logits;
  std::vector<DkghOutput> hybrid;        // one per hybrid block, network order
  std::vector<RoutingRecord> records;    // per block: DD rows then DE rows
};

class DkghNet {
 public:
  explicit DkghNet(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::size_t hybrid_block_count() const { return hybrid_count_; }
  bool baseline() const { return hybrid_count_ == 0; }

  /// Parameters in a fixed order with hierarchical names.
  std::vector<NamedTensor> parameters() const;

  NetOutput forward(const Tensor& image, const std::optional<Tensor>& heatmap) const;

  /// Sum of per-sample expert evaluations across hybrid blocks since reset.
  std::size_t expert_evaluations() const;
  void reset_expert_evaluations() const;

  const std::vector<std::vector<NetBlock>>& stages() const { return stages_; }
  /// Absent in baseline mode.
  const std::optional<GazeEncoder>& gaze_encoder() const { return gaze_; }

 private:
  ModelConfig config_;
  Conv2d stem_;
  std::vector<std::vector<NetBlock>> stages_;
  std::optional<GazeEncoder> gaze_;
  Linear head_;
  std::size_t hybrid_count_ = 0;
};

NetOutput net_forward(const DkghNet& net, const Tensor& image, const std::optional<Tensor>& heatmap);

/// Expert evaluations performed by one forward pass over the batch.
std::size_t count_expert_evals(const DkghNet& net, const Tensor& image, const Tensor& heatmap);

/// Checkpoint directory: config.txt, params.txt (name shape file) and one
/// DKT1 file per parameter. `extra` entries are stored alongside the model
/// configuration.
void save_checkpoint(const std::filesystem::path& dir, const DkghNet& net, const KeyValues& extra = {},
                     DType dtype = DType::kF64);

struct LoadedCheckpoint {
  DkghNet net;
  KeyValues config;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace dkgh
