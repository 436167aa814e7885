// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dkgh {

// --- ModelConfig ---------------------------------------------------------------

void ModelConfig::validate() const {
  if (in_channels == 0 || stem_channels == 0 || stem_stride == 0) throw ConfigError("stem sizes must be positive");
  if (stage_channels.empty() || stage_channels.size() != stage_blocks.size()) {
    throw ConfigError("stage_channels and stage_blocks must be non-empty and equally long");
  }
  for (std::size_t s = 0; s < stage_channels.size(); ++s) {
    if (stage_channels[s] == 0 || stage_blocks[s] == 0) throw ConfigError("stage sizes must be positive");
  }
  if (num_experts < 1) throw ConfigError("num_experts must be >= 1");
  if (top_k < 1 || top_k > num_experts) {
    throw ConfigError("top_k must lie in [1, num_experts], got " + std::to_string(top_k));
  }
  if (gaze_width == 0 || gaze_channels == 0) throw ConfigError("gaze encoder sizes must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  for (const auto& p : dkgh_positions) {
    if (p.stage >= stage_blocks.size() || p.block >= stage_blocks[p.stage]) {
      throw ConfigError("hybrid block position " + std::to_string(p.stage) + ":" + std::to_string(p.block) +
                        " is outside the backbone");
    }
  }
  auto sorted = dkgh_positions;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("duplicate hybrid block position");
  }
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.stem_channels = 8;
  c.stem_stride = 2;
  c.stage_channels = {8, 16};
  c.stage_blocks = {1, 2};
  c.dkgh_positions = {{1, 1}};
  c.num_experts = 2;
  c.top_k = 1;
  c.gaze_width = 8;
  c.gaze_channels = 4;
  return c;
}

std::string format_positions(const std::vector<BlockPosition>& positions) {
  std::string out;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(positions[i].stage) + ":" + std::to_string(positions[i].block);
  }
  return out;
}

std::vector<BlockPosition> parse_positions(const std::string& text) {
  std::vector<BlockPosition> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError("hybrid position '" + item + "' is not stage:block");
    try {
      std::size_t used_a = 0, used_b = 0;
      const std::string a = item.substr(0, colon), b = item.substr(colon + 1);
      BlockPosition p{std::stoul(a, &used_a), std::stoul(b, &used_b)};
      if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument("trailing");
      out.push_back(p);
    } catch (const std::exception&) {
      throw ValidationError("hybrid position '" + item + "' is not stage:block");
    }
  }
  return out;
}

void ModelConfig::to_kv(KeyValues& kv) const {
  kv.set("in_channels", std::to_string(in_channels));
  kv.set("stem_channels", std::to_string(stem_channels));
  kv.set("stem_stride", std::to_string(stem_stride));
  kv.set("stage_channels", join_sizes(stage_channels));
  kv.set("stage_blocks", join_sizes(stage_blocks));
  kv.set("dkgh_positions", format_positions(dkgh_positions));
  kv.set("N", std::to_string(num_experts));
  kv.set("k", std::to_string(top_k));
  kv.set("gaze_width", std::to_string(gaze_width));
  kv.set("gaze_channels", std::to_string(gaze_channels));
  kv.set("num_classes", std::to_string(num_classes));
  kv.set("seed", std::to_string(seed));
}

ModelConfig ModelConfig::from_kv(const KeyValues& kv) { return from_kv(kv, ModelConfig{}); }

ModelConfig ModelConfig::from_kv(const KeyValues& kv, ModelConfig d) {
  ModelConfig c;
  c.in_channels = kv.get_size("in_channels", d.in_channels);
  c.stem_channels = kv.get_size("stem_channels", d.stem_channels);
  c.stem_stride = kv.get_size("stem_stride", d.stem_stride);
  c.stage_channels = kv.get_sizes("stage_channels", d.stage_channels);
  c.stage_blocks = kv.get_sizes("stage_blocks", d.stage_blocks);
  c.dkgh_positions = kv.has("dkgh_positions") ? parse_positions(kv.get_string("dkgh_positions", ""))
                                              : d.dkgh_positions;
  c.num_experts = kv.get_size("N", d.num_experts);
  c.top_k = kv.get_size("k", d.top_k);
  c.gaze_width = kv.get_size("gaze_width", d.gaze_width);
  c.gaze_channels = kv.get_size("gaze_channels", d.gaze_channels);
  c.num_classes = kv.get_size("num_classes", d.num_classes);
  c.seed = static_cast<std::uint64_t>(kv.get_size("seed", d.seed));
  c.validate();
  return c;
}

// --- GazeEncoder ---------------------------------------------------------------

GazeEncoder::GazeEncoder(std::size_t channels, std::size_t width, Rng& rng)
    : conv1(1, channels, 3, 2, 1, rng),
      conv2(channels, channels, 3, 2, 1, rng),
      conv3(channels, channels, 3, 2, 1, rng),
      out(channels, width, rng) {}

void GazeEncoder::collect(const std::string& prefix, std::vector<NamedTensor>& params) const {
  conv1.collect(prefix + ".conv1", params);
  conv2.collect(prefix + ".conv2", params);
  conv3.collect(prefix + ".conv3", params);
  out.collect(prefix + ".out", params);
}

Tensor encode_gaze(const GazeEncoder& enc, const Tensor& heatmap) {
  if (heatmap.rank() != 4 || heatmap.dim(1) != 1) {
    throw DimensionError("gaze heatmap must be [B,1,H,W], got " + shape_str(heatmap.shape()));
  }
  for (double v : heatmap.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("gaze heatmap values must lie in [0, 1]");
  }
  Tensor h = relu(enc.conv1.forward(heatmap));
  h = relu(enc.conv2.forward(h));
  h = relu(enc.conv3.forward(h));
  return enc.out.forward(global_avg_pool(h));
}

// --- DkghNet -------------------------------------------------------------------

DkghNet::DkghNet(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.seed);
  stem_ = Conv2d(config_.in_channels, config_.stem_channels, 3, config_.stem_stride, 1, rng);

  std::size_t channels = config_.stem_channels;
  for (std::size_t s = 0; s < config_.stage_channels.size(); ++s) {
    std::vector<NetBlock> stage;
    const std::size_t out = config_.stage_channels[s];
    for (std::size_t b = 0; b < config_.stage_blocks[s]; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      const bool hybrid = std::find(config_.dkgh_positions.begin(), config_.dkgh_positions.end(),
                                    BlockPosition{s, b}) != config_.dkgh_positions.end();
      if (hybrid) {
        Linear projection(config_.gaze_width, channels, rng);
        DkghBlock block(channels, out, stride, channels, config_.num_experts, config_.top_k, rng, hybrid_count_);
        stage.emplace_back(HybridSlot{std::move(projection), std::move(block)});
        ++hybrid_count_;
      } else {
        stage.emplace_back(ResidualBasicBlock(channels, out, stride, rng));
      }
      channels = out;
    }
    stages_.push_back(std::move(stage));
  }
  if (hybrid_count_ > 0) gaze_.emplace(config_.gaze_channels, config_.gaze_width, rng);
  head_ = Linear(channels, config_.num_classes, rng);
}

std::vector<NamedTensor> DkghNet::parameters() const {
  std::vector<NamedTensor> params;
  stem_.collect("stem", params);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const std::string prefix = "stage" + std::to_string(s) + ".block" + std::to_string(b);
      if (const auto* res = std::get_if<ResidualBasicBlock>(&stages_[s][b])) {
        res->collect(prefix, params);
      } else {
        const auto& slot = std::get<HybridSlot>(stages_[s][b]);
        slot.gaze_projection.collect(prefix + ".gaze_proj", params);
        slot.block.collect(prefix, params);
      }
    }
  }
  if (gaze_) gaze_->collect("gaze", params);
  head_.collect("head", params);
  return params;
}

NetOutput DkghNet::forward(const Tensor& image, const std::optional<Tensor>& heatmap) const {
  if (image.rank() != 4 || image.dim(1) != config_.in_channels) {
    throw DimensionError("image batch must be [B," + std::to_string(config_.in_channels) + ",H,W], got " +
                         shape_str(image.shape()));
  }
  if (heatmap && heatmap->dim(0) != image.dim(0)) {
    throw ContractError("image batch of " + std::to_string(image.dim(0)) + " but heatmap batch of " +
                        std::to_string(heatmap->dim(0)));
  }
  std::optional<Tensor> x_exp;
  if (!baseline()) {
    if (!heatmap) throw ContractError("hybrid blocks need a gaze heatmap for every sample");
    x_exp = encode_gaze(*gaze_, *heatmap);
  }

  NetOutput out;
  Tensor x = relu(stem_.forward(image));
  for (const auto& stage : stages_) {
    for (const auto& blk : stage) {
      if (const auto* res = std::get_if<ResidualBasicBlock>(&blk)) {
        x = res->forward(x);
        continue;
      }
      const auto& slot = std::get<HybridSlot>(blk);
      DkghOutput h = dkgh_forward(slot.block, x, slot.gaze_projection.forward(*x_exp));
      x = h.out;
      out.records.insert(out.records.end(), h.dd.records.begin(), h.dd.records.end());
      out.records.insert(out.records.end(), h.de.records.begin(), h.de.records.end());
      out.hybrid.push_back(std::move(h));
    }
  }
  out.logits = head_.forward(global_avg_pool(x));
  return out;
}

std::size_t DkghNet::expert_evaluations() const {
  std::size_t total = 0;
  for (const auto& stage : stages_)
    for (const auto& blk : stage)
      if (const auto* slot = std::get_if<HybridSlot>(&blk)) total += slot->block.evaluations();
  return total;
}

void DkghNet::reset_expert_evaluations() const {
  for (const auto& stage : stages_)
    for (const auto& blk : stage)
      if (const auto* slot = std::get_if<HybridSlot>(&blk)) slot->block.reset_evaluations();
}

NetOutput net_forward(const DkghNet& net, const Tensor& image, const std::optional<Tensor>& heatmap) {
  return net.forward(image, heatmap);
}

std::size_t count_expert_evals(const DkghNet& net, const Tensor& image, const Tensor& heatmap) {
  net.reset_expert_evaluations();
  net.forward(image, heatmap);
  return net.expert_evaluations();
}

// --- checkpoints ---------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& dir, const DkghNet& net, const KeyValues& extra, DType dtype) {
  std::filesystem::create_directories(dir);
  KeyValues kv = extra;
  net.config().to_kv(kv);
  kv.set("dtype", dtype == DType::kF64 ? "f64" : "f32");
  {
    std::ofstream cfg(dir / "config.txt", std::ios::trunc);
    if (!cfg) throw FormatError("cannot write " + (dir / "config.txt").string());
    kv.write(cfg);
  }
  std::ofstream manifest(dir / "params.txt", std::ios::trunc);
  if (!manifest) throw FormatError("cannot write " + (dir / "params.txt").string());
  for (const auto& p : net.parameters()) {
    const std::string file = p.name + ".dkt";
    manifest << p.name << ' ' << join_sizes(p.tensor.shape()) << ' ' << file << '\n';
    save_tensor(dir / file, p.tensor, dtype);
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("checkpoint directory " + dir.string() + " not found");
  KeyValues kv = KeyValues::load(dir / "config.txt");
  DkghNet net(ModelConfig::from_kv(kv));
  kv.get_string("dtype", "f64");

  std::ifstream manifest(dir / "params.txt");
  if (!manifest) throw FormatError("checkpoint " + dir.string() + " has no params.txt");
  auto params = net.parameters();
  std::size_t row = 0;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, shape, file;
    if (!(ls >> name >> shape >> file)) throw FormatError("params.txt line " + std::to_string(row + 1) + " malformed");
    if (row >= params.size() || params[row].name != name) {
      throw FormatError("checkpoint parameter '" + name + "' does not match the configured model");
    }
    Tensor loaded = load_tensor(dir / file);
    if (loaded.shape() != params[row].tensor.shape() || join_sizes(loaded.shape()) != shape) {
      throw FormatError("checkpoint parameter '" + name + "' has shape " + shape_str(loaded.shape()) +
                        ", model expects " + shape_str(params[row].tensor.shape()));
    }
    auto dst = params[row].tensor.mutable_data();
    std::copy(loaded.data().begin(), loaded.data().end(), dst.begin());
    ++row;
  }
  if (row != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(row) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  return {std::move(net), std::move(kv)};
}

}  // namespace dkgh
