// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "dkgh/losses.hpp"

namespace dkgh {

// --- configuration ---------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (step_size == 0) throw ConfigError("step_size must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (fold >= folds) throw ConfigError("fold " + std::to_string(fold) + " outside [0, " + std::to_string(folds) + ")");
  model.validate();
  augment.validate();
}

void TrainConfig::to_kv(KeyValues& kv) const {
  model.to_kv(kv);
  kv.set("lr", format_real(lr));
  kv.set("step_size", std::to_string(step_size));
  kv.set("gamma", format_real(gamma));
  kv.set("epochs", std::to_string(epochs));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("lambda", format_real(lambda));
  kv.set("seed", std::to_string(seed));
  kv.set("fold", std::to_string(fold));
  kv.set("folds", std::to_string(folds));
  kv.set("precision", precision == DType::kF32 ? "f32" : "f64");
  kv.set("augment", augment.enabled ? "true" : "false");
  kv.set("brightness_lo", format_real(augment.brightness_lo));
  kv.set("brightness_hi", format_real(augment.brightness_hi));
  kv.set("noise_sigma", format_real(augment.noise_sigma));
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
  TrainConfig c;
  c.lr = kv.get_real("lr", c.lr);
  c.step_size = kv.get_size("step_size", c.step_size);
  c.gamma = kv.get_real("gamma", c.gamma);
  c.epochs = kv.get_size("epochs", c.epochs);
  c.batch_size = kv.get_size("batch_size", c.batch_size);
  c.lambda = kv.get_real("lambda", c.lambda);
  c.seed = static_cast<std::uint64_t>(kv.get_size("seed", c.seed));
  c.fold = kv.get_size("fold", c.fold);
  c.folds = kv.get_size("folds", c.folds);
  const std::string precision = kv.get_string("precision", "f64");
  if (precision == "f64") {
    c.precision = DType::kF64;
  } else if (precision == "f32") {
    c.precision = DType::kF32;
  } else {
    throw ConfigError("precision must be f32 or f64, got '" + precision + "'");
  }
  c.augment.enabled = kv.get_bool("augment", c.augment.enabled);
  c.augment.brightness_lo = kv.get_real("brightness_lo", c.augment.brightness_lo);
  c.augment.brightness_hi = kv.get_real("brightness_hi", c.augment.brightness_hi);
  c.augment.noise_sigma = kv.get_real("noise_sigma", c.augment.noise_sigma);
  ModelConfig defaults;
  defaults.seed = c.seed;
  c.model = ModelConfig::from_kv(kv, defaults);
  const auto unused = kv.unused_keys();
  if (!unused.empty()) throw ConfigError("unknown config key '" + unused.front() + "'");
  c.validate();
  return c;
}

// --- optimization ----------------------------------------------------------------

void adam_step(AdamState& state, std::span<const NamedTensor> params, double lr) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.numel(), 0.0);
      state.v.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: parameter list changed between steps");
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].tensor.numel()) {
      throw ContractError("adam_step: moment shape mismatch for " + params[i].name);
    }
    grads.push_back(params[i].tensor.grad());
    for (std::size_t j = 0; j < grads.back().size(); ++j) {
      if (!std::isfinite(grads.back()[j])) {
        throw std::domain_error("adam_step: non-finite gradient in " + params[i].name + " at index " +
                                std::to_string(j));
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    auto values = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grads[i][j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      values[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

double step_lr(std::size_t epoch, double base_lr, std::size_t step_size, double gamma) {
  if (step_size == 0) throw ConfigError("step_size must be positive");
  return base_lr * std::pow(gamma, static_cast<double>(epoch / step_size));
}

void round_to_f32(std::span<const NamedTensor> params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    for (auto& v : t.mutable_data()) v = static_cast<double>(static_cast<float>(v));
  }
}

// --- metrics -----------------------------------------------------------------------

double SplitMetrics::usage_entropy() const {
  if (usage.empty()) return 0.0;
  double total = 0.0;
  for (const auto& u : usage) total += entropy(u.f);
  return total / static_cast<double>(usage.size());
}

namespace {

struct BatchObjective {
  Objective objective;
  NetOutput out;
};

// f is taken from this batch's top-1 choices and held constant.
BatchObjective batch_objective(const DkghNet& net, const Batch& batch, double lambda) {
  std::optional<Tensor> heat;
  if (!net.baseline()) heat = batch.heatmaps;
  NetOutput out = net.forward(batch.images, heat);
  // Records come in runs of one row per sample, in batch order.
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].sample_id = batch.ids[i % batch.ids.size()];
  Tensor cls = cross_entropy(out.logits, batch.labels);
  std::vector<Tensor> lb;
  const std::size_t n = net.config().num_experts;
  for (const auto& h : out.hybrid) {
    for (const BranchOutput* br : {&h.dd, &h.de}) {
      const auto stats = batch_routing_stats(br->records, n);
      lb.push_back(load_balance_term(br->routing.raw_scores, stats.f));
    }
  }
  return {combine_objective(cls, lb, lambda), std::move(out)};
}

std::vector<BranchUsage> usage_from_records(std::span<const RoutingRecord> records, std::size_t num_experts) {
  std::vector<BranchUsage> usage;
  std::vector<std::size_t> totals;
  for (const auto& r : records) {
    auto it = std::find_if(usage.begin(), usage.end(),
                           [&](const BranchUsage& u) { return u.block_id == r.block_id && u.branch == r.branch; });
    if (it == usage.end()) {
      usage.push_back({r.block_id, r.branch, std::vector<double>(num_experts, 0.0)});
      totals.push_back(0);
      it = usage.end() - 1;
    }
    it->f[r.top1()] += 1.0;
    ++totals[static_cast<std::size_t>(it - usage.begin())];
  }
  for (std::size_t i = 0; i < usage.size(); ++i) {
    for (auto& v : usage[i].f) v /= static_cast<double>(totals[i]);
  }
  std::sort(usage.begin(), usage.end(), [](const BranchUsage& a, const BranchUsage& b) {
    return std::pair(a.block_id, a.branch) < std::pair(b.block_id, b.branch);
  });
  return usage;
}

// Scores, labels and losses accumulated over batches.
struct Accumulator {
  std::vector<double> logits;
  std::vector<std::size_t> labels;
  std::vector<RoutingRecord> records;
  double cls = 0.0, lb = 0.0, total = 0.0;
  std::size_t samples = 0;
  std::size_t classes = 0;

  void add(const BatchObjective& b, std::span<const std::size_t> batch_labels) {
    const auto& bd = b.objective.breakdown;
    const double w = static_cast<double>(batch_labels.size());
    cls += w * bd.cls;
    lb += w * bd.lb;
    total += w * bd.total;
    samples += batch_labels.size();
    classes = b.out.logits.dim(1);
    logits.insert(logits.end(), b.out.logits.data().begin(), b.out.logits.data().end());
    labels.insert(labels.end(), batch_labels.begin(), batch_labels.end());
    records.insert(records.end(), b.out.records.begin(), b.out.records.end());
  }

  SplitMetrics finish(std::size_t num_experts) {
    SplitMetrics m;
    m.samples = samples;
    if (samples == 0) return m;
    const double n = static_cast<double>(samples);
    m.loss_cls = cls / n;
    m.loss_lb = lb / n;
    m.loss_total = total / n;
    const Tensor scores({samples, classes}, logits);
    m.acc = accuracy(scores, labels);
    try {
      m.auc = macro_auc(softmax(scores, 1), labels);
    } catch (const MetricError&) {
      m.auc = std::nan("");
    }
    m.usage = usage_from_records(records, num_experts);
    m.records = std::move(records);
    return m;
  }
};

void write_metrics_header(std::ostream& out, const DkghNet& net) {
  out << "epoch,split,lr,loss_cls,loss_lb,loss_total,acc,auc";
  for (std::size_t b = 0; b < net.hybrid_block_count(); ++b) {
    for (const char* br : {"DD", "DE"}) {
      for (std::size_t i = 0; i < net.config().num_experts; ++i) out << ",block" << b << '_' << br << "_f" << i;
    }
  }
  out << '\n';
}

void write_metrics_row(std::ostream& out, std::size_t epoch, const char* split, double lr, const SplitMetrics& m) {
  out << epoch << ',' << split << ',' << format_real(lr) << ',' << format_real(m.loss_cls) << ','
      << format_real(m.loss_lb) << ',' << format_real(m.loss_total) << ',' << format_real(m.acc) << ','
      << format_real(m.auc);
  for (const auto& u : m.usage) {
    for (double f : u.f) out << ',' << format_real(f);
  }
  out << '\n';
}

std::vector<std::size_t> labels_of(const SampleStore& store, std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  for (auto r : rows) out.push_back(store.rows()[r].label);
  return out;
}

void check_compatible(const DkghNet& net, const SampleStore& store) {
  const auto& cfg = net.config();
  for (const auto& r : store.rows()) {
    if (r.label >= cfg.num_classes) {
      throw ValidationError("sample '" + r.sample_id + "' has label " + std::to_string(r.label) +
                            " but the model has " + std::to_string(cfg.num_classes) + " classes");
    }
  }
  if (cfg.in_channels != 1) throw ValidationError("PGM samples have 1 channel, model expects " +
                                                  std::to_string(cfg.in_channels));
}

}  // namespace

SplitMetrics evaluate_rows(const DkghNet& net, const SampleStore& store, std::span<const std::size_t> rows,
                           std::size_t batch_size, double lambda) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  Accumulator acc;
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const auto chunk = rows.subspan(start, std::min(batch_size, rows.size() - start));
    const Batch batch = store.gather(chunk);
    acc.add(batch_objective(net, batch, lambda), batch.labels);
  }
  return acc.finish(net.config().num_experts);
}

// --- training ------------------------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                  std::ostream* log) {
  cfg.validate();
  auto rows = load_manifest(manifest, cfg.model.num_classes);
  const auto folds = subject_kfold(rows, cfg.folds, cfg.seed);
  const Fold& fold = folds[cfg.fold];
  const SampleStore store(manifest, std::move(rows));

  ModelConfig model_cfg = cfg.model;
  model_cfg.seed = cfg.seed;
  DkghNet net(model_cfg);
  check_compatible(net, store);
  const auto params = net.parameters();
  if (cfg.precision == DType::kF32) round_to_f32(params);

  std::filesystem::create_directories(out_dir);
  TrainResult result;
  result.best_checkpoint = out_dir / "checkpoint";
  result.last_checkpoint = out_dir / "last";
  result.metrics_csv = out_dir / "metrics.csv";
  std::ofstream csv(result.metrics_csv, std::ios::trunc);
  if (!csv) throw FormatError("cannot write " + result.metrics_csv.string());
  write_metrics_header(csv, net);

  KeyValues extra;
  cfg.to_kv(extra);
  auto save = [&](const std::filesystem::path& dir, std::size_t epoch) {
    KeyValues kv = extra;
    kv.set("epoch", std::to_string(epoch));
    save_checkpoint(dir, net, kv, cfg.precision);
  };

  const std::span<const std::size_t> test_rows = fold.test_rows;
  const auto train_labels = labels_of(store, fold.train_rows);
  UniformClassSampler sampler(train_labels, cfg.batch_size, cfg.seed + 1, cfg.model.num_classes);
  Rng aug_rng(cfg.seed + 2);

  result.final_train = evaluate_rows(net, store, fold.train_rows, cfg.batch_size, cfg.lambda);
  result.final_test = evaluate_rows(net, store, test_rows, cfg.batch_size, cfg.lambda);
  write_metrics_row(csv, 0, "train", cfg.lr, result.final_train);
  write_metrics_row(csv, 0, "test", cfg.lr, result.final_test);
  result.best_auc = result.final_test.auc;
  save(result.best_checkpoint, 0);
  if (log) {
    *log << "epoch 0 test acc " << format_real(result.final_test.acc) << " auc " << format_real(result.final_test.auc)
         << '\n';
  }

  const std::size_t batches = (fold.train_rows.size() + cfg.batch_size - 1) / cfg.batch_size;
  AdamState adam;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = step_lr(epoch - 1, cfg.lr, cfg.step_size, cfg.gamma);
    Accumulator acc;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::size_t> picks = sampler.next_batch();
      for (auto& p : picks) p = fold.train_rows[p];
      const Batch batch = store.gather_augmented(picks, cfg.augment, aug_rng);
      for (auto p : params) p.tensor.zero_grad();
      Tape tape;
      BatchObjective obj = [&] {
        Tape::Scope scope(tape);
        try {
          return batch_objective(net, batch, cfg.lambda);
        } catch (const std::domain_error& e) {
          throw std::domain_error("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " +
                                  e.what());
        }
      }();
      if (!std::isfinite(obj.objective.breakdown.total)) {
        throw std::domain_error("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(b));
      }
      tape.backward(obj.objective.total);
      try {
        adam_step(adam, params, lr);
      } catch (const std::domain_error& e) {
        throw std::domain_error("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what());
      }
      if (cfg.precision == DType::kF32) round_to_f32(params);
      acc.add(obj, batch.labels);
    }
    result.final_train = acc.finish(cfg.model.num_experts);
    result.final_test = evaluate_rows(net, store, test_rows, cfg.batch_size, cfg.lambda);
    write_metrics_row(csv, epoch, "train", lr, result.final_train);
    write_metrics_row(csv, epoch, "test", lr, result.final_test);
    csv.flush();
    if (result.final_test.auc > result.best_auc || std::isnan(result.best_auc)) {
      result.best_auc = result.final_test.auc;
      result.best_epoch = epoch;
      save(result.best_checkpoint, epoch);
    }
    if (log) {
      *log << "epoch " << epoch << " loss " << format_real(result.final_train.loss_total) << " test acc "
           << format_real(result.final_test.acc) << " auc " << format_real(result.final_test.auc) << '\n';
    }
  }
  save(result.last_checkpoint, cfg.epochs);
  if (!csv) throw FormatError("write failed for " + result.metrics_csv.string());
  return result;
}

// --- evaluation ------------------------------------------------------------------------

std::vector<PurityEntry> routing_purity_by_branch(std::span<const RoutingRecord> records,
                                                  const std::map<std::string, std::size_t>& groups,
                                                  std::size_t num_experts) {
  std::map<std::pair<std::size_t, Branch>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> split;
  for (const auto& r : records) {
    const auto it = groups.find(r.sample_id);
    if (it == groups.end()) throw ValidationError("no gaze group for sample '" + r.sample_id + "'");
    auto& [top1, group] = split[{r.block_id, r.branch}];
    top1.push_back(r.top1());
    group.push_back(it->second);
  }
  std::vector<PurityEntry> out;
  for (const auto& [key, v] : split) out.push_back({key.first, key.second, routing_purity(v.first, v.second, num_experts)});
  return out;
}

EvalResult evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest, std::size_t fold,
                    const std::optional<std::filesystem::path>& routing_csv) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const std::size_t folds = ck.config.get_size("folds", 5);
  const std::uint64_t seed = ck.config.get_size("seed", 0);
  const std::size_t batch_size = ck.config.get_size("batch_size", 64);
  const double lambda = ck.config.get_real("lambda", 0.01);
  if (fold >= folds) {
    throw ValidationError("fold " + std::to_string(fold) + " outside [0, " + std::to_string(folds) +
                          ") stored in the checkpoint");
  }
  auto rows = load_manifest(manifest, ck.net.config().num_classes);
  const auto splits = subject_kfold(rows, folds, seed);
  const SampleStore store(manifest, std::move(rows));
  check_compatible(ck.net, store);

  EvalResult result;
  result.test = evaluate_rows(ck.net, store, splits[fold].test_rows, batch_size, lambda);
  const auto groups_path = manifest.parent_path() / "groups.csv";
  if (!ck.net.baseline() && std::filesystem::exists(groups_path)) {
    result.purity = routing_purity_by_branch(result.test.records, load_groups(groups_path), ck.net.config().num_experts);
  }
  if (routing_csv) {
    std::ofstream out(*routing_csv, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + routing_csv->string());
    write_routing_header(out, ck.net.config().num_experts);
    write_routing_rows(out, result.test.records);
    if (!out) throw FormatError("write failed for " + routing_csv->string());
  }
  return result;
}


// --- gradient check ----------------------------------------------------------------------

ModelGradCheck ModelGradCheck::from_kv(const KeyValues& kv) {
  ModelGradCheck g;
  g.batch = kv.get_size("batch", g.batch);
  g.image_size = kv.get_size("image_size", g.image_size);
  g.lambda = kv.get_real("lambda", g.lambda);
  g.options.eps = kv.get_real("eps", g.options.eps);
  g.options.tol = kv.get_real("tol", g.options.tol);
  g.options.abs_floor = kv.get_real("abs_floor", g.options.abs_floor);
  g.options.max_coords_per_param = kv.get_size("max_coords", g.options.max_coords_per_param);
  g.model = ModelConfig::from_kv(kv, ModelConfig::toy());
  g.options.seed = g.model.seed;
  const auto unused = kv.unused_keys();
  if (!unused.empty()) throw ConfigError("unknown gradcheck key '" + unused.front() + "'");
  if (g.batch == 0 || g.image_size < 8) throw ConfigError("gradcheck needs batch >= 1 and image_size >= 8");
  return g;
}

GradCheckReport gradcheck_model(const ModelGradCheck& setup) {
  const DkghNet net(setup.model);
  Rng rng(setup.model.seed + 7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t hw = setup.image_size * setup.image_size;
  std::vector<double> image(setup.batch * setup.model.in_channels * hw), heat(setup.batch * hw);
  for (auto& v : image) v = unit(rng);
  for (auto& v : heat) v = unit(rng);
  const Tensor x({setup.batch, setup.model.in_channels, setup.image_size, setup.image_size}, std::move(image));
  const Tensor h({setup.batch, 1, setup.image_size, setup.image_size}, std::move(heat));
  Batch batch{x, h, {}, {}};
  for (std::size_t b = 0; b < setup.batch; ++b) {
    batch.labels.push_back(b % setup.model.num_classes);
    batch.ids.push_back("gc" + std::to_string(b));
  }
  return finite_diff_check([&] { return batch_objective(net, batch, setup.lambda).objective.total; },
                           net.parameters(), setup.options);
}

}  // namespace dkgh
