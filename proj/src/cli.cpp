// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <ostream>

#include "dkgh/losses.hpp"
#include "dkgh/trainer.hpp"

namespace dkgh {
namespace {

void print_metrics(std::ostream& out, const SplitMetrics& m) {
  out << "samples " << m.samples << '\n';
  out << "acc " << format_real(m.acc) << '\n';
  out << "auc " << format_real(m.auc) << '\n';
  out << "loss_cls " << format_real(m.loss_cls) << '\n';
  out << "loss_lb " << format_real(m.loss_lb) << '\n';
  out << "loss_total " << format_real(m.loss_total) << '\n';
}

void print_purity(std::ostream& out, const std::vector<PurityEntry>& purity) {
  for (const auto& p : purity) {
    out << "purity block" << p.block_id << ' ' << branch_name(p.branch) << ' ' << format_real(p.purity) << '\n';
  }
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid gaze-guided mixture-of-experts trainer", "dkgh"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, config_path, manifest_path, checkpoint_dir, routing_csv;
  std::size_t fold = 0;
  bool all_rows = false;

  auto* synth = app.add_subcommand("synth-gen", "Write a synthetic gaze dataset");
  synth->add_option("--spec", spec_path, "key=value synthetic spec")->required();
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train on one subject-wise fold");
  train_cmd->add_option("--config", config_path, "key=value training config")->required();
  train_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
  train_cmd->add_option("--out", out_dir, "run directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a fold's test split");
  eval_cmd->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  eval_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
  eval_cmd->add_option("--fold", fold, "fold index")->required();
  eval_cmd->add_option("--routing-csv", routing_csv, "routing CSV path (default <checkpoint>/routing_fold<i>.csv)");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check of a small net");
  grad_cmd->add_option("--config", config_path, "key=value model config")->required();

  auto* dump_cmd = app.add_subcommand("route-dump", "Write top-1 routing for a manifest");
  dump_cmd->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  dump_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
  dump_cmd->add_option("--out", routing_csv, "routing CSV path")->required();
  dump_cmd->add_option("--fold", fold, "restrict to this fold's test split");
  dump_cmd->add_flag("--all", all_rows, "every manifest row (default)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (*synth) {
      const auto manifest = generate_synthetic(SyntheticSpec::from_kv(KeyValues::load(spec_path)), out_dir);
      out << "manifest " << manifest.string() << '\n';
    } else if (*train_cmd) {
      const TrainConfig cfg = TrainConfig::from_kv(KeyValues::load(config_path));
      const TrainResult r = train(cfg, manifest_path, out_dir, &out);
      out << "best_epoch " << r.best_epoch << '\n';
      out << "best_auc " << format_real(r.best_auc) << '\n';
      out << "checkpoint " << r.best_checkpoint.string() << '\n';
      print_metrics(out, r.final_test);
    } else if (*eval_cmd) {
      const std::filesystem::path csv =
          routing_csv.empty() ? std::filesystem::path(checkpoint_dir) / ("routing_fold" + std::to_string(fold) + ".csv")
                              : std::filesystem::path(routing_csv);
      const EvalResult r = evaluate(checkpoint_dir, manifest_path, fold, csv);
      print_metrics(out, r.test);
      print_purity(out, r.purity);
      out << "routing_csv " << csv.string() << '\n';
    } else if (*grad_cmd) {
      const ModelGradCheck setup = ModelGradCheck::from_kv(KeyValues::load(config_path));
      const GradCheckReport r = gradcheck_model(setup);
      out << "coords " << r.coords_checked << '\n';
      out << "max_rel_error " << format_real(r.max_rel_error) << " (" << r.worst_param << '[' << r.worst_index
          << "])\n";
      out << (r.passed ? "PASS" : "FAIL") << '\n';
      return r.passed ? kExitOk : kExitValidation;
    } else if (*dump_cmd) {
      LoadedCheckpoint ck = load_checkpoint(checkpoint_dir);
      auto rows = load_manifest(manifest_path, ck.net.config().num_classes);
      std::vector<std::size_t> picks;
      if (dump_cmd->count("--fold") > 0 && !all_rows) {
        const auto folds = subject_kfold(rows, ck.config.get_size("folds", 5), ck.config.get_size("seed", 0));
        if (fold >= folds.size()) throw ValidationError("fold " + std::to_string(fold) + " out of range");
        picks = folds[fold].test_rows;
      } else {
        picks.resize(rows.size());
        for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
      }
      const SampleStore store(manifest_path, std::move(rows));
      const SplitMetrics m = evaluate_rows(ck.net, store, picks, ck.config.get_size("batch_size", 64),
                                           ck.config.get_real("lambda", 0.01));
      std::ofstream csv(routing_csv, std::ios::trunc);
      if (!csv) throw FormatError("cannot write " + routing_csv);
      write_routing_header(csv, ck.net.config().num_experts);
      write_routing_rows(csv, m.records);
      out << "rows " << m.records.size() << '\n';
    }
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace dkgh
