// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dkgh/errors.hpp"
#include "dkgh/trainer.hpp"
#include "test_util.hpp"

namespace dkgh {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

// Scalar Adam written out by hand.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double lr) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    return theta - lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  Tensor p(Shape{3}, std::vector<double>{1, -2, 3}, true);
  AdamState st;
  const std::vector<NamedTensor> params = {{"p", p}};
  adam_step(st, params, 0.1);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], -2.0);
  EXPECT_EQ(p[2], 3.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p(Shape{1}, 0.0, true);
  p.mutable_grad()[0] = 1.0;
  AdamState st;
  adam_step(st, std::vector<NamedTensor>{{"p", p}}, 0.01);
  EXPECT_NEAR(p[0], -0.01, 1e-9);
}

TEST(Adam, QuadraticMatchesScalarOracle) {
  Tensor p(Shape{1}, 1.0, true);
  AdamState st;
  ScalarAdam ref;
  double theta = 1.0;
  for (int i = 0; i < 100; ++i) {
    p.zero_grad();
    p.mutable_grad()[0] = 2.0 * p[0];
    adam_step(st, std::vector<NamedTensor>{{"theta", p}}, 0.1);
    theta = ref.step(theta, 2.0 * theta, 0.1);
    if (i < 3) EXPECT_NEAR(p[0], theta, 1e-10) << "step " << i + 1;
    EXPECT_NEAR(p[0], theta, 1e-10);
  }
  EXPECT_EQ(st.step, 100u);
}

TEST(Adam, NonFiniteGradientNamesParameterAndChangesNothing) {
  Tensor a(Shape{2}, 1.0, true), b(Shape{3}, 2.0, true);
  a.mutable_grad()[0] = 0.5;
  b.mutable_grad()[2] = std::nan("");
  AdamState st;
  try {
    adam_step(st, std::vector<NamedTensor>{{"alpha", a}, {"beta", b}}, 0.1);
    FAIL() << "expected domain_error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(st.step, 0u);
}

TEST(StepLr, Examples) {
  EXPECT_EQ(step_lr(0, 5e-4, 10, 0.1), 5e-4);
  EXPECT_EQ(step_lr(9, 5e-4, 10, 0.1), 5e-4);
  EXPECT_NEAR(step_lr(10, 5e-4, 10, 0.1), 5e-5, 1e-20);
  EXPECT_NEAR(step_lr(25, 1.0, 10, 0.5), 0.25, 1e-15);
}

TEST(RoundToF32, ValuesBecomeRepresentable) {
  Tensor p(Shape{2}, std::vector<double>{0.1, 1.0 / 3.0}, true);
  round_to_f32(std::vector<NamedTensor>{{"p", p}});
  EXPECT_EQ(p[0], double(0.1f));
  EXPECT_EQ(p[1], double(float(1.0 / 3.0)));
}

TEST(TrainConfig, ValidationAndKeys) {
  TrainConfig c;
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.fold = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.model.top_k = 9;
  EXPECT_THROW(c.validate(), ConfigError);

  KeyValues kv;
  kv.set("lr", "0.002");
  kv.set("N", "2");
  kv.set("precision", "f32");
  const TrainConfig t = TrainConfig::from_kv(kv);
  EXPECT_EQ(t.lr, 0.002);
  EXPECT_EQ(t.model.num_experts, 2u);
  EXPECT_EQ(t.precision, DType::kF32);
  kv.set("lerning_rate", "1");
  EXPECT_THROW(TrainConfig::from_kv(kv), ConfigError);
}

TEST(TrainConfig, KeyValueRoundTrip) {
  TrainConfig c;
  c.lr = 0.00123;
  c.epochs = 7;
  c.augment.enabled = false;
  c.model = ModelConfig::toy();
  KeyValues kv;
  c.to_kv(kv);
  c.model.to_kv(kv);
  const TrainConfig back = TrainConfig::from_kv(kv);
  EXPECT_EQ(back.lr, c.lr);
  EXPECT_EQ(back.epochs, 7u);
  EXPECT_FALSE(back.augment.enabled);
  EXPECT_EQ(back.model.stage_channels, c.model.stage_channels);
}

TEST(Purity, ByBranch) {
  std::vector<RoutingRecord> recs;
  for (std::size_t i = 0; i < 4; ++i) {
    recs.push_back({"s" + std::to_string(i), 0, Branch::kDataDriven, {0, 0}, {0}, {1.0}, 0.5});
    recs.push_back({"s" + std::to_string(i), 0, Branch::kDomainExpert, {0, 0}, {i % 2}, {1.0}, 0.5});
  }
  const std::map<std::string, std::size_t> groups = {{"s0", 0}, {"s1", 1}, {"s2", 0}, {"s3", 1}};
  const auto p = routing_purity_by_branch(recs, groups, 2);
  ASSERT_EQ(p.size(), 2u);
  for (const auto& e : p) EXPECT_EQ(e.purity, 1.0);
  const std::map<std::string, std::size_t> partial = {{"s0", 0}};
  EXPECT_THROW(routing_purity_by_branch(recs, partial, 2), ValidationError);
}

// Small shared dataset: 6 subjects x 6 samples at 32x32.
class TrainerRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("trainer");
    SyntheticSpec spec;
    spec.num_subjects = 6;
    spec.samples_per_subject = 6;
    spec.image_size = 32;
    spec.seed = 4;
    manifest_ = generate_synthetic(spec, dir_->path() / "data");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static TrainConfig small_config() {
    TrainConfig c;
    c.model = ModelConfig::toy();
    c.batch_size = 8;
    c.lr = 1e-3;
    c.epochs = 2;
    c.folds = 3;
    c.seed = 1;
    return c;
  }

  static TempDir* dir_;
  static fs::path manifest_;
};
TempDir* TrainerRun::dir_ = nullptr;
fs::path TrainerRun::manifest_;

TEST_F(TrainerRun, ZeroEpochsSavesInitialModel) {
  TrainConfig c = small_config();
  c.epochs = 0;
  const fs::path out = dir_->path() / "e0";
  const TrainResult r = train(c, manifest_, out);
  EXPECT_TRUE(fs::exists(out / "checkpoint" / "params.txt"));
  EXPECT_EQ(r.best_epoch, 0u);
  const auto rows = read_csv(r.metrics_csv);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0][0], "epoch");
  EXPECT_EQ(rows[0].size(), 8u + 2 * 2);
  EXPECT_EQ(rows[1][1], "train");
  EXPECT_EQ(rows[2][1], "test");
  // The saved weights are the initialisation seeded by the run seed.
  ModelConfig mc = c.model;
  mc.seed = c.seed;
  const DkghNet init(mc);
  const auto pa = init.parameters(), pb = load_checkpoint(r.best_checkpoint).net.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
}

TEST_F(TrainerRun, IdenticalRunsAreByteIdentical) {
  const TrainConfig c = small_config();
  const TrainResult a = train(c, manifest_, dir_->path() / "runa");
  const TrainResult b = train(c, manifest_, dir_->path() / "runb");
  EXPECT_EQ(read_bytes(a.metrics_csv), read_bytes(b.metrics_csv));
  for (const auto& e : fs::directory_iterator(a.last_checkpoint)) {
    EXPECT_EQ(read_bytes(e.path()), read_bytes(b.last_checkpoint / e.path().filename())) << e.path().filename();
  }
  for (const auto& e : fs::directory_iterator(a.best_checkpoint)) {
    EXPECT_EQ(read_bytes(e.path()), read_bytes(b.best_checkpoint / e.path().filename())) << e.path().filename();
  }
}

TEST_F(TrainerRun, EvaluateReproducesLoggedTestRow) {
  const TrainConfig c = small_config();
  const TrainResult r = train(c, manifest_, dir_->path() / "evalrun");
  const EvalResult e = evaluate(r.last_checkpoint, manifest_, c.fold, dir_->path() / "routing.csv");
  const auto rows = read_csv(r.metrics_csv);
  const auto& last = rows.back();
  ASSERT_EQ(last[1], "test");
  EXPECT_EQ(format_real(e.test.acc), last[6]);
  EXPECT_EQ(format_real(e.test.auc), last[7]);
  EXPECT_EQ(format_real(e.test.loss_total), last[5]);
  EXPECT_FALSE(e.purity.empty());  // groups.csv sits next to the manifest
  const auto routing = read_csv(dir_->path() / "routing.csv");
  EXPECT_EQ(routing[0][0], "sample_id");
  EXPECT_EQ(routing.size(), 1 + 2 * e.test.samples);
}

TEST_F(TrainerRun, F32RunStoresSinglePrecision) {
  TrainConfig c = small_config();
  c.epochs = 1;
  c.precision = DType::kF32;
  const TrainResult r = train(c, manifest_, dir_->path() / "f32");
  for (const auto& p : load_checkpoint(r.last_checkpoint).net.parameters())
    for (double v : p.tensor.data()) ASSERT_EQ(v, double(float(v))) << p.name;
}

TEST_F(TrainerRun, LossFallsOverTraining) {
  TrainConfig c = small_config();
  c.epochs = 8;
  c.augment.enabled = false;
  const TrainResult r = train(c, manifest_, dir_->path() / "trend");
  const auto rows = read_csv(r.metrics_csv);
  const double first = std::stod(rows[1][3]);  // epoch 0 train loss_cls
  const double last = std::stod(rows[rows.size() - 2][3]);
  EXPECT_LT(last, first);
}

TEST_F(TrainerRun, LoadBalancingRaisesUsageEntropy) {
  TrainConfig c = small_config();
  c.epochs = 6;
  c.model.num_experts = 4;
  c.lambda = 0.0;
  const TrainResult off = train(c, manifest_, dir_->path() / "lb0");
  c.lambda = 0.01;
  const TrainResult on = train(c, manifest_, dir_->path() / "lb1");
  EXPECT_GE(on.final_train.usage_entropy(), off.final_train.usage_entropy())
      << "lambda 0: " << off.final_train.usage_entropy() << ", lambda 0.01: " << on.final_train.usage_entropy();
}

TEST_F(TrainerRun, BadInputs) {
  TrainConfig c = small_config();
  c.model.num_classes = 2;  // labels go up to 2
  EXPECT_THROW(train(c, manifest_, dir_->path() / "bad"), ValidationError);
  EXPECT_THROW(train(small_config(), dir_->path() / "missing.csv", dir_->path() / "bad2"), ValidationError);
  c = small_config();
  c.folds = 7;  // more folds than subjects
  EXPECT_THROW(train(c, manifest_, dir_->path() / "bad3"), ConfigError);
}

TEST(ModelGradCheck, ToyNetPasses) {
  ModelGradCheck g;
  g.image_size = 16;
  g.options.max_coords_per_param = 4;
  const GradCheckReport r = gradcheck_model(g);
  EXPECT_TRUE(r.passed) << r.worst_param << " " << r.max_rel_error;
  EXPECT_GT(r.coords_checked, 0u);
}

}  // namespace
}  // namespace dkgh
