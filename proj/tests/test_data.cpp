// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dkgh/data.hpp"
#include "dkgh/errors.hpp"
#include "test_util.hpp"

namespace dkgh {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kHeader = "sample_id,image_path,heatmap_path,label,subject_id\n";

// --- manifest ---

TEST(Manifest, HeaderOnlyIsEmpty) {
  TempDir d("man0");
  write_text(d.path() / "m.csv", kHeader);
  EXPECT_TRUE(load_manifest(d.path() / "m.csv").empty());
}

TEST(Manifest, FieldsVerbatim) {
  TempDir d("man1");
  for (const char* f : {"a.pgm", "b.pgm", "c.pgm"}) write_text(d.path() / f, "x");
  write_text(d.path() / "m.csv", std::string(kHeader) +
                                     "s1,a.pgm,b.pgm,0,p1\n"
                                     "s2,b.pgm,c.pgm,2,p1\n"
                                     "s3,c.pgm,a.pgm,1,p2\n");
  const auto rows = load_manifest(d.path() / "m.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].sample_id, "s2");
  EXPECT_EQ(rows[1].image_path, "b.pgm");
  EXPECT_EQ(rows[1].heatmap_path, "c.pgm");
  EXPECT_EQ(rows[1].label, 2u);
  EXPECT_EQ(rows[2].subject_id, "p2");
  EXPECT_EQ(resolve_sample_path(d.path() / "m.csv", "a.pgm"), d.path() / "a.pgm");
}

TEST(Manifest, WriteThenLoad) {
  TempDir d("man2");
  write_text(d.path() / "i.pgm", "x");
  const std::vector<SampleManifest> rows = {{"x", "i.pgm", "i.pgm", 1, "s"}, {"y", "i.pgm", "i.pgm", 0, "t"}};
  write_manifest(d.path() / "m.csv", rows);
  const auto back = load_manifest(d.path() / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].sample_id, "x");
  EXPECT_EQ(back[1].subject_id, "t");
}

void expect_error_at_line(const std::string& body, const std::string& needle) {
  TempDir d("manerr");
  write_text(d.path() / "a.pgm", "x");
  write_text(d.path() / "m.csv", std::string(kHeader) + "ok,a.pgm,a.pgm,0,p\n" + body);
  try {
    load_manifest(d.path() / "m.csv");
    ADD_FAILURE() << "no error for " << body;
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(Manifest, BadRowsNameTheLine) {
  expect_error_at_line("s,a.pgm,a.pgm,7,p\n", "label 7");
  expect_error_at_line("s,a.pgm,a.pgm,x,p\n", "not a non-negative integer");
  expect_error_at_line("s,a.pgm,a.pgm,-1,p\n", "not a non-negative integer");
  expect_error_at_line("s,a.pgm,a.pgm,0\n", "expected 5 fields");
  expect_error_at_line("s,a.pgm,,0,p\n", "empty field");
  expect_error_at_line("ok,a.pgm,a.pgm,0,p\n", "duplicate");
  expect_error_at_line("s,missing.pgm,a.pgm,0,p\n", "does not exist");
}

TEST(Manifest, MissingFileAndHeader) {
  EXPECT_THROW(load_manifest("/nonexistent/m.csv"), ValidationError);
  TempDir d("manh");
  write_text(d.path() / "m.csv", "id,img\n");
  EXPECT_THROW(load_manifest(d.path() / "m.csv"), ValidationError);
}

// --- PGM ---

TEST(Pgm, PayloadScaledByMaxval) {
  TempDir d("pgm0");
  write_text(d.path() / "x.pgm", std::string("P5\n2 2\n255\n") + std::string("\x00\x40\x80\xff", 4));
  const Tensor t = load_image(d.path() / "x.pgm");
  EXPECT_EQ(t.shape(), (Shape{1, 2, 2}));
  const double want[] = {0.0, 0.25098, 0.50196, 1.0};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(t[i], want[i], 1e-5);
  EXPECT_EQ(t[1], 64.0 / 255.0);
}

TEST(Pgm, ZeroAndMaxImages) {
  TempDir d("pgm1");
  write_pgm(d.path() / "z.pgm", {3, 2, 255, std::vector<std::uint16_t>(6, 0)});
  write_pgm(d.path() / "o.pgm", {3, 2, 1000, std::vector<std::uint16_t>(6, 1000)});
  const Tensor z = load_image(d.path() / "z.pgm"), o = load_image(d.path() / "o.pgm");
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  for (double v : o.data()) EXPECT_EQ(v, 1.0);
}

TEST(Pgm, HeaderComments) {
  TempDir d("pgm2");
  write_text(d.path() / "c.pgm", std::string("P5 # c\n# whole line\n1 1\n255\n") + std::string("\x80", 1));
  EXPECT_EQ(read_pgm(d.path() / "c.pgm").pixels, (std::vector<std::uint16_t>{128}));
}

TEST(Pgm, SixteenBitBigEndian) {
  TempDir d("pgm3");
  write_text(d.path() / "w.pgm", std::string("P5\n2 1\n65535\n") + std::string("\x01\x02\xff\xff", 4));
  EXPECT_EQ(read_pgm(d.path() / "w.pgm").pixels, (std::vector<std::uint16_t>{0x0102, 0xffff}));
}

TEST(Pgm, RoundTripIsExact) {
  TempDir d("pgm4");
  for (std::uint16_t maxval : {std::uint16_t{255}, std::uint16_t{4095}, std::uint16_t{65535}}) {
    PgmImage img{7, 5, maxval, {}};
    for (std::size_t i = 0; i < 35; ++i) img.pixels.push_back(std::uint16_t((i * 7919) % (maxval + 1u)));
    write_pgm(d.path() / "r.pgm", img);
    const PgmImage back = read_pgm(d.path() / "r.pgm");
    EXPECT_EQ(back.width, 7u);
    EXPECT_EQ(back.height, 5u);
    EXPECT_EQ(back.maxval, maxval);
    EXPECT_EQ(back.pixels, img.pixels);
  }
  // 8-bit values survive load_image followed by quantization.
  PgmImage all{256, 1, 255, {}};
  for (std::uint16_t v = 0; v < 256; ++v) all.pixels.push_back(v);
  write_pgm(d.path() / "all.pgm", all);
  EXPECT_EQ(quantize_8bit(load_image(d.path() / "all.pgm")).pixels, all.pixels);
}

TEST(Pgm, MalformedFilesRejected) {
  TempDir d("pgm5");
  write_text(d.path() / "a.pgm", "P2\n1 1\n255\n0");
  write_text(d.path() / "b.pgm", std::string("P5\n2 2\n255\n") + std::string("\x01\x02", 2));
  write_text(d.path() / "c.pgm", std::string("P5\n1 1\n100\n") + std::string("\xc8", 1));
  write_text(d.path() / "e.pgm", "P5\n0 1\n255\n");
  for (const char* f : {"a.pgm", "b.pgm", "c.pgm", "e.pgm", "missing.pgm"}) {
    EXPECT_THROW(load_image(d.path() / f), FormatError) << f;
  }
}

// --- augmentation ---

Tensor ramp(std::size_t size) {
  Tensor t = Tensor::zeros({1, size, size});
  for (std::size_t i = 0; i < t.numel(); ++i) t.mutable_data()[i] = double(i % 97) / 96.0;
  return t;
}

TEST(Augment, DisabledIsBitwiseIdentity) {
  Rng rng(1);
  AugmentConfig cfg;
  cfg.enabled = false;
  const Tensor x = ramp(16), h = ramp(16);
  const auto [a, b] = augment(x, h, cfg, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(a[i], x[i]);
    EXPECT_EQ(b[i], h[i]);
  }
}

TEST(Augment, DegenerateRangeIsIdentity) {
  Rng rng(2);
  const AugmentConfig cfg{1.0, 1.0, 0.0, true};
  const Tensor x = ramp(16);
  const auto [a, b] = augment(x, x, cfg, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(a[i], x[i]);
}

TEST(Augment, HeatmapUnchangedAndImageClamped) {
  Rng rng(3);
  const AugmentConfig cfg{0.5, 1.5, 0.3, true};
  const Tensor x = ramp(16), h = ramp(16);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [a, b] = augment(x, h, cfg, rng);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      EXPECT_EQ(b[i], h[i]);
      EXPECT_GE(a[i], 0.0);
      EXPECT_LE(a[i], 1.0);
    }
  }
}

TEST(Augment, NoiseOnlyKeepsMeanWithinThreeSigma) {
  const AugmentConfig cfg{1.0, 1.0, 0.05, true};
  Tensor x = Tensor::zeros({1, 64, 64});
  for (auto& v : x.mutable_data()) v = 0.5;
  Rng rng(4);
  const auto [a, b] = augment(x, x, cfg, rng);
  double mean = 0.0;
  for (double v : a.data()) mean += v;
  mean /= double(a.numel());
  EXPECT_LE(std::abs(mean - 0.5), 3.0 * 0.05 / 64.0);
}

TEST(Augment, SameSeedSameOutput) {
  const AugmentConfig cfg;
  Rng r1(5), r2(5);
  const Tensor x = ramp(16);
  const auto a = augment(x, x, cfg, r1).first, b = augment(x, x, cfg, r2).first;
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Augment, InvalidConfig) {
  EXPECT_THROW((AugmentConfig{1.2, 0.8, 0.05, true}.validate()), ConfigError);
  EXPECT_THROW((AugmentConfig{0.8, 1.2, -1.0, true}.validate()), ConfigError);
}

// --- k-fold ---

std::vector<SampleManifest> subjects_manifest(std::size_t subjects, std::size_t per_subject) {
  std::vector<SampleManifest> rows;
  for (std::size_t s = 0; s < subjects; ++s)
    for (std::size_t j = 0; j < per_subject; ++j)
      rows.push_back({"s" + std::to_string(s) + "_" + std::to_string(j), "i", "h", j % 3, "p" + std::to_string(s)});
  return rows;
}

void expect_partition(const std::vector<SampleManifest>& rows, const std::vector<Fold>& folds) {
  std::vector<int> test_count(rows.size(), 0), train_count(rows.size(), 0);
  std::set<std::string> all_test;
  for (const Fold& f : folds) {
    std::set<std::string> tr(f.train_subjects.begin(), f.train_subjects.end());
    for (const auto& s : f.test_subjects) {
      EXPECT_EQ(tr.count(s), 0u);
      EXPECT_TRUE(all_test.insert(s).second);
    }
    for (std::size_t r : f.test_rows) {
      ++test_count[r];
      EXPECT_EQ(tr.count(rows[r].subject_id), 0u);
    }
    for (std::size_t r : f.train_rows) ++train_count[r];
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    EXPECT_EQ(test_count[r], 1);
    EXPECT_EQ(train_count[r], int(folds.size()) - 1);
  }
}

TEST(KFold, OneSubjectPerFold) {
  const auto rows = subjects_manifest(5, 3);
  const auto folds = subject_kfold(rows, 5, 1);
  ASSERT_EQ(folds.size(), 5u);
  for (const auto& f : folds) {
    EXPECT_EQ(f.test_subjects.size(), 1u);
    EXPECT_EQ(f.test_rows.size(), 3u);
  }
  expect_partition(rows, folds);
}

TEST(KFold, GroupSizesDifferByAtMostOne) {
  const auto rows = subjects_manifest(23, 2);
  std::multiset<std::size_t> sizes;
  for (const auto& f : subject_kfold(rows, 5, 9)) sizes.insert(f.test_subjects.size());
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{4, 4, 5, 5, 5}));
}

TEST(KFold, RandomManifestsPartitionSubjects) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 5;
    std::vector<SampleManifest> rows;
    const std::size_t n = 10 + rng() % 60, subjects = k + rng() % 15;
    for (std::size_t i = 0; i < n; ++i)
      rows.push_back({"r" + std::to_string(i), "i", "h", 0, "subj" + std::to_string(rng() % subjects)});
    std::set<std::string> present;
    for (const auto& r : rows) present.insert(r.subject_id);
    if (present.size() < k) continue;
    expect_partition(rows, subject_kfold(rows, k, trial));
  }
}

TEST(KFold, Errors) {
  EXPECT_THROW(subject_kfold(subjects_manifest(4, 2), 5, 0), ConfigError);
  EXPECT_THROW(subject_kfold(subjects_manifest(4, 2), 1, 0), ConfigError);
}

// --- sampler ---

TEST(Sampler, BatchSizeAndSingleClass) {
  const std::vector<std::size_t> labels = {2, 2, 2};
  UniformClassSampler s(labels, 4, 1);
  for (int i = 0; i < 10; ++i) {
    const auto b = s.next_batch();
    ASSERT_EQ(b.size(), 4u);
    for (std::size_t r : b) EXPECT_EQ(labels[r], 2u);
  }
}

TEST(Sampler, ClassCountsWithinBinomialBounds) {
  // Strongly imbalanced labels; draws should still be ~1/3 per class.
  std::vector<std::size_t> labels(100, 0);
  labels.push_back(1);
  for (int i = 0; i < 10; ++i) labels.push_back(2);
  UniformClassSampler s(labels, 3, 2);
  std::size_t counts[3] = {0, 0, 0};
  for (int i = 0; i < 1000; ++i)
    for (std::size_t r : s.next_batch()) ++counts[labels[r]];
  for (std::size_t c : counts) {
    EXPECT_GE(c, 900u);
    EXPECT_LE(c, 1100u);
  }
}

TEST(Sampler, EmptyClassRejected) {
  const std::vector<std::size_t> labels = {0, 0, 2};
  EXPECT_THROW(UniformClassSampler(labels, 4, 0, 3), ConfigError);
  EXPECT_THROW(UniformClassSampler(labels, 0, 0), ConfigError);
}

// --- synthetic generator ---

struct Truth {
  std::size_t group, blob_class;
  double blob_x, blob_y, gaze_x, gaze_y;
};

std::map<std::string, Truth> read_truth(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "sample_id,group,blob_class,blob_x,blob_y,gaze_x,gaze_y");
  std::map<std::string, Truth> out;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::string id;
    Truth t{};
    ls >> id >> t.group >> t.blob_class >> t.blob_x >> t.blob_y >> t.gaze_x >> t.gaze_y;
    out[id] = t;
  }
  return out;
}

std::pair<std::size_t, std::size_t> argmax_xy(const Tensor& heat) {
  const std::size_t w = heat.dim(2);
  std::size_t best = 0;
  for (std::size_t i = 1; i < heat.numel(); ++i)
    if (heat[i] > heat[best]) best = i;
  return {best % w, best / w};
}

TEST(Synthetic, FileCounts) {
  TempDir d("syn0");
  SyntheticSpec spec;
  spec.num_subjects = 2;
  spec.samples_per_subject = 2;
  spec.image_size = 32;
  const fs::path m = generate_synthetic(spec, d.path());
  EXPECT_EQ(load_manifest(m).size(), 4u);
  std::size_t images = 0, heatmaps = 0;
  for (const auto& e : fs::directory_iterator(d.path() / "images")) images += e.path().extension() == ".pgm";
  for (const auto& e : fs::directory_iterator(d.path() / "heatmaps")) heatmaps += e.path().extension() == ".pgm";
  EXPECT_EQ(images, 4u);
  EXPECT_EQ(heatmaps, 4u);
  EXPECT_EQ(load_groups(d.path() / "groups.csv").size(), 4u);
}

TEST(Synthetic, FullFidelityAlignsEveryHeatmap) {
  TempDir d("syn1");
  SyntheticSpec spec;
  spec.num_subjects = 6;
  spec.samples_per_subject = 10;
  spec.gaze_fidelity = 1.0;
  const fs::path m = generate_synthetic(spec, d.path());
  const auto truth = read_truth(d.path() / "groups.csv");
  for (const auto& row : load_manifest(m)) {
    const Truth& t = truth.at(row.sample_id);
    EXPECT_EQ(t.blob_class, row.label);
    const auto [x, y] = argmax_xy(load_image(resolve_sample_path(m, row.heatmap_path)));
    EXPECT_LE(std::hypot(x - t.blob_x, y - t.blob_y), blob_radius(spec.blobs[t.blob_class])) << row.sample_id;
  }
}

TEST(Synthetic, ZeroFidelityAlignsAtRandomRate) {
  TempDir d("syn2");
  SyntheticSpec spec;
  spec.num_subjects = 10;
  spec.samples_per_subject = 20;
  spec.gaze_fidelity = 0.0;
  const fs::path m = generate_synthetic(spec, d.path());
  const auto truth = read_truth(d.path() / "groups.csv");
  const double n_px = double(spec.image_size * spec.image_size);
  double expected = 0.0, var = 0.0;
  std::size_t aligned = 0;
  for (const auto& row : load_manifest(m)) {
    const Truth& t = truth.at(row.sample_id);
    const double r = blob_radius(spec.blobs[t.blob_class]);
    // Probability that a uniform pixel lands within r of the blob centre.
    std::size_t inside = 0;
    for (std::size_t y = 0; y < spec.image_size; ++y)
      for (std::size_t x = 0; x < spec.image_size; ++x) inside += std::hypot(x - t.blob_x, y - t.blob_y) <= r;
    const double p = double(inside) / n_px;
    expected += p;
    var += p * (1.0 - p);
    const auto [x, y] = argmax_xy(load_image(resolve_sample_path(m, row.heatmap_path)));
    aligned += std::hypot(x - t.blob_x, y - t.blob_y) <= r;
  }
  EXPECT_LE(double(aligned), expected + 3.0 * std::sqrt(var));
}

TEST(Synthetic, SameSeedByteIdenticalTrees) {
  TempDir a("syn3a"), b("syn3b");
  SyntheticSpec spec;
  spec.num_subjects = 3;
  spec.samples_per_subject = 3;
  spec.image_size = 32;
  spec.seed = 11;
  generate_synthetic(spec, a.path());
  generate_synthetic(spec, b.path());
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), a.path());
    EXPECT_EQ(read_bytes(e.path()), read_bytes(b.path() / rel)) << rel;
  }
  EXPECT_EQ(files, 3u * 3 * 2 + 3);  // images, heatmaps, manifest, groups, spec
}

TEST(Synthetic, GazeDependentVariantLayout) {
  TempDir d("syn4");
  SyntheticSpec spec;
  spec.num_subjects = 4;
  spec.samples_per_subject = 12;
  spec.image_size = 32;
  spec.variant = SyntheticVariant::kGazeDependent;
  const fs::path m = generate_synthetic(spec, d.path());
  const auto truth = read_truth(d.path() / "groups.csv");
  std::set<std::size_t> labels;
  for (const auto& row : load_manifest(m)) {
    const Truth& t = truth.at(row.sample_id);
    labels.insert(row.label);
    if (row.label == 0) {
      EXPECT_EQ(t.blob_class, 0u);
    } else {
      EXPECT_EQ(t.blob_class, spec.num_classes - 1);
      EXPECT_EQ(t.group % 2, row.label - 1);  // classes 1 and 2 differ only in gaze group
    }
  }
  EXPECT_EQ(labels.size(), 3u);
  spec.gaze_groups = 3;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Synthetic, SpecKeyValueRoundTrip) {
  SyntheticSpec spec;
  spec.num_subjects = 7;
  spec.gaze_fidelity = 0.25;
  spec.variant = SyntheticVariant::kGazeDependent;
  KeyValues kv;
  spec.to_kv(kv);
  const SyntheticSpec back = SyntheticSpec::from_kv(kv);
  EXPECT_EQ(back.num_subjects, 7u);
  EXPECT_EQ(back.gaze_fidelity, 0.25);
  EXPECT_EQ(back.variant, SyntheticVariant::kGazeDependent);
  EXPECT_EQ(back.blobs.size(), spec.blobs.size());
  KeyValues bad;
  bad.set("variant", "odd");
  EXPECT_THROW(SyntheticSpec::from_kv(bad), ValidationError);
}

TEST(SampleStore, GatherStacksRows) {
  TempDir d("store");
  SyntheticSpec spec;
  spec.num_subjects = 2;
  spec.samples_per_subject = 3;
  spec.image_size = 32;
  const fs::path m = generate_synthetic(spec, d.path());
  const SampleStore store(m, load_manifest(m));
  const std::vector<std::size_t> rows = {4, 1};
  const Batch b = store.gather(rows);
  EXPECT_EQ(b.images.shape(), (Shape{2, 1, 32, 32}));
  EXPECT_EQ(b.heatmaps.shape(), (Shape{2, 1, 32, 32}));
  EXPECT_EQ(b.ids, (std::vector<std::string>{store.rows()[4].sample_id, store.rows()[1].sample_id}));
  const Tensor img = load_image(resolve_sample_path(m, store.rows()[1].image_path));
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_EQ(b.images[1024 + i], img[i]);
  EXPECT_THROW(store.gather(std::vector<std::size_t>{}), ContractError);
}

}  // namespace
}  // namespace dkgh
