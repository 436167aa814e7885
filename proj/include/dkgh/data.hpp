// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dkgh/config.hpp"
#include "dkgh/layers.hpp"
#include "dkgh/tensor.hpp"

namespace dkgh {

struct SampleManifest {
  std::string sample_id;
  std::string image_path;    // relative paths resolve against the manifest directory
  std::string heatmap_path;
  std::size_t label = 0;
  std::string subject_id;
};

/// Parses `sample_id,image_path,heatmap_path,label,subject_id` rows. Every
/// error names the offending line.
std::vector<SampleManifest> load_manifest(const std::filesystem::path& path, std::size_t num_classes = 3,
                                          bool check_files = true);
void write_manifest(const std::filesystem::path& path, std::span<const SampleManifest> rows);
std::filesystem::path resolve_sample_path(const std::filesystem::path& manifest_path, const std::string& entry);

/// Optional `sample_id,group` sidecar written by the synthetic generator.
std::map<std::string, std::size_t> load_groups(const std::filesystem::path& path);

// --- PGM ---------------------------------------------------------------------

/// Binary PGM (P5), 8- or 16-bit. Returns [1, H, W] scaled to [0, 1].
Tensor load_image(const std::filesystem::path& path);
/// Raw samples of a P5 file.
struct PgmImage {
  std::size_t width = 0, height = 0, maxval = 255;
  std::vector<std::uint16_t> pixels;
};
PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const PgmImage& image);
/// Quantizes [0, 1] values of a [.., H, W] tensor to 8 bits.
PgmImage quantize_8bit(const Tensor& values);

// --- augmentation -----------------------------------------------------------

struct AugmentConfig {
  double brightness_lo = 0.8;
  double brightness_hi = 1.2;
  double noise_sigma = 0.05;
  bool enabled = true;

  void validate() const;
};

/// Random brightness/contrast in [lo, hi] and Gaussian pixel noise on the
/// image, clamped to [0, 1]. The heatmap passes through unchanged.
std::pair<Tensor, Tensor> augment(const Tensor& image, const Tensor& heatmap, const AugmentConfig& cfg, Rng& rng);

// --- splitting and sampling -------------------------------------------------

struct Fold {
  std::vector<std::string> train_subjects, test_subjects;
  std::vector<std::size_t> train_rows, test_rows;  // indices into the manifest
};

/// Shuffles subjects with `seed` and deals them into k groups whose sizes
/// differ by at most one; fold i tests group i.
std::vector<Fold> subject_kfold(std::span<const SampleManifest> rows, std::size_t k, std::uint64_t seed);

/// Draws a class uniformly, then a sample of that class uniformly, with
/// replacement.
class UniformClassSampler {
 public:
  /// Classes are those present in `labels`; with `num_classes > 0` every
  /// class in [0, num_classes) must be present.
  UniformClassSampler(std::span<const std::size_t> labels, std::size_t batch_size, std::uint64_t seed,
                      std::size_t num_classes = 0);

  std::vector<std::size_t> next_batch();
  Rng& rng() { return rng_; }

 private:
  std::vector<std::vector<std::size_t>> by_class_;
  std::size_t batch_size_;
  Rng rng_;
};

// --- synthetic data ----------------------------------------------------------

enum class SyntheticVariant {
  kStandard,       // label = blob class; gaze on the blob with prob. fidelity
  kGazeDependent,  // label depends on blob class and the gaze pattern group
};

struct BlobClass {
  double sigma;
  double amplitude;
};

struct SyntheticSpec {
  std::size_t num_subjects = 20;
  std::size_t samples_per_subject = 20;
  std::size_t image_size = 64;
  std::size_t num_classes = 3;
  std::vector<BlobClass> blobs = {{2.5, 0.35}, {4.5, 0.5}, {7.0, 0.65}};
  double gaze_fidelity = 1.0;
  std::size_t gaze_groups = 4;
  SyntheticVariant variant = SyntheticVariant::kStandard;
  std::uint64_t seed = 0;

  void validate() const;
  void to_kv(KeyValues& kv) const;
  static SyntheticSpec from_kv(const KeyValues& kv);
};

/// Blob radius used for gaze alignment checks.
double blob_radius(const BlobClass& blob);

/// Writes images/<id>.pgm, heatmaps/<id>.pgm, manifest.csv and groups.csv
/// under `out_dir`; returns the manifest path.
std::filesystem::path generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Loads image/heatmap pairs for `rows` into [B, 1, H, W] tensors.
struct Batch {
  Tensor images;
  Tensor heatmaps;
  std::vector<std::size_t> labels;
  std::vector<std::string> ids;
};

/// In-memory copy of a manifest's pixels so training does not re-read files.
class SampleStore {
 public:
  SampleStore(const std::filesystem::path& manifest_path, std::vector<SampleManifest> rows);

  const std::vector<SampleManifest>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  Batch gather(std::span<const std::size_t> rows) const;
  /// Same as gather, with augmentation applied sample by sample.
  Batch gather_augmented(std::span<const std::size_t> rows, const AugmentConfig& cfg, Rng& rng) const;

 private:
  std::vector<SampleManifest> rows_;
  std::vector<Tensor> images_;
  std::vector<Tensor> heatmaps_;
};

}  // namespace dkgh
