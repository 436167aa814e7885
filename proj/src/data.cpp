// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace dkgh {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

constexpr const char* kManifestHeader = "sample_id,image_path,heatmap_path,label,subject_id";

}  // namespace

// --- manifest ------------------------------------------------------------------

std::filesystem::path resolve_sample_path(const std::filesystem::path& manifest_path, const std::string& entry) {
  std::filesystem::path p(entry);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

std::vector<SampleManifest> load_manifest(const std::filesystem::path& path, std::size_t num_classes,
                                          bool check_files) {
  std::ifstream in(path);
  if (!in) throw ValidationError("manifest " + path.string() + " not found");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kManifestHeader) {
    throw ValidationError(path.string() + ":1: expected header '" + kManifestHeader + "'");
  }
  std::vector<SampleManifest> rows;
  std::set<std::string> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw ValidationError(where + "expected 5 fields, got " + std::to_string(cells.size()));
    for (const auto& c : cells) {
      if (c.empty()) throw ValidationError(where + "empty field");
    }
    SampleManifest row{cells[0], cells[1], cells[2], 0, cells[4]};
    try {
      std::size_t used = 0;
      const long long label = std::stoll(cells[3], &used);
      if (used != cells[3].size() || label < 0) throw std::invalid_argument("label");
      row.label = static_cast<std::size_t>(label);
    } catch (const std::exception&) {
      throw ValidationError(where + "label '" + cells[3] + "' is not a non-negative integer");
    }
    if (row.label >= num_classes) {
      throw ValidationError(where + "label " + cells[3] + " outside [0, " + std::to_string(num_classes) + ")");
    }
    if (!seen.insert(row.sample_id).second) throw ValidationError(where + "duplicate sample_id '" + row.sample_id + "'");
    if (check_files) {
      for (const auto* entry : {&row.image_path, &row.heatmap_path}) {
        if (!std::filesystem::exists(resolve_sample_path(path, *entry))) {
          throw ValidationError(where + "file '" + *entry + "' does not exist");
        }
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_manifest(const std::filesystem::path& path, std::span<const SampleManifest> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : rows) {
    out << r.sample_id << ',' << r.image_path << ',' << r.heatmap_path << ',' << r.label << ',' << r.subject_id << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

std::map<std::string, std::size_t> load_groups(const std::filesystem::path& path) {
  std::map<std::string, std::size_t> groups;
  std::ifstream in(path);
  if (!in) return groups;
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < 2) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    try {
      groups[cells[0]] = std::stoul(cells[1]);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad group '" + cells[1] + "'");
    }
  }
  return groups;
}

// --- PGM -----------------------------------------------------------------------

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image " + path.string());
  const std::string where = path.string() + ": ";
  char magic[2] = {0, 0};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '5') throw FormatError(where + "not a binary PGM (P5)");

  auto next_token = [&]() -> std::size_t {
    int c = in.get();
    while (c != EOF) {
      if (c == '#') {
        while (c != EOF && c != '\n') c = in.get();
      } else if (!std::isspace(c)) {
        break;
      }
      c = in.get();
    }
    std::string digits;
    while (c != EOF && std::isdigit(c)) {
      digits.push_back(static_cast<char>(c));
      c = in.get();
    }
    if (digits.empty() || c == EOF || !std::isspace(c)) throw FormatError(where + "malformed PGM header");
    return std::stoul(digits);
  };
  PgmImage img;
  img.width = next_token();
  img.height = next_token();
  img.maxval = next_token();
  if (img.width == 0 || img.height == 0) throw FormatError(where + "zero-sized PGM");
  if (img.maxval == 0 || img.maxval > 65535) throw FormatError(where + "PGM maxval out of range");

  const std::size_t count = img.width * img.height;
  const std::size_t bytes_per = img.maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(count * bytes_per);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError(where + "truncated PGM payload");
  }
  img.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    img.pixels[i] = bytes_per == 1 ? raw[i] : static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    if (img.pixels[i] > img.maxval) throw FormatError(where + "pixel exceeds maxval");
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const PgmImage& img) {
  if (img.pixels.size() != img.width * img.height) throw FormatError("PGM pixel count does not match size");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write image " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  if (img.maxval < 256) {
    std::vector<char> raw(img.pixels.begin(), img.pixels.end());
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  } else {
    std::vector<char> raw(img.pixels.size() * 2);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      raw[2 * i] = static_cast<char>(img.pixels[i] >> 8);
      raw[2 * i + 1] = static_cast<char>(img.pixels[i] & 0xFF);
    }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

Tensor load_image(const std::filesystem::path& path) {
  const PgmImage img = read_pgm(path);
  std::vector<double> values(img.pixels.size());
  const double maxval = static_cast<double>(img.maxval);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(img.pixels[i]) / maxval;
  return Tensor({1, img.height, img.width}, std::move(values));
}

PgmImage quantize_8bit(const Tensor& values) {
  if (values.rank() < 2) throw DimensionError("quantize_8bit needs at least [H, W]");
  PgmImage img;
  img.height = values.dim(values.rank() - 2);
  img.width = values.dim(values.rank() - 1);
  if (values.numel() != img.width * img.height) throw DimensionError("quantize_8bit expects a single plane");
  img.maxval = 255;
  img.pixels.resize(values.numel());
  for (std::size_t i = 0; i < values.numel(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(v * 255.0));
  }
  return img;
}

// --- augmentation --------------------------------------------------------------

void AugmentConfig::validate() const {
  if (!(brightness_lo <= brightness_hi)) throw ConfigError("augmentation range must satisfy lo <= hi");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
}

std::pair<Tensor, Tensor> augment(const Tensor& image, const Tensor& heatmap, const AugmentConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return {image, heatmap};
  cfg.validate();
  std::uniform_real_distribution<double> range(cfg.brightness_lo, cfg.brightness_hi);
  const double contrast = cfg.brightness_lo == cfg.brightness_hi ? cfg.brightness_lo : range(rng);
  const double brightness = cfg.brightness_lo == cfg.brightness_hi ? cfg.brightness_lo : range(rng);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);

  std::vector<double> out(image.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = image[i];
    const double eta = cfg.noise_sigma > 0.0 ? noise(rng) : 0.0;
    // contrast * (x - 0.5) + 0.5 written so the identity settings return x exactly.
    const double v = x + (contrast - 1.0) * (x - 0.5) + (brightness - 1.0) * 0.5 + eta;
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return {Tensor(image.shape(), std::move(out)), heatmap};
}

// --- splitting and sampling ----------------------------------------------------

std::vector<Fold> subject_kfold(std::span<const SampleManifest> rows, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("subject k-fold needs k >= 2");
  std::vector<std::string> subjects;
  for (const auto& r : rows) subjects.push_back(r.subject_id);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < k) {
    throw ConfigError("subject k-fold: " + std::to_string(subjects.size()) + " subjects cannot fill " +
                      std::to_string(k) + " folds");
  }
  Rng rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);

  std::map<std::string, std::size_t> group_of;
  const std::size_t base = subjects.size() / k, extra = subjects.size() % k;
  std::size_t pos = 0;
  std::vector<std::vector<std::string>> groups(k);
  for (std::size_t g = 0; g < k; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i, ++pos) {
      groups[g].push_back(subjects[pos]);
      group_of[subjects[pos]] = g;
    }
  }

  std::vector<Fold> folds(k);
  for (std::size_t g = 0; g < k; ++g) {
    folds[g].test_subjects = groups[g];
    std::sort(folds[g].test_subjects.begin(), folds[g].test_subjects.end());
    for (std::size_t h = 0; h < k; ++h) {
      if (h != g) folds[g].train_subjects.insert(folds[g].train_subjects.end(), groups[h].begin(), groups[h].end());
    }
    std::sort(folds[g].train_subjects.begin(), folds[g].train_subjects.end());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      (group_of.at(rows[i].subject_id) == g ? folds[g].test_rows : folds[g].train_rows).push_back(i);
    }
  }
  return folds;
}

UniformClassSampler::UniformClassSampler(std::span<const std::size_t> labels, std::size_t batch_size,
                                         std::uint64_t seed, std::size_t num_classes)
    : batch_size_(batch_size), rng_(seed) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::size_t classes = num_classes;
  for (auto l : labels) classes = std::max(classes, l + 1);
  std::vector<std::vector<std::size_t>> all(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) all[labels[i]].push_back(i);
  for (std::size_t c = 0; c < classes; ++c) {
    if (all[c].empty()) {
      if (num_classes > 0) throw ConfigError("class " + std::to_string(c) + " has no samples to draw from");
      continue;
    }
    by_class_.push_back(std::move(all[c]));
  }
  if (by_class_.empty()) throw ConfigError("no samples to draw from");
}

std::vector<std::size_t> UniformClassSampler::next_batch() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  std::uniform_int_distribution<std::size_t> pick_class(0, by_class_.size() - 1);
  for (std::size_t i = 0; i < batch_size_; ++i) {
    const auto& members = by_class_[pick_class(rng_)];
    std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
    batch.push_back(members[pick_member(rng_)]);
  }
  return batch;
}

// --- synthetic data ------------------------------------------------------------

namespace {

struct GazePattern {
  double sigma;
  double amplitude;
};

// Weak diffuse, moderate, large and intense, minimal.
constexpr GazePattern kGazePatterns[] = {{9.0, 0.35}, {4.5, 0.65}, {7.0, 1.0}, {2.0, 0.2}};

void add_gaussian(std::vector<double>& plane, std::size_t size, double cx, double cy, double sigma, double amp) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t y = 0; y < size; ++y) {
    const double dy = static_cast<double>(y) - cy;
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = static_cast<double>(x) - cx;
      plane[y * size + x] += amp * std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
}

const char* variant_name(SyntheticVariant v) { return v == SyntheticVariant::kStandard ? "standard" : "gaze_dependent"; }

}  // namespace

double blob_radius(const BlobClass& blob) { return 2.0 * blob.sigma; }

void SyntheticSpec::validate() const {
  if (num_subjects == 0 || samples_per_subject == 0) throw ConfigError("synthetic spec needs subjects and samples");
  if (image_size < 16) throw ConfigError("synthetic image_size must be >= 16");
  if (num_classes < 2 || blobs.size() != num_classes) throw ConfigError("need one blob definition per class");
  if (!(gaze_fidelity >= 0.0 && gaze_fidelity <= 1.0)) throw ConfigError("gaze_fidelity must lie in [0, 1]");
  if (variant == SyntheticVariant::kGazeDependent && (num_classes != 3 || gaze_groups % 2 != 0)) {
    throw ConfigError("the gaze-dependent variant needs 3 classes and an even number of gaze groups");
  }
  if (gaze_groups < 1 || gaze_groups > std::size(kGazePatterns)) {
    throw ConfigError("gaze_groups must lie in [1, " + std::to_string(std::size(kGazePatterns)) + "]");
  }
  for (const auto& b : blobs) {
    if (!(b.sigma > 0.0) || 2.0 * blob_radius(b) + 2.0 > static_cast<double>(image_size)) {
      throw ConfigError("blob sigma does not fit the image");
    }
  }
}

void SyntheticSpec::to_kv(KeyValues& kv) const {
  kv.set("num_subjects", std::to_string(num_subjects));
  kv.set("samples_per_subject", std::to_string(samples_per_subject));
  kv.set("image_size", std::to_string(image_size));
  kv.set("num_classes", std::to_string(num_classes));
  std::string sig, amp;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    if (i) sig += ',', amp += ',';
    sig += format_real(blobs[i].sigma);
    amp += format_real(blobs[i].amplitude);
  }
  kv.set("blob_sigma", sig);
  kv.set("blob_amplitude", amp);
  kv.set("gaze_fidelity", format_real(gaze_fidelity));
  kv.set("gaze_groups", std::to_string(gaze_groups));
  kv.set("variant", variant_name(variant));
  kv.set("seed", std::to_string(seed));
}

SyntheticSpec SyntheticSpec::from_kv(const KeyValues& kv) {
  SyntheticSpec s;
  s.num_subjects = kv.get_size("num_subjects", s.num_subjects);
  s.samples_per_subject = kv.get_size("samples_per_subject", s.samples_per_subject);
  s.image_size = kv.get_size("image_size", s.image_size);
  s.num_classes = kv.get_size("num_classes", s.num_classes);
  auto parse_reals = [&](const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(kv.get_string(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ValidationError("synthetic key '" + key + "': '" + item + "' is not a number");
      }
    }
    return out;
  };
  if (kv.has("blob_sigma") || kv.has("blob_amplitude")) {
    const auto sig = parse_reals("blob_sigma");
    const auto amp = parse_reals("blob_amplitude");
    if (sig.size() != amp.size()) throw ValidationError("blob_sigma and blob_amplitude differ in length");
    s.blobs.clear();
    for (std::size_t i = 0; i < sig.size(); ++i) s.blobs.push_back({sig[i], amp[i]});
  }
  s.gaze_fidelity = kv.get_real("gaze_fidelity", s.gaze_fidelity);
  s.gaze_groups = kv.get_size("gaze_groups", s.gaze_groups);
  const std::string variant = kv.get_string("variant", "standard");
  if (variant == "standard") {
    s.variant = SyntheticVariant::kStandard;
  } else if (variant == "gaze_dependent") {
    s.variant = SyntheticVariant::kGazeDependent;
  } else {
    throw ValidationError("unknown synthetic variant '" + variant + "'");
  }
  s.seed = static_cast<std::uint64_t>(kv.get_size("seed", s.seed));
  s.validate();
  return s;
}

std::filesystem::path generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "images");
  std::filesystem::create_directories(out_dir / "heatmaps");
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t size = spec.image_size;
  const double extent = static_cast<double>(size);

  std::vector<SampleManifest> rows;
  std::ofstream truth(out_dir / "groups.csv", std::ios::trunc);
  if (!truth) throw FormatError("cannot write " + (out_dir / "groups.csv").string());
  truth << "sample_id,group,blob_class,blob_x,blob_y,gaze_x,gaze_y\n";

  for (std::size_t s = 0; s < spec.num_subjects; ++s) {
    char subject[32];
    std::snprintf(subject, sizeof(subject), "subj%03zu", s);
    const double subject_offset = 0.1 * (unit(rng) - 0.5);
    for (std::size_t j = 0; j < spec.samples_per_subject; ++j) {
      char id[48];
      std::snprintf(id, sizeof(id), "%s_%03zu", subject, j);
      const std::size_t serial = s * spec.samples_per_subject + j;
      std::size_t label = (s + j) % spec.num_classes;
      std::size_t blob_class = label;
      std::size_t group = serial / spec.num_classes % spec.gaze_groups;
      if (spec.variant == SyntheticVariant::kGazeDependent) {
        // Class 0 has the small blob; classes 1 and 2 share the large blob and
        // differ only in the gaze pattern parity.
        blob_class = label == 0 ? 0 : spec.num_classes - 1;
        if (label > 0) group = 2 * (serial / spec.num_classes % (spec.gaze_groups / 2)) + (label - 1);
      }
      const BlobClass& blob = spec.blobs[blob_class];

      std::vector<double> image(size * size, 0.2 + subject_offset);
      for (int t = 0; t < 4; ++t) {
        add_gaussian(image, size, unit(rng) * extent, unit(rng) * extent, 6.0 + 6.0 * unit(rng),
                     0.08 * (unit(rng) - 0.5));
      }
      const double margin = blob_radius(blob) + 1.0;
      const double bx = margin + unit(rng) * (extent - 1.0 - 2.0 * margin);
      const double by = margin + unit(rng) * (extent - 1.0 - 2.0 * margin);
      add_gaussian(image, size, bx, by, blob.sigma, blob.amplitude);
      for (auto& v : image) v = std::clamp(v + 0.02 * gauss(rng), 0.0, 1.0);

      double gx = bx, gy = by;
      if (unit(rng) >= spec.gaze_fidelity) {
        std::uniform_int_distribution<std::size_t> loc(0, size - 1);
        gx = static_cast<double>(loc(rng));
        gy = static_cast<double>(loc(rng));
      }
      const GazePattern& pattern = kGazePatterns[group];
      std::vector<double> heat(size * size, 0.0);
      add_gaussian(heat, size, gx, gy, pattern.sigma, pattern.amplitude);

      const std::string image_rel = std::string("images/") + id + ".pgm";
      const std::string heat_rel = std::string("heatmaps/") + id + ".pgm";
      write_pgm(out_dir / image_rel, quantize_8bit(Tensor({size, size}, std::move(image))));
      write_pgm(out_dir / heat_rel, quantize_8bit(Tensor({size, size}, std::move(heat))));
      rows.push_back({id, image_rel, heat_rel, label, subject});
      truth << id << ',' << group << ',' << blob_class << ',' << format_real(bx) << ',' << format_real(by) << ','
            << format_real(gx) << ',' << format_real(gy) << '\n';
    }
  }
  const auto manifest = out_dir / "manifest.csv";
  write_manifest(manifest, rows);
  KeyValues kv;
  spec.to_kv(kv);
  std::ofstream spec_out(out_dir / "spec.txt", std::ios::trunc);
  kv.write(spec_out);
  return manifest;
}

// --- in-memory store -------------------------------------------------------------

SampleStore::SampleStore(const std::filesystem::path& manifest_path, std::vector<SampleManifest> rows)
    : rows_(std::move(rows)) {
  for (const auto& r : rows_) {
    Tensor img = load_image(resolve_sample_path(manifest_path, r.image_path));
    Tensor heat = load_image(resolve_sample_path(manifest_path, r.heatmap_path));
    if (!images_.empty() && (img.shape() != images_.front().shape() || heat.shape() != heatmaps_.front().shape())) {
      throw ValidationError("sample '" + r.sample_id + "' has a different size from the first sample");
    }
    images_.push_back(std::move(img));
    heatmaps_.push_back(std::move(heat));
  }
}

namespace {

Batch stack(const std::vector<Tensor>& images, const std::vector<Tensor>& heats) {
  Batch b;
  const auto& is = images.front().shape();
  const auto& hs = heats.front().shape();
  std::vector<double> iv, hv;
  iv.reserve(images.size() * images.front().numel());
  hv.reserve(heats.size() * heats.front().numel());
  for (const auto& t : images) iv.insert(iv.end(), t.data().begin(), t.data().end());
  for (const auto& t : heats) hv.insert(hv.end(), t.data().begin(), t.data().end());
  b.images = Tensor({images.size(), is[0], is[1], is[2]}, std::move(iv));
  b.heatmaps = Tensor({heats.size(), hs[0], hs[1], hs[2]}, std::move(hv));
  return b;
}

}  // namespace

Batch SampleStore::gather(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw ContractError("empty batch");
  std::vector<Tensor> imgs, heats;
  for (auto r : rows) {
    imgs.push_back(images_.at(r));
    heats.push_back(heatmaps_.at(r));
  }
  Batch b = stack(imgs, heats);
  for (auto r : rows) {
    b.labels.push_back(rows_[r].label);
    b.ids.push_back(rows_[r].sample_id);
  }
  return b;
}

Batch SampleStore::gather_augmented(std::span<const std::size_t> rows, const AugmentConfig& cfg, Rng& rng) const {
  if (rows.empty()) throw ContractError("empty batch");
  std::vector<Tensor> imgs, heats;
  for (auto r : rows) {
    auto [img, heat] = augment(images_.at(r), heatmaps_.at(r), cfg, rng);
    imgs.push_back(std::move(img));
    heats.push_back(std::move(heat));
  }
  Batch b = stack(imgs, heats);
  for (auto r : rows) {
    b.labels.push_back(rows_[r].label);
    b.ids.push_back(rows_[r].sample_id);
  }
  return b;
}

}  // namespace dkgh
