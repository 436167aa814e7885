// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dkgh {

/// Flat `key=value` text configuration. Blank lines and `#` comments are
/// ignored; keys are unique.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& origin = "<config>");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_real(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) const;

  /// Keys never read through a getter; used to reject typos.
  std::vector<std::string> unused_keys() const;

  void write(std::ostream& out) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> read_;
};

std::string join_sizes(const std::vector<std::size_t>& values);
/// Round-trippable decimal form of a double.
std::string format_real(double v);

}  // namespace dkgh
