// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dkgh/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace dkgh {
namespace {

constexpr std::array<char, 4> kMagic = {'D', 'K', 'T', '1'};

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw FormatError("DKT1: truncated stream");
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_dkt1(std::ostream& out, const Tensor& t, DType dtype) {
  if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw FormatError("DKT1: rank too large");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw FormatError("DKT1: dimension too large");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (double v : t.data()) {
    if (dtype == DType::kF64) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  if (!out) throw FormatError("DKT1: write failed");
}

Tensor read_dkt1(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("DKT1: bad magic");
  const auto tag = get_le<std::uint8_t>(in);
  if (tag > 1) throw FormatError("DKT1: unknown dtype tag " + std::to_string(tag));
  const auto rank = get_le<std::uint8_t>(in);
  if (rank == 0) throw FormatError("DKT1: rank 0 tensor");
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_le<std::uint32_t>(in);
    if (d == 0) throw FormatError("DKT1: zero dimension");
  }
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) {
    if (tag == 0) {
      v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    } else {
      v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
    }
  }
  return Tensor(std::move(shape), std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_dkt1(out, t, dtype);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return read_dkt1(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace dkgh
