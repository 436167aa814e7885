// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "dkgh/tensor.hpp"

namespace dkgh {

enum class DType : std::uint8_t { kF64 = 0, kF32 = 1 };

// DKT1 layout: "DKT1", u8 dtype, u8 rank, rank x u32 dims (LE), LE payload.
void write_dkt1(std::ostream& out, const Tensor& t, DType dtype = DType::kF64);
Tensor read_dkt1(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::kF64);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace dkgh
