// Copyright 2026 The DKGH-MoE Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "dkgh/cli.hpp"

int main(int argc, char** argv) {
  return dkgh::cli_dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
