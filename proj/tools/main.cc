// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cli.h"

int main(int argc, char** argv) {
  return dwa::cli::run_cli({argv, argv + argc}, std::cout, std::cerr);
}
