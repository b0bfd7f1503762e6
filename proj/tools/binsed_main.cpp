// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "binsed/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return binsed::run_cli(args);
}
