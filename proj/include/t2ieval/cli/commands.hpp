// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace t2ieval::cli {

// Parses arguments and runs one subcommand. Returns the process exit code:
// 0 on success, otherwise exit_code() of the failing error class.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Directory holding the shipped protocol file.
std::string data_dir();
std::string version();

}  // namespace t2ieval::cli
