// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/cli/commands.hpp"

int main(int argc, char** argv) { return t2ieval::cli::run_cli(argc, argv); }
