// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace t2ieval {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);
std::string base64_encode(std::string_view data);

}  // namespace t2ieval
