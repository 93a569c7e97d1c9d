// Copyright 2026 The Continuous Analysis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Small filesystem helpers shared by every persistent module. All failures
// surface as Error{storage_io}.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ca::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
std::optional<std::string> try_read_file(const fs::path& path);

/// Write to a sibling temp file, fsync, then rename over `path`.
void write_file_atomic(const fs::path& path, std::string_view bytes);

/// Append `line` plus '\n' in a single write and fsync.
void append_line(const fs::path& path, std::string_view line);

/// Complete lines only; a trailing fragment without '\n' is ignored
/// (a torn append). Missing file yields an empty list.
std::vector<std::string> read_lines(const fs::path& path);

/// Reads complete lines starting at byte `offset`; advances `offset` past the
/// last complete line consumed.
std::vector<std::string> read_lines_from(const fs::path& path, std::uintmax_t& offset);

/// Current UTC time, RFC 3339 with microseconds: 2026-01-02T03:04:05.123456Z.
/// Fixed width, so lexicographic order equals chronological order.
std::string now_rfc3339();

}  // namespace ca::io
