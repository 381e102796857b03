// Copyright 2026 The NASCTY Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace nascty {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's content. Throws DataError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

/// Shortest decimal text that round-trips to the same double ("inf", "nan"
/// for non-finite values).
std::string format_double(double value);

/// Reads a whole file. Throws DataError if unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes a whole file, replacing any previous content. Throws DataError.
void write_file(const std::filesystem::path& path, std::string_view content);

/// UTC time as ISO-8601.
std::string utc_timestamp();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work is handed out
/// dynamically; the first exception is rethrown after all threads join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// NASCTY_WORKERS when set to a positive integer, otherwise `fallback`.
int resolve_workers(int fallback);

}  // namespace nascty
