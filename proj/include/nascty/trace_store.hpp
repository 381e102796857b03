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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "nascty/common.hpp"
#include "nascty/trace_model.hpp"

namespace nascty {

// Trace file layout (all integers little-endian):
//
//   offset  size  field
//        0     8  magic "NASCTY01"
//        8     2  format_version (1)
//       10     2  flags: bit 0 has_masks, bit 1 normalized
//       12     4  n_samples
//       16     8  n_traces
//       24    40  reserved, zero
//       64        traces, float32 row-major (n_traces * n_samples)
//                 plaintexts, keys, labels (n_traces bytes each)
//                 masks (n_traces bytes) iff has_masks
inline constexpr std::array<char, 8> kTraceMagic = {'N', 'A', 'S', 'C', 'T', 'Y', '0', '1'};
inline constexpr std::uint16_t kTraceFormatVersion = 1;
inline constexpr std::size_t kTraceHeaderSize = 64;

struct TraceFileHeader {
  std::uint16_t format_version = kTraceFormatVersion;
  std::uint16_t flags = 0;
  std::uint32_t n_samples = 0;
  std::uint64_t n_traces = 0;

  static constexpr std::uint16_t kHasMasks = 1u << 0;
  static constexpr std::uint16_t kNormalized = 1u << 1;

  /// Exact payload size implied by the header, in bytes.
  std::uint64_t payload_size() const;
};

class TraceFileError : public DataError {
 public:
  enum class Kind { Io, BadMagic, UnsupportedVersion, SizeMismatch, Truncated };

  TraceFileError(Kind kind, const std::string& message) : DataError(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Serializes a trace set into the bytes of a trace file.
std::string encode_traceset(const TraceSet& ts);

/// Parses trace-file bytes; validates header and sizes before allocating.
TraceSet decode_traceset(const std::string& bytes);

void write_traceset(const TraceSet& ts, const std::filesystem::path& path);
TraceSet read_traceset(const std::filesystem::path& path);

}  // namespace nascty
