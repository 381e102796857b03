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

#include "nascty/trace_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "nascty/util.hpp"

namespace nascty {

static_assert(std::endian::native == std::endian::little,
              "trace files are little-endian; big-endian hosts need byte swapping");
static_assert(std::numeric_limits<float>::is_iec559);

namespace {

template <typename T>
void put(std::string& out, std::size_t offset, T value) {
  std::memcpy(out.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

}  // namespace

std::uint64_t TraceFileHeader::payload_size() const {
  std::uint64_t size = 4 * n_traces * n_samples + 3 * n_traces;
  if (flags & kHasMasks) size += n_traces;
  return size;
}

std::string encode_traceset(const TraceSet& ts) {
  ts.validate();
  if (ts.n_samples > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("n_samples does not fit the trace file header");

  TraceFileHeader h;
  h.n_samples = static_cast<std::uint32_t>(ts.n_samples);
  h.n_traces = ts.n_traces;
  if (ts.masks) h.flags |= TraceFileHeader::kHasMasks;
  if (ts.normalized) h.flags |= TraceFileHeader::kNormalized;

  std::string out(kTraceHeaderSize + h.payload_size(), '\0');
  std::memcpy(out.data(), kTraceMagic.data(), kTraceMagic.size());
  put(out, 8, h.format_version);
  put(out, 10, h.flags);
  put(out, 12, h.n_samples);
  put(out, 16, h.n_traces);

  std::size_t pos = kTraceHeaderSize;
  std::memcpy(out.data() + pos, ts.traces.data(), ts.traces.size() * sizeof(float));
  pos += ts.traces.size() * sizeof(float);
  for (const auto* column : {&ts.plaintexts, &ts.keys, &ts.labels}) {
    std::memcpy(out.data() + pos, column->data(), column->size());
    pos += column->size();
  }
  if (ts.masks) std::memcpy(out.data() + pos, ts.masks->data(), ts.masks->size());
  return out;
}

TraceSet decode_traceset(const std::string& bytes) {
  using Kind = TraceFileError::Kind;
  if (bytes.size() < kTraceHeaderSize)
    throw TraceFileError(Kind::Truncated, "corrupt file: truncated header (" +
                                              std::to_string(bytes.size()) + " of " +
                                              std::to_string(kTraceHeaderSize) + " bytes)");
  if (std::memcmp(bytes.data(), kTraceMagic.data(), kTraceMagic.size()) != 0)
    throw TraceFileError(Kind::BadMagic, "bad magic: not a NASCTY01 trace file");

  TraceFileHeader h;
  h.format_version = get<std::uint16_t>(bytes, 8);
  h.flags = get<std::uint16_t>(bytes, 10);
  h.n_samples = get<std::uint32_t>(bytes, 12);
  h.n_traces = get<std::uint64_t>(bytes, 16);
  if (h.format_version != kTraceFormatVersion)
    throw TraceFileError(Kind::UnsupportedVersion,
                         "unsupported version " + std::to_string(h.format_version) +
                             " (expected " + std::to_string(kTraceFormatVersion) + ")");
  if (h.n_samples == 0)
    throw TraceFileError(Kind::SizeMismatch, "size mismatch: n_samples is zero");

  // Guard the size arithmetic against overflow before trusting it.
  constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 40;
  if (h.n_traces > kMaxElements / h.n_samples)
    throw TraceFileError(Kind::SizeMismatch, "size mismatch: declared dimensions too large");

  const std::uint64_t have = bytes.size() - kTraceHeaderSize;
  const std::uint64_t want = h.payload_size();
  const std::uint64_t trace_bytes = 4 * h.n_traces * h.n_samples;
  if (have < want) {
    // Name the first section that is incomplete.
    const char* section = "masks";
    std::uint64_t end = trace_bytes;
    if (have < end) {
      section = "traces";
    } else if (have < (end += h.n_traces)) {
      section = "plaintexts";
    } else if (have < (end += h.n_traces)) {
      section = "keys";
    } else if (have < (end += h.n_traces)) {
      section = "labels";
    }
    throw TraceFileError(Kind::Truncated, std::string("corrupt file: truncated payload, missing ") +
                                              section + " section");
  }
  if (have > want)
    throw TraceFileError(Kind::SizeMismatch, "size mismatch: " + std::to_string(have - want) +
                                                 " trailing bytes after payload");

  TraceSet ts;
  ts.n_traces = h.n_traces;
  ts.n_samples = h.n_samples;
  ts.normalized = (h.flags & TraceFileHeader::kNormalized) != 0;
  ts.traces.resize(h.n_traces * h.n_samples);
  std::size_t pos = kTraceHeaderSize;
  std::memcpy(ts.traces.data(), bytes.data() + pos, trace_bytes);
  pos += trace_bytes;
  auto column = [&](std::vector<std::uint8_t>& dst) {
    dst.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
               bytes.begin() + static_cast<std::ptrdiff_t>(pos + h.n_traces));
    pos += h.n_traces;
  };
  column(ts.plaintexts);
  column(ts.keys);
  column(ts.labels);
  if (h.flags & TraceFileHeader::kHasMasks) column(ts.masks.emplace());
  return ts;
}

void write_traceset(const TraceSet& ts, const std::filesystem::path& path) {
  try {
    write_file(path, encode_traceset(ts));
  } catch (const TraceFileError&) {
    throw;
  } catch (const DataError& e) {
    throw TraceFileError(TraceFileError::Kind::Io, e.what());
  }
}

TraceSet read_traceset(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const DataError& e) {
    throw TraceFileError(TraceFileError::Kind::Io, e.what());
  }
  return decode_traceset(bytes);
}

}  // namespace nascty
