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

#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "nascty/rng.hpp"
#include "nascty/trace_store.hpp"
#include "nascty/util.hpp"

using namespace nascty;

namespace {

TraceSet random_set(std::uint64_t seed) {
  Rng rng(seed);
  TraceParams p;
  p.n_samples = 1 + rng.index(64);
  p.leak_point_value = rng.index(p.n_samples);
  p.masking_enabled = rng.coin();
  p.noise_sigma = rng.uniform();
  p.key_byte = rng.byte();
  p.seed = rng.next_u64();
  TraceSet ts = generate(p, 1 + rng.index(50));
  if (rng.coin()) ts = normalize(ts);
  return ts;
}

TraceFileError::Kind decode_kind(const std::string& bytes) {
  try {
    decode_traceset(bytes);
  } catch (const TraceFileError& e) {
    return e.kind();
  }
  FAIL("expected TraceFileError");
  return TraceFileError::Kind::Io;
}

}  // namespace

TEST_CASE("header layout") {
  TraceParams p;
  p.n_samples = 7;
  p.leak_point_value = 3;
  p.masking_enabled = true;
  const TraceSet ts = generate(p, 5);
  const std::string bytes = encode_traceset(ts);
  CHECK(bytes.compare(0, 8, "NASCTY01") == 0);
  std::uint16_t version, flags;
  std::uint32_t n_samples;
  std::uint64_t n_traces;
  std::memcpy(&version, bytes.data() + 8, 2);
  std::memcpy(&flags, bytes.data() + 10, 2);
  std::memcpy(&n_samples, bytes.data() + 12, 4);
  std::memcpy(&n_traces, bytes.data() + 16, 8);
  CHECK(version == 1);
  CHECK(flags == TraceFileHeader::kHasMasks);
  CHECK(n_samples == 7);
  CHECK(n_traces == 5);
  for (std::size_t i = 24; i < 64; ++i) CHECK(bytes[i] == 0);
  CHECK(bytes.size() == 64 + 5 * 7 * 4 + 4 * 5);
}

TEST_CASE("write, read, write is byte-identical over random sets") {
  const auto dir = std::filesystem::temp_directory_path() / "nascty_store_test";
  std::filesystem::create_directories(dir);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const TraceSet ts = random_set(s);
    const auto path = dir / "a.bin";
    write_traceset(ts, path);
    const TraceSet back = read_traceset(path);
    CHECK(back.same_content(ts));
    const auto path2 = dir / "b.bin";
    write_traceset(back, path2);
    CHECK(read_file(path) == read_file(path2));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt inputs raise typed errors") {
  TraceParams p;
  p.n_samples = 10;
  p.leak_point_value = 4;
  const std::string good = encode_traceset(generate(p, 8));

  std::string bad = good;
  bad[0] = 'X';
  CHECK(decode_kind(bad) == TraceFileError::Kind::BadMagic);

  bad = good;
  bad[8] = 2;
  CHECK(decode_kind(bad) == TraceFileError::Kind::UnsupportedVersion);

  CHECK(decode_kind(good.substr(0, 30)) == TraceFileError::Kind::Truncated);
  CHECK(decode_kind(good.substr(0, good.size() - 3)) == TraceFileError::Kind::Truncated);
  CHECK(decode_kind(good + "xx") == TraceFileError::Kind::SizeMismatch);

  bad = good;
  const std::uint64_t huge = ~std::uint64_t{0};
  std::memcpy(bad.data() + 16, &huge, 8);
  CHECK(decode_kind(bad) == TraceFileError::Kind::SizeMismatch);
}

TEST_CASE("truncation names the missing section") {
  TraceParams p;
  p.n_samples = 4;
  p.leak_point_value = 1;
  const std::string good = encode_traceset(generate(p, 10));
  try {
    decode_traceset(good.substr(0, good.size() - 5));
    FAIL("expected error");
  } catch (const TraceFileError& e) {
    CHECK(std::string(e.what()).find("labels") != std::string::npos);
  }
  try {
    decode_traceset(good.substr(0, 64 + 8));
    FAIL("expected error");
  } catch (const TraceFileError& e) {
    CHECK(std::string(e.what()).find("traces") != std::string::npos);
  }
}

TEST_CASE("missing file is an io error") {
  try {
    read_traceset("/nonexistent/nowhere.bin");
    FAIL("expected error");
  } catch (const TraceFileError& e) {
    CHECK(e.kind() == TraceFileError::Kind::Io);
  }
}
