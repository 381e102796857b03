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
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nascty {

inline constexpr std::size_t kNumClasses = 256;

// Lower clamp applied before every log of a predicted probability.
inline constexpr double kLogClamp = 1e-12;

inline constexpr const char* kToolVersion = "0.1.0";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, flags, genome bounds or shapes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Missing, unreadable or corrupt input data.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace nascty
