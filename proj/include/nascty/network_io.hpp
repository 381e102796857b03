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

#include <filesystem>
#include <string>
#include <vector>

#include "nascty/neural_engine.hpp"

namespace nascty {

inline constexpr int kNetworkFormatVersion = 1;

/// Layer list as a JSON array, e.g. [{"type":"conv1d","filters":8,"kernel":3}].
std::string specs_to_json(const std::vector<LayerSpec>& specs);
std::vector<LayerSpec> specs_from_json(const std::string& text);

/// Magic line "NASCTYNN", one line of JSON describing layers and tensors,
/// then every parameter and batch-norm buffer as little-endian float32.
std::string encode_network(TrainedNetwork& net);
TrainedNetwork decode_network(const std::string& bytes);

void save_network(const std::filesystem::path& path, TrainedNetwork& net);
TrainedNetwork load_network(const std::filesystem::path& path);

}  // namespace nascty
