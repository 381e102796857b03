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

#include "nascty/network_io.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "nascty/util.hpp"

namespace nascty {

static_assert(std::endian::native == std::endian::little,
              "network files are little-endian; big-endian hosts need byte swapping");

using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kMagicLine = "NASCTYNN\n";

json spec_to_json(const LayerSpec& spec) {
  struct Visitor {
    json operator()(const Conv1DSpec& s) const {
      return {{"type", "conv1d"}, {"filters", s.n_filters}, {"kernel", s.kernel_size}};
    }
    json operator()(const BatchNormSpec&) const { return {{"type", "batch_norm"}}; }
    json operator()(const ActivationSpec& s) const {
      return {{"type", "activation"}, {"kind", s.kind == ActivationKind::Selu ? "selu" : "relu"}};
    }
    json operator()(const PoolSpec& s) const {
      return {{"type", "pool"},
              {"kind", s.kind == PoolKind::Max ? "max" : "average"},
              {"size", s.size},
              {"stride", s.stride}};
    }
    json operator()(const FlattenSpec&) const { return {{"type", "flatten"}}; }
    json operator()(const DenseSpec& s) const {
      return {{"type", "dense"}, {"neurons", s.n_neurons}};
    }
    json operator()(const SoftmaxOutputSpec& s) const {
      return {{"type", "softmax_output"}, {"classes", s.n_classes}};
    }
  };
  return std::visit(Visitor{}, spec);
}

LayerSpec spec_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "conv1d") return Conv1DSpec{j.at("filters").get<int>(), j.at("kernel").get<int>()};
  if (type == "batch_norm") return BatchNormSpec{};
  if (type == "activation") {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "selu" && kind != "relu") throw DataError("unknown activation " + kind);
    return ActivationSpec{kind == "selu" ? ActivationKind::Selu : ActivationKind::Relu};
  }
  if (type == "pool") {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "max" && kind != "average") throw DataError("unknown pool kind " + kind);
    return PoolSpec{kind == "max" ? PoolKind::Max : PoolKind::Average, j.at("size").get<int>(),
                    j.at("stride").get<int>()};
  }
  if (type == "flatten") return FlattenSpec{};
  if (type == "dense") return DenseSpec{j.at("neurons").get<int>()};
  if (type == "softmax_output") return SoftmaxOutputSpec{j.at("classes").get<int>()};
  throw DataError("unknown layer type " + type);
}

}  // namespace

std::string specs_to_json(const std::vector<LayerSpec>& specs) {
  json arr = json::array();
  for (const auto& s : specs) arr.push_back(spec_to_json(s));
  return arr.dump();
}

std::vector<LayerSpec> specs_from_json(const std::string& text) {
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw DataError("layer list must be a JSON array");
    std::vector<LayerSpec> specs;
    for (const auto& j : arr) specs.push_back(spec_from_json(j));
    return specs;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed layer list: ") + e.what());
  }
}

std::string encode_network(TrainedNetwork& net) {
  std::vector<ParamView<float>> tensors = net.parameters();
  for (auto& b : net.buffers()) tensors.push_back(b);
  json header;
  header["version"] = kNetworkFormatVersion;
  header["input_length"] = net.input_length();
  header["init_seed"] = net.init_seed();
  header["layers"] = json::parse(specs_to_json(net.specs()));
  json list = json::array();
  std::size_t total = 0;
  for (const auto& t : tensors) {
    list.push_back({{"name", t.name}, {"size", t.value.size()}});
    total += t.value.size();
  }
  header["tensors"] = std::move(list);
  std::string out(kMagicLine);
  out += header.dump();
  out += '\n';
  const std::size_t pos = out.size();
  out.resize(pos + total * sizeof(float));
  std::size_t off = pos;
  for (const auto& t : tensors) {
    std::memcpy(out.data() + off, t.value.data(), t.value.size() * sizeof(float));
    off += t.value.size() * sizeof(float);
  }
  return out;
}

TrainedNetwork decode_network(const std::string& bytes) {
  if (bytes.compare(0, kMagicLine.size(), kMagicLine) != 0)
    throw DataError("not a network file (bad magic)");
  const std::size_t eol = bytes.find('\n', kMagicLine.size());
  if (eol == std::string::npos) throw DataError("corrupt network file: missing header line");
  json header;
  try {
    header = json::parse(bytes.substr(kMagicLine.size(), eol - kMagicLine.size()));
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt network header: ") + e.what());
  }
  try {
    const int version = header.at("version").get<int>();
    if (version != kNetworkFormatVersion)
      throw DataError("unsupported network version " + std::to_string(version));
    TrainedNetwork net(specs_from_json(header.at("layers").dump()),
                       header.at("input_length").get<std::size_t>());
    net.set_init_seed(header.value("init_seed", std::uint64_t{0}));
    std::vector<ParamView<float>> tensors = net.parameters();
    for (auto& b : net.buffers()) tensors.push_back(b);
    const json& list = header.at("tensors");
    if (list.size() != tensors.size())
      throw DataError("network file lists " + std::to_string(list.size()) + " tensors, expected " +
                      std::to_string(tensors.size()));
    std::size_t off = eol + 1;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const std::size_t n = list[i].at("size").get<std::size_t>();
      if (n != tensors[i].value.size() || list[i].at("name") != tensors[i].name)
        throw DataError("tensor " + std::to_string(i) + " (" + tensors[i].name +
                        ") does not match the layer list");
      if (off + n * sizeof(float) > bytes.size())
        throw DataError("corrupt network file: truncated tensor data");
      std::memcpy(tensors[i].value.data(), bytes.data() + off, n * sizeof(float));
      off += n * sizeof(float);
    }
    if (off != bytes.size()) throw DataError("corrupt network file: trailing bytes");
    return net;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt network header: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("network file has an invalid layer list: ") + e.what());
  }
}

void save_network(const std::filesystem::path& path, TrainedNetwork& net) {
  write_file(path, encode_network(net));
}

TrainedNetwork load_network(const std::filesystem::path& path) {
  return decode_network(read_file(path));
}

}  // namespace nascty
