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

#include <filesystem>

#include "nascty/genome.hpp"
#include "nascty/network_io.hpp"
#include "nascty/rng.hpp"

using namespace nascty;

namespace {

std::vector<LayerSpec> small_net() {
  return {Conv1DSpec{4, 3},   BatchNormSpec{}, ActivationSpec{ActivationKind::Selu},
          PoolSpec{PoolKind::Max, 2, 2}, FlattenSpec{}, DenseSpec{6},
          ActivationSpec{ActivationKind::Selu}, SoftmaxOutputSpec{}};
}

std::vector<float> random_inputs(std::size_t n, std::size_t len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> x(n * len);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  return x;
}

}  // namespace

TEST_CASE("layer list json round trip") {
  const auto specs = small_net();
  const std::string text = specs_to_json(specs);
  CHECK(text.find("\"conv1d\"") != std::string::npos);
  CHECK(specs_from_json(text) == specs);
  CHECK_THROWS_AS(specs_from_json("{}"), DataError);
  CHECK_THROWS_AS(specs_from_json("[{\"type\":\"lstm\"}]"), DataError);
}

TEST_CASE("encoded network reproduces predictions and re-encodes identically") {
  TrainedNetwork net(small_net(), 20);
  net.init_parameters(5);
  // Move batch-norm statistics away from their initial values.
  const auto x = random_inputs(64, 20, 1);
  std::vector<std::uint8_t> y(64);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<std::uint8_t>(i * 7);
  train(net, x, y, TrainConfig{2, 16, 1e-3, 3});

  const std::string bytes = encode_network(net);
  CHECK(bytes.rfind("NASCTYNN\n", 0) == 0);
  TrainedNetwork back = decode_network(bytes);
  CHECK(back.specs() == net.specs());
  CHECK(back.input_length() == 20);
  CHECK(predict(back, x, 64) == predict(net, x, 64));
  CHECK(encode_network(back) == bytes);

  const auto dir = std::filesystem::temp_directory_path() / "nascty_netio_test";
  std::filesystem::create_directories(dir);
  save_network(dir / "n.bin", net);
  TrainedNetwork loaded = load_network(dir / "n.bin");
  CHECK(encode_network(loaded) == bytes);
  std::filesystem::remove_all(dir);
}

TEST_CASE("expressed genomes survive the file format") {
  Rng rng(9);
  int done = 0;
  while (done < 5) {
    const Genome g = random_genome(rng);
    std::vector<LayerSpec> specs;
    try {
      specs = express(g, 60);
    } catch (const InexpressibleGenome&) {
      continue;
    }
    if (count_parameters(specs, 60) > 200000) continue;
    TrainedNetwork net(specs, 60);
    net.init_parameters(done);
    TrainedNetwork back = decode_network(encode_network(net));
    const auto x = random_inputs(3, 60, done);
    CHECK(predict(back, x, 3) == predict(net, x, 3));
    ++done;
  }
}

TEST_CASE("corrupt network files are data errors") {
  TrainedNetwork net(small_net(), 20);
  net.init_parameters(1);
  const std::string good = encode_network(net);
  CHECK_THROWS_AS(decode_network("XASCTYNN\n{}\n"), DataError);
  CHECK_THROWS_AS(decode_network("NASCTYNN\n{\"version\""), DataError);
  CHECK_THROWS_AS(decode_network(good.substr(0, good.size() - 4)), DataError);
  CHECK_THROWS_AS(decode_network(good + "x"), DataError);
  std::string bumped = good;
  const auto pos = bumped.find("\"version\":1");
  REQUIRE(pos != std::string::npos);
  bumped[pos + 10] = '7';
  CHECK_THROWS_AS(decode_network(bumped), DataError);
  CHECK_THROWS_AS(load_network("/nonexistent/net.bin"), Error);
}
