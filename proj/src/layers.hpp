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

#include <memory>
#include <vector>

#include "nascty/neural_engine.hpp"

namespace nascty {

// One stage of a Network. Layers never cache activations: backward()
// receives the forward input and output and recomputes anything else it
// needs, which keeps inference const and shareable across threads.
template <typename T>
class Layer {
 public:
  explicit Layer(Shape in, Shape out) : in_(in), out_(out) {}
  virtual ~Layer() = default;

  const Shape& input_shape() const { return in_; }
  const Shape& output_shape() const { return out_; }

  virtual void forward_infer(const Tensor<T>& in, Tensor<T>& out) const = 0;
  virtual void forward_train(const Tensor<T>& in, Tensor<T>& out) { forward_infer(in, out); }

  // Accumulates parameter gradients and, if requested, writes dL/d(in).
  // For the softmax output layer grad_out is dL/d(logits).
  virtual void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& grad_out,
                        Tensor<T>* grad_in) = 0;

  virtual void init(Rng& /*rng*/) {}
  virtual std::vector<ParamView<T>> params() { return {}; }
  virtual std::vector<ParamView<T>> buffers() { return {}; }

 protected:
  Shape in_;
  Shape out_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, Shape in, Shape out);

}  // namespace nascty
