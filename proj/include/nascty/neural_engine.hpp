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
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <new>
#include <vector>

#include "nascty/common.hpp"

namespace nascty {

class Rng;

enum class ActivationKind { Selu, Relu };
enum class PoolKind { Average, Max };

struct Conv1DSpec {
  int n_filters = 1;
  int kernel_size = 1;
  bool operator==(const Conv1DSpec&) const = default;
};
struct BatchNormSpec {
  bool operator==(const BatchNormSpec&) const = default;
};
struct ActivationSpec {
  ActivationKind kind = ActivationKind::Selu;
  bool operator==(const ActivationSpec&) const = default;
};
struct PoolSpec {
  PoolKind kind = PoolKind::Average;
  int size = 2;
  int stride = 2;
  bool operator==(const PoolSpec&) const = default;
};
struct FlattenSpec {
  bool operator==(const FlattenSpec&) const = default;
};
struct DenseSpec {
  int n_neurons = 1;
  bool operator==(const DenseSpec&) const = default;
};
// Dense(n_classes) followed by softmax; always the last layer.
struct SoftmaxOutputSpec {
  int n_classes = static_cast<int>(kNumClasses);
  bool operator==(const SoftmaxOutputSpec&) const = default;
};

using LayerSpec = std::variant<Conv1DSpec, BatchNormSpec, ActivationSpec, PoolSpec,
                               FlattenSpec, DenseSpec, SoftmaxOutputSpec>;

std::string describe(const LayerSpec& spec);

// Activation shape of one sample: `length` positions of `channels` values,
// stored position-major ([length][channels]).
struct Shape {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::size_t size() const { return length * channels; }
  bool operator==(const Shape&) const = default;
};

/// Output length of a pooling window sweep, floor((L - size) / stride) + 1,
/// or 0 when the window does not fit.
std::size_t pooled_length(std::size_t length, int size, int stride);

class ShapeError : public ValidationError {
 public:
  ShapeError(std::size_t layer_index, const std::string& message)
      : ValidationError("layer " + std::to_string(layer_index) + ": " + message),
        layer_index_(layer_index) {}
  std::size_t layer_index() const { return layer_index_; }

 private:
  std::size_t layer_index_;
};

/// Per-layer output shapes for an input of `input_length` samples; throws
/// ShapeError naming the first layer whose output would be empty or whose
/// input is unsupported.
std::vector<Shape> infer_shapes(std::span<const LayerSpec> specs, std::size_t input_length);

/// Trainable parameter count of the whole stack.
std::size_t count_parameters(std::span<const LayerSpec> specs, std::size_t input_length);

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kBatchNormEpsilon = 1e-3;
inline constexpr double kBatchNormMomentum = 0.9;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class Mode { Training, Inference };

/// Cache-line aligned storage. Vectorized reductions split their work by
/// address alignment, so fixed alignment keeps results bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct Tensor {
  std::size_t batch = 0;
  Shape shape;
  AlignedVector<T> data;  // [batch][length][channels]

  void resize(std::size_t b, Shape s) {
    batch = b;
    shape = s;
    data.resize(b * s.size());
  }
};

template <typename T>
class Layer;

/// Named view of one parameter tensor and its gradient buffer.
template <typename T>
struct ParamView {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
};

/// Gradient of the loss for every trainable tensor, in parameters() order.
template <typename T>
using Gradients = std::vector<std::vector<T>>;

/// Sequential 1-D network ending in a softmax output layer.
///
/// The same class serves float training (TrainedNetwork) and double
/// gradient checking. A network owns its parameters, the Adam moments and
/// batch-norm running statistics, and per-layer activation caches, so it is
/// not safe to share across threads while training.
template <typename T>
class Network {
 public:
  Network(std::vector<LayerSpec> specs, std::size_t input_length);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t input_length() const { return input_length_; }
  std::size_t n_classes() const;
  const std::vector<Shape>& shapes() const { return shapes_; }
  std::size_t parameter_count() const;

  /// He-normal conv/dense weights, Glorot-uniform output weights, zero
  /// biases, unit batch-norm scale. Resets optimizer state.
  void init_parameters(std::uint64_t seed);

  /// Probabilities, batch x n_classes row-major. `inputs` is batch x
  /// input_length row-major.
  std::vector<T> forward(std::span<const T> inputs, std::size_t batch,
                         Mode mode = Mode::Inference);

  /// Inference-mode forward pass on local buffers; safe to call from many
  /// threads on the same network.
  std::vector<T> infer(std::span<const T> inputs, std::size_t batch) const;

  /// Runs a training-mode forward pass and back-propagates the mean
  /// cross-entropy. Returns the loss; gradients are left in grad buffers.
  double compute_gradients(std::span<const T> inputs, std::size_t batch,
                           std::span<const std::uint8_t> labels);

  Gradients<T> backward(std::span<const T> inputs, std::size_t batch,
                        std::span<const std::uint8_t> labels);

  void adam_step(const Gradients<T>& gradients, double lr);
  /// Adam update from the network's own gradient buffers.
  void adam_step(double lr);

  std::vector<ParamView<T>> parameters();
  /// Non-trainable state (batch-norm running mean and variance).
  std::vector<ParamView<T>> buffers();

  std::uint64_t adam_steps() const { return adam_t_; }
  std::uint64_t init_seed() const { return init_seed_; }
  const AdamConfig& adam_config() const { return adam_; }

  /// Adam first/second moments, aligned with parameters().
  std::vector<std::vector<T>>& adam_m() { return adam_m_; }
  std::vector<std::vector<T>>& adam_v() { return adam_v_; }
  void set_adam_state(std::uint64_t steps) { adam_t_ = steps; }
  void set_init_seed(std::uint64_t seed) { init_seed_ = seed; }

 private:
  const Tensor<T>& run_forward(std::span<const T> inputs, std::size_t batch, Mode mode);

  std::vector<LayerSpec> specs_;
  std::size_t input_length_;
  std::vector<Shape> shapes_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Tensor<T>> activations_;
  std::vector<Tensor<T>> grads_;
  Tensor<T> input_;
  AdamConfig adam_;
  std::vector<std::vector<T>> adam_m_;
  std::vector<std::vector<T>> adam_v_;
  std::uint64_t adam_t_ = 0;
  std::uint64_t init_seed_ = 0;
};

using TrainedNetwork = Network<float>;

extern template class Network<float>;
extern template class Network<double>;

/// Mean categorical cross-entropy of row-major probabilities, with the log
/// argument clamped below at 1e-12. Throws ValidationError for labels
/// outside the class range.
double cce_loss(std::span<const double> probs, std::size_t n_classes,
                std::span<const std::uint8_t> labels);
double cce_loss(std::span<const float> probs, std::size_t n_classes,
                std::span<const std::uint8_t> labels);

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// Mini-batch Adam training on row-major traces. Batches are reshuffled
/// every epoch by `cfg.seed`; the final partial batch is kept.
template <typename T>
void train(Network<T>& net, std::span<const float> traces, std::span<const std::uint8_t> labels,
           const TrainConfig& cfg);

/// Inference-mode probabilities for every trace, evaluated in chunks.
std::vector<float> predict(const TrainedNetwork& net, std::span<const float> traces,
                           std::size_t n_traces, std::size_t chunk = 256);

/// Mean inference-mode cross-entropy over a labeled set.
double evaluate_loss(const TrainedNetwork& net, std::span<const float> traces,
                     std::span<const std::uint8_t> labels, std::size_t chunk = 256);

}  // namespace nascty
