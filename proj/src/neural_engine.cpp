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

#include "nascty/neural_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "layers.hpp"
#include "nascty/rng.hpp"

namespace nascty {

std::string describe(const LayerSpec& spec) {
  struct Visitor {
    std::string operator()(const Conv1DSpec& s) const {
      return "Conv1D(filters=" + std::to_string(s.n_filters) +
             ", kernel=" + std::to_string(s.kernel_size) + ")";
    }
    std::string operator()(const BatchNormSpec&) const { return "BatchNorm"; }
    std::string operator()(const ActivationSpec& s) const {
      return s.kind == ActivationKind::Selu ? "SELU" : "ReLU";
    }
    std::string operator()(const PoolSpec& s) const {
      return std::string(s.kind == PoolKind::Max ? "MaxPool" : "AveragePool") +
             "(size=" + std::to_string(s.size) + ", stride=" + std::to_string(s.stride) + ")";
    }
    std::string operator()(const FlattenSpec&) const { return "Flatten"; }
    std::string operator()(const DenseSpec& s) const {
      return "Dense(" + std::to_string(s.n_neurons) + ")";
    }
    std::string operator()(const SoftmaxOutputSpec& s) const {
      return "SoftmaxOutput(" + std::to_string(s.n_classes) + ")";
    }
  };
  return std::visit(Visitor{}, spec);
}

std::size_t pooled_length(std::size_t length, int size, int stride) {
  const auto s = static_cast<std::size_t>(size);
  if (size < 1 || stride < 1 || length < s) return 0;
  return (length - s) / static_cast<std::size_t>(stride) + 1;
}

std::vector<Shape> infer_shapes(std::span<const LayerSpec> specs, std::size_t input_length) {
  if (input_length == 0) throw ShapeError(0, "input length must be positive");
  std::vector<Shape> shapes;
  shapes.reserve(specs.size());
  Shape cur{input_length, 1};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& spec = specs[i];
    if (const auto* c = std::get_if<Conv1DSpec>(&spec)) {
      if (c->n_filters < 1 || c->kernel_size < 1)
        throw ShapeError(i, "conv filters and kernel size must be positive");
      if (cur.length == 1 && i > 0 && std::holds_alternative<FlattenSpec>(specs[i - 1]))
        throw ShapeError(i, "convolution after flatten is not supported");
      cur = {cur.length, static_cast<std::size_t>(c->n_filters)};
    } else if (const auto* p = std::get_if<PoolSpec>(&spec)) {
      if (p->size < 2 || p->stride < 2)
        throw ShapeError(i, "pool size and stride must be at least 2");
      const std::size_t len = pooled_length(cur.length, p->size, p->stride);
      if (len < 1)
        throw ShapeError(i, "pool window " + std::to_string(p->size) + " is longer than its input (" +
                                std::to_string(cur.length) + " positions)");
      cur.length = len;
    } else if (std::holds_alternative<FlattenSpec>(spec)) {
      cur = {1, cur.size()};
    } else if (const auto* d = std::get_if<DenseSpec>(&spec)) {
      if (d->n_neurons < 1) throw ShapeError(i, "dense layer needs at least one neuron");
      if (cur.length != 1) throw ShapeError(i, "dense layer requires flattened input");
      cur = {1, static_cast<std::size_t>(d->n_neurons)};
    } else if (const auto* o = std::get_if<SoftmaxOutputSpec>(&spec)) {
      if (o->n_classes < 2) throw ShapeError(i, "output layer needs at least two classes");
      if (cur.length != 1) throw ShapeError(i, "output layer requires flattened input");
      if (i + 1 != specs.size()) throw ShapeError(i, "output layer must be last");
      cur = {1, static_cast<std::size_t>(o->n_classes)};
    }
    // BatchNorm and Activation keep the shape.
    if (cur.size() == 0) throw ShapeError(i, "empty output");
    shapes.push_back(cur);
  }
  return shapes;
}

std::size_t count_parameters(std::span<const LayerSpec> specs, std::size_t input_length) {
  const auto shapes = infer_shapes(specs, input_length);
  std::size_t total = 0;
  Shape in{input_length, 1};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const Shape out = shapes[i];
    if (const auto* c = std::get_if<Conv1DSpec>(&specs[i])) {
      total += static_cast<std::size_t>(c->kernel_size) * in.channels * out.channels + out.channels;
    } else if (std::holds_alternative<BatchNormSpec>(specs[i])) {
      total += 2 * in.channels;
    } else if (std::holds_alternative<DenseSpec>(specs[i]) ||
               std::holds_alternative<SoftmaxOutputSpec>(specs[i])) {
      total += in.size() * out.size() + out.size();
    }
    in = out;
  }
  return total;
}

// ---------------------------------------------------------------------------

template <typename T>
Network<T>::Network(std::vector<LayerSpec> specs, std::size_t input_length)
    : specs_(std::move(specs)), input_length_(input_length) {
  if (specs_.empty() || !std::holds_alternative<SoftmaxOutputSpec>(specs_.back()))
    throw ShapeError(specs_.empty() ? 0 : specs_.size() - 1,
                     "network must end with a softmax output layer");
  shapes_ = infer_shapes(specs_, input_length_);
  Shape in{input_length_, 1};
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    layers_.push_back(make_layer<T>(specs_[i], in, shapes_[i]));
    in = shapes_[i];
  }
  activations_.resize(layers_.size());
  grads_.resize(layers_.size() + 1);
  for (auto& p : parameters()) {
    adam_m_.emplace_back(p.value.size(), T(0));
    adam_v_.emplace_back(p.value.size(), T(0));
  }
}

template <typename T>
Network<T>::~Network() = default;
template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <typename T>
std::size_t Network<T>::n_classes() const {
  return shapes_.back().channels;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  return count_parameters(specs_, input_length_);
}

template <typename T>
void Network<T>::init_parameters(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : layers_) layer->init(rng);
  for (auto& m : adam_m_) std::fill(m.begin(), m.end(), T(0));
  for (auto& v : adam_v_) std::fill(v.begin(), v.end(), T(0));
  adam_t_ = 0;
  init_seed_ = seed;
}

template <typename T>
std::vector<ParamView<T>> Network<T>::parameters() {
  std::vector<ParamView<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto& p : layers_[i]->params()) {
      p.name = std::to_string(i) + "." + p.name;
      out.push_back(std::move(p));
    }
  }
  return out;
}

template <typename T>
std::vector<ParamView<T>> Network<T>::buffers() {
  std::vector<ParamView<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto& p : layers_[i]->buffers()) {
      p.name = std::to_string(i) + "." + p.name;
      out.push_back(std::move(p));
    }
  }
  return out;
}

template <typename T>
const Tensor<T>& Network<T>::run_forward(std::span<const T> inputs, std::size_t batch, Mode mode) {
  if (inputs.size() != batch * input_length_)
    throw ShapeError(0, "input width mismatch: expected batch x " + std::to_string(input_length_) +
                            " values, got " + std::to_string(inputs.size()));
  input_.resize(batch, Shape{input_length_, 1});
  std::copy(inputs.begin(), inputs.end(), input_.data.begin());
  const Tensor<T>* cur = &input_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (mode == Mode::Training) {
      layers_[i]->forward_train(*cur, activations_[i]);
    } else {
      layers_[i]->forward_infer(*cur, activations_[i]);
    }
    cur = &activations_[i];
  }
  return *cur;
}

template <typename T>
std::vector<T> Network<T>::forward(std::span<const T> inputs, std::size_t batch, Mode mode) {
  if (mode == Mode::Inference) return infer(inputs, batch);
  const auto& out = run_forward(inputs, batch, mode).data;
  return {out.begin(), out.end()};
}

template <typename T>
std::vector<T> Network<T>::infer(std::span<const T> inputs, std::size_t batch) const {
  if (inputs.size() != batch * input_length_)
    throw ShapeError(0, "input width mismatch: expected batch x " + std::to_string(input_length_) +
                            " values, got " + std::to_string(inputs.size()));
  Tensor<T> cur;
  cur.resize(batch, Shape{input_length_, 1});
  std::copy(inputs.begin(), inputs.end(), cur.data.begin());
  Tensor<T> next;
  for (const auto& layer : layers_) {
    layer->forward_infer(cur, next);
    std::swap(cur, next);
  }
  return {cur.data.begin(), cur.data.end()};
}

template <typename T>
double Network<T>::compute_gradients(std::span<const T> inputs, std::size_t batch,
                                     std::span<const std::uint8_t> labels) {
  if (labels.size() != batch) throw ValidationError("label count does not match batch size");
  const std::size_t classes = n_classes();
  for (std::uint8_t y : labels)
    if (y >= classes) throw ValidationError("label " + std::to_string(y) + " out of range");

  const Tensor<T>& probs = run_forward(inputs, batch, Mode::Training);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b)
    loss -= std::log(std::max<double>(probs.data[b * classes + labels[b]], kLogClamp));
  loss /= static_cast<double>(batch);

  for (auto& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), T(0));

  // d(mean CCE)/d(logits) = (p - onehot) / batch.
  Tensor<T>& grad = grads_.back();
  grad.resize(batch, probs.shape);
  std::copy(probs.data.begin(), probs.data.end(), grad.data.begin());
  const T inv_b = T(1) / static_cast<T>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < classes; ++j) {
      T& g = grad.data[b * classes + j];
      g = (g - (j == labels[b] ? T(1) : T(0))) * inv_b;
    }
  }
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Tensor<T>& in = i == 0 ? input_ : activations_[i - 1];
    layers_[i]->backward(in, activations_[i], grads_[i + 1], i == 0 ? nullptr : &grads_[i]);
  }
  return loss;
}

template <typename T>
Gradients<T> Network<T>::backward(std::span<const T> inputs, std::size_t batch,
                                  std::span<const std::uint8_t> labels) {
  compute_gradients(inputs, batch, labels);
  Gradients<T> out;
  for (auto& p : parameters()) out.emplace_back(p.grad.begin(), p.grad.end());
  return out;
}

template <typename T>
void Network<T>::adam_step(const Gradients<T>& gradients, double lr) {
  auto params = parameters();
  if (gradients.size() != params.size())
    throw ValidationError("gradient tensor count does not match parameters");
  for (std::size_t j = 0; j < params.size(); ++j)
    if (gradients[j].size() != params[j].value.size())
      throw ValidationError("gradient shape mismatch for " + params[j].name);

  ++adam_t_;
  const double b1 = adam_.beta1, b2 = adam_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
  for (std::size_t j = 0; j < params.size(); ++j) {
    auto value = params[j].value;
    const auto& g = gradients[j];
    auto& m = adam_m_[j];
    auto& v = adam_v_[j];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = lr * (mi / c1) / (std::sqrt(vi / c2) + adam_.epsilon);
      value[i] = static_cast<T>(value[i] - step);
    }
  }
}

template <typename T>
void Network<T>::adam_step(double lr) {
  Gradients<T> grads;
  for (auto& p : parameters()) grads.emplace_back(p.grad.begin(), p.grad.end());
  adam_step(grads, lr);
}

template class Network<float>;
template class Network<double>;

// ---------------------------------------------------------------------------

namespace {

template <typename T>
double cce_impl(std::span<const T> probs, std::size_t n_classes,
                std::span<const std::uint8_t> labels) {
  if (n_classes == 0 || probs.size() != labels.size() * n_classes)
    throw ValidationError("probability matrix does not match label count");
  if (labels.empty()) throw ValidationError("cross-entropy of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes)
      throw ValidationError("label " + std::to_string(labels[i]) + " out of range [0," +
                            std::to_string(n_classes - 1) + "]");
    total -= std::log(std::max<double>(probs[i * n_classes + labels[i]], kLogClamp));
  }
  return total / static_cast<double>(labels.size());
}

}  // namespace

double cce_loss(std::span<const double> probs, std::size_t n_classes,
                std::span<const std::uint8_t> labels) {
  return cce_impl(probs, n_classes, labels);
}

double cce_loss(std::span<const float> probs, std::size_t n_classes,
                std::span<const std::uint8_t> labels) {
  return cce_impl(probs, n_classes, labels);
}

template <typename T>
void train(Network<T>& net, std::span<const float> traces, std::span<const std::uint8_t> labels,
           const TrainConfig& cfg) {
  const std::size_t width = net.input_length();
  const std::size_t n = labels.size();
  if (traces.size() != n * width)
    throw ShapeError(0, "training traces do not match network input length " +
                            std::to_string(width));
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw ValidationError("epochs and batch size must be positive");
  if (n == 0) throw ValidationError("empty training set");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::vector<T> batch;
  std::vector<std::uint8_t> batch_labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      batch.resize(count * width);
      batch_labels.resize(count);
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t idx = order[start + b];
        std::copy_n(traces.begin() + static_cast<std::ptrdiff_t>(idx * width), width,
                    batch.begin() + static_cast<std::ptrdiff_t>(b * width));
        batch_labels[b] = labels[idx];
      }
      net.compute_gradients(batch, count, batch_labels);
      net.adam_step(cfg.learning_rate);
    }
  }
}

template void train<float>(Network<float>&, std::span<const float>, std::span<const std::uint8_t>,
                           const TrainConfig&);
template void train<double>(Network<double>&, std::span<const float>,
                            std::span<const std::uint8_t>, const TrainConfig&);

std::vector<float> predict(const TrainedNetwork& net, std::span<const float> traces,
                           std::size_t n_traces, std::size_t chunk) {
  const std::size_t width = net.input_length();
  if (traces.size() != n_traces * width)
    throw ShapeError(0, "traces do not match network input length " + std::to_string(width));
  const std::size_t classes = net.n_classes();
  std::vector<float> probs(n_traces * classes);
  for (std::size_t start = 0; start < n_traces; start += chunk) {
    const std::size_t count = std::min(chunk, n_traces - start);
    auto out = net.infer(traces.subspan(start * width, count * width), count);
    std::copy(out.begin(), out.end(),
              probs.begin() + static_cast<std::ptrdiff_t>(start * classes));
  }
  return probs;
}

double evaluate_loss(const TrainedNetwork& net, std::span<const float> traces,
                     std::span<const std::uint8_t> labels, std::size_t chunk) {
  const auto probs = predict(net, traces, labels.size(), chunk);
  return cce_loss(std::span<const float>(probs), net.n_classes(), labels);
}

}  // namespace nascty
