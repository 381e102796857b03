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

#include "layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "nascty/rng.hpp"

namespace nascty {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
void fill_normal(std::span<T> values, double stddev, Rng& rng) {
  for (T& v : values) v = static_cast<T>(stddev * rng.normal());
}

template <typename T>
void fill_uniform(std::span<T> values, double limit, Rng& rng) {
  for (T& v : values) v = static_cast<T>(limit * (2.0 * rng.uniform() - 1.0));
}

// ---------------------------------------------------------------------------
// Conv1D, stride 1, 'same' zero padding (left pad = (K-1)/2). Implemented as
// im2col + GEMM over chunks of the batch to bound the column buffer size.
template <typename T>
class Conv1DLayer final : public Layer<T> {
 public:
  Conv1DLayer(const Conv1DSpec& spec, Shape in, Shape out)
      : Layer<T>(in, out),
        filters_(static_cast<std::size_t>(spec.n_filters)),
        kernel_(static_cast<std::size_t>(spec.kernel_size)),
        pad_left_((kernel_ - 1) / 2),
        weight_(kernel_ * in.channels * filters_),
        bias_(filters_),
        dweight_(weight_.size()),
        dbias_(filters_) {}

  void init(Rng& rng) override {
    fill_normal<T>(weight_, std::sqrt(2.0 / static_cast<double>(kernel_ * this->in_.channels)), rng);
    std::fill(bias_.begin(), bias_.end(), T(0));
  }

  std::vector<ParamView<T>> params() override {
    return {{"conv.weight", weight_, dweight_}, {"conv.bias", bias_, dbias_}};
  }

  void forward_infer(const Tensor<T>& in, Tensor<T>& out) const override {
    out.resize(in.batch, this->out_);
    const std::size_t L = this->in_.length;
    const std::size_t cols_w = kernel_ * this->in_.channels;
    CMapR<T> w(weight_.data(), cols_w, filters_);
    Eigen::Map<const RowVec<T>> b(bias_.data(), filters_);
    MatR<T> cols;
    for (std::size_t s0 = 0; s0 < in.batch; s0 += chunk()) {
      const std::size_t n = std::min(chunk(), in.batch - s0);
      im2col(in, s0, n, cols);
      MapR<T> y(out.data.data() + s0 * L * filters_, n * L, filters_);
      y.noalias() = cols * w;
      y.rowwise() += b;
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>& /*out*/, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    const std::size_t L = this->in_.length;
    const std::size_t C = this->in_.channels;
    const std::size_t cols_w = kernel_ * C;
    CMapR<T> w(weight_.data(), cols_w, filters_);
    MapR<T> dw(dweight_.data(), cols_w, filters_);
    Eigen::Map<RowVec<T>> db(dbias_.data(), filters_);
    if (grad_in) {
      grad_in->resize(in.batch, this->in_);
      std::fill(grad_in->data.begin(), grad_in->data.end(), T(0));
    }
    MatR<T> cols;
    MatR<T> dcols;
    for (std::size_t s0 = 0; s0 < in.batch; s0 += chunk()) {
      const std::size_t n = std::min(chunk(), in.batch - s0);
      im2col(in, s0, n, cols);
      CMapR<T> dy(grad_out.data.data() + s0 * L * filters_, n * L, filters_);
      dw.noalias() += cols.transpose() * dy;
      db += dy.colwise().sum();
      if (!grad_in) continue;
      dcols.noalias() = dy * w.transpose();
      for (std::size_t b = 0; b < n; ++b) {
        T* dx = grad_in->data.data() + (s0 + b) * L * C;
        for (std::size_t i = 0; i < L; ++i) {
          const T* row = dcols.data() + (b * L + i) * cols_w;
          const auto [lo, hi] = window(i);
          T* d = dx + (i + lo - pad_left_) * C;
          const T* r = row + lo * C;
          for (std::size_t j = 0, m = (hi - lo) * C; j < m; ++j) d[j] += r[j];
        }
      }
    }
  }

  std::size_t chunk() const {
    const std::size_t per_sample = this->in_.length * kernel_ * this->in_.channels;
    return std::max<std::size_t>(1, (std::size_t{1} << 21) / std::max<std::size_t>(1, per_sample));
  }

  // Valid kernel taps [lo, hi) at output position i.
  std::pair<std::size_t, std::size_t> window(std::size_t i) const {
    const std::size_t L = this->in_.length;
    const std::size_t lo = i < pad_left_ ? pad_left_ - i : 0;
    const std::size_t hi = std::min(kernel_, L + pad_left_ - i);
    return {lo, hi};
  }

  // cols[(b, i), k * C + c] = x[b][i + k - pad_left][c], zero outside. Each
  // row is a contiguous slice of the input.
  void im2col(const Tensor<T>& in, std::size_t s0, std::size_t n, MatR<T>& cols) const {
    const std::size_t L = this->in_.length;
    const std::size_t C = this->in_.channels;
    cols.resize(static_cast<Eigen::Index>(n * L), static_cast<Eigen::Index>(kernel_ * C));
    for (std::size_t b = 0; b < n; ++b) {
      const T* x = in.data.data() + (s0 + b) * L * C;
      for (std::size_t i = 0; i < L; ++i) {
        T* row = cols.data() + (b * L + i) * kernel_ * C;
        const auto [lo, hi] = window(i);
        if (lo > 0) std::fill(row, row + lo * C, T(0));
        std::copy(x + (i + lo - pad_left_) * C, x + (i + hi - pad_left_) * C, row + lo * C);
        if (hi < kernel_) std::fill(row + hi * C, row + kernel_ * C, T(0));
      }
    }
  }

  std::size_t filters_;
  std::size_t kernel_;
  std::size_t pad_left_;
  AlignedVector<T> weight_;  // [kernel][in_channels][filters]
  AlignedVector<T> bias_;
  AlignedVector<T> dweight_;
  AlignedVector<T> dbias_;
};

// ---------------------------------------------------------------------------
// Per-channel batch normalization over batch and length.
template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  explicit BatchNormLayer(Shape in)
      : Layer<T>(in, in),
        gamma_(in.channels, T(1)),
        beta_(in.channels, T(0)),
        dgamma_(in.channels),
        dbeta_(in.channels),
        running_mean_(in.channels, T(0)),
        running_var_(in.channels, T(1)) {}

  void init(Rng&) override {
    std::fill(gamma_.begin(), gamma_.end(), T(1));
    std::fill(beta_.begin(), beta_.end(), T(0));
    std::fill(running_mean_.begin(), running_mean_.end(), T(0));
    std::fill(running_var_.begin(), running_var_.end(), T(1));
  }

  std::vector<ParamView<T>> params() override {
    return {{"bn.gamma", gamma_, dgamma_}, {"bn.beta", beta_, dbeta_}};
  }
  std::vector<ParamView<T>> buffers() override {
    return {{"bn.running_mean", running_mean_, {}}, {"bn.running_var", running_var_, {}}};
  }

  void forward_infer(const Tensor<T>& in, Tensor<T>& out) const override {
    const std::size_t C = this->in_.channels;
    std::vector<double> scale(C), shift(C);
    for (std::size_t c = 0; c < C; ++c) {
      scale[c] = static_cast<double>(gamma_[c]) /
                 std::sqrt(static_cast<double>(running_var_[c]) + kBatchNormEpsilon);
      shift[c] = static_cast<double>(beta_[c]) - scale[c] * static_cast<double>(running_mean_[c]);
    }
    apply(in, out, scale, shift);
  }

  void forward_train(const Tensor<T>& in, Tensor<T>& out) override {
    const std::size_t C = this->in_.channels;
    std::vector<double> mean, var;
    batch_stats(in, mean, var);
    std::vector<double> scale(C), shift(C);
    for (std::size_t c = 0; c < C; ++c) {
      const double inv_std = 1.0 / std::sqrt(var[c] + kBatchNormEpsilon);
      scale[c] = static_cast<double>(gamma_[c]) * inv_std;
      shift[c] = static_cast<double>(beta_[c]) - scale[c] * mean[c];
      running_mean_[c] = static_cast<T>(kBatchNormMomentum * running_mean_[c] +
                                        (1.0 - kBatchNormMomentum) * mean[c]);
      running_var_[c] = static_cast<T>(kBatchNormMomentum * running_var_[c] +
                                       (1.0 - kBatchNormMomentum) * var[c]);
    }
    apply(in, out, scale, shift);
  }

  // Training-mode gradient (batch statistics).
  void backward(const Tensor<T>& in, const Tensor<T>& /*out*/, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    const std::size_t C = this->in_.channels;
    const std::size_t rows = in.batch * this->in_.length;
    std::vector<double> mean, var;
    batch_stats(in, mean, var);
    std::vector<double> inv_std(C), sum_dxhat(C, 0.0), sum_dxhat_xhat(C, 0.0);
    std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + kBatchNormEpsilon);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const double xhat = (static_cast<double>(in.data[r * C + c]) - mean[c]) * inv_std[c];
        const double dy = grad_out.data[r * C + c];
        sum_dy[c] += dy;
        sum_dy_xhat[c] += dy * xhat;
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      dgamma_[c] += static_cast<T>(sum_dy_xhat[c]);
      dbeta_[c] += static_cast<T>(sum_dy[c]);
      sum_dxhat[c] = sum_dy[c] * static_cast<double>(gamma_[c]);
      sum_dxhat_xhat[c] = sum_dy_xhat[c] * static_cast<double>(gamma_[c]);
    }
    if (!grad_in) return;
    grad_in->resize(in.batch, this->in_);
    const double n = static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const double xhat = (static_cast<double>(in.data[r * C + c]) - mean[c]) * inv_std[c];
        const double dxhat = static_cast<double>(grad_out.data[r * C + c]) * gamma_[c];
        grad_in->data[r * C + c] = static_cast<T>(
            inv_std[c] / n * (n * dxhat - sum_dxhat[c] - xhat * sum_dxhat_xhat[c]));
      }
    }
  }

 private:
  void batch_stats(const Tensor<T>& in, std::vector<double>& mean,
                   std::vector<double>& var) const {
    const std::size_t C = this->in_.channels;
    const std::size_t rows = in.batch * this->in_.length;
    mean.assign(C, 0.0);
    var.assign(C, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < C; ++c) mean[c] += in.data[r * C + c];
    for (double& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const double d = in.data[r * C + c] - mean[c];
        var[c] += d * d;
      }
    }
    for (double& v : var) v /= static_cast<double>(rows);
  }

  void apply(const Tensor<T>& in, Tensor<T>& out, const std::vector<double>& scale,
             const std::vector<double>& shift) const {
    const std::size_t C = this->in_.channels;
    out.resize(in.batch, this->out_);
    const std::size_t rows = in.batch * this->in_.length;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < C; ++c)
        out.data[r * C + c] = static_cast<T>(scale[c] * in.data[r * C + c] + shift[c]);
  }

  AlignedVector<T> gamma_, beta_, dgamma_, dbeta_, running_mean_, running_var_;
};

// ---------------------------------------------------------------------------
template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  ActivationLayer(ActivationKind kind, Shape in) : Layer<T>(in, in), kind_(kind) {}

  void forward_infer(const Tensor<T>& in, Tensor<T>& out) const override {
    out.resize(in.batch, this->out_);
    const auto n = static_cast<Eigen::Index>(in.data.size());
    Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> x(in.data.data(), n);
    Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> y(out.data.data(), n);
    if (kind_ == ActivationKind::Selu) {
      const T lambda = static_cast<T>(kSeluLambda);
      const T la = static_cast<T>(kSeluLambda * kSeluAlpha);
      y = lambda * x.max(T(0)) + la * (x.min(T(0)).exp() - T(1));
    } else {
      y = x.max(T(0));
    }
  }

  // For x <= 0 the SELU derivative la * exp(x) equals out + la. Arithmetic
  // masks instead of select() keep the loops vectorized.
  void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    if (!grad_in) return;
    grad_in->resize(in.batch, this->in_);
    const auto n = static_cast<Eigen::Index>(in.data.size());
    using CArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    CArr x(in.data.data(), n);
    CArr y(out.data.data(), n);
    CArr dy(grad_out.data.data(), n);
    Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> dx(grad_in->data.data(), n);
    if (kind_ == ActivationKind::Selu) {
      const T lambda = static_cast<T>(kSeluLambda);
      const T la = static_cast<T>(kSeluLambda * kSeluAlpha);
      const auto pos = (x > T(0)).template cast<T>();
      dx = dy * (pos * lambda + (T(1) - pos) * (y + la));
    } else {
      dx = dy * (x > T(0)).template cast<T>();
    }
  }

 private:
  ActivationKind kind_;
};

// ---------------------------------------------------------------------------
// Windows of `size` advancing by `stride`; a partial final window is dropped.
template <typename T>
class PoolLayer final : public Layer<T> {
 public:
  PoolLayer(const PoolSpec& spec, Shape in, Shape out)
      : Layer<T>(in, out),
        kind_(spec.kind),
        size_(static_cast<std::size_t>(spec.size)),
        stride_(static_cast<std::size_t>(spec.stride)) {}

  void forward_infer(const Tensor<T>& in, Tensor<T>& out) const override {
    out.resize(in.batch, this->out_);
    const std::size_t C = this->in_.channels;
    const std::size_t Lin = this->in_.length;
    const std::size_t Lout = this->out_.length;
    const T inv = T(1) / static_cast<T>(size_);
    for (std::size_t b = 0; b < in.batch; ++b) {
      const T* x = in.data.data() + b * Lin * C;
      T* y = out.data.data() + b * Lout * C;
      for (std::size_t o = 0; o < Lout; ++o) {
        const T* w = x + o * stride_ * C;
        T* yo = y + o * C;
        std::copy(w, w + C, yo);
        for (std::size_t j = 1; j < size_; ++j) {
          const T* r = w + j * C;
          if (kind_ == PoolKind::Max) {
            for (std::size_t c = 0; c < C; ++c) yo[c] = std::max(yo[c], r[c]);
          } else {
            for (std::size_t c = 0; c < C; ++c) yo[c] += r[c];
          }
        }
        if (kind_ == PoolKind::Average)
          for (std::size_t c = 0; c < C; ++c) yo[c] *= inv;
      }
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>& /*out*/, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    if (!grad_in) return;
    grad_in->resize(in.batch, this->in_);
    std::fill(grad_in->data.begin(), grad_in->data.end(), T(0));
    const std::size_t C = this->in_.channels;
    const std::size_t Lin = this->in_.length;
    const std::size_t Lout = this->out_.length;
    const T inv = T(1) / static_cast<T>(size_);
    std::vector<std::size_t> arg(C);
    for (std::size_t b = 0; b < in.batch; ++b) {
      const T* x = in.data.data() + b * Lin * C;
      const T* dy = grad_out.data.data() + b * Lout * C;
      T* dx = grad_in->data.data() + b * Lin * C;
      for (std::size_t o = 0; o < Lout; ++o) {
        const std::size_t start = o * stride_;
        const T* g = dy + o * C;
        if (kind_ == PoolKind::Max) {
          // First maximum wins, matching the forward pass.
          std::fill(arg.begin(), arg.end(), start);
          for (std::size_t j = 1; j < size_; ++j) {
            const T* r = x + (start + j) * C;
            for (std::size_t c = 0; c < C; ++c)
              if (r[c] > x[arg[c] * C + c]) arg[c] = start + j;
          }
          for (std::size_t c = 0; c < C; ++c) dx[arg[c] * C + c] += g[c];
        } else {
          for (std::size_t j = 0; j < size_; ++j) {
            T* d = dx + (start + j) * C;
            for (std::size_t c = 0; c < C; ++c) d[c] += g[c] * inv;
          }
        }
      }
    }
  }

 private:
  PoolKind kind_;
  std::size_t size_;
  std::size_t stride_;
};

// ---------------------------------------------------------------------------
template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  FlattenLayer(Shape in, Shape out) : Layer<T>(in, out) {}

  void forward_infer(const Tensor<T>& in, Tensor<T>& out) const override {
    out.batch = in.batch;
    out.shape = this->out_;
    out.data = in.data;
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    if (!grad_in) return;
    grad_in->batch = in.batch;
    grad_in->shape = this->in_;
    grad_in->data = grad_out.data;
  }
};

// ---------------------------------------------------------------------------
// y = x W + b on flattened features. Also the affine part of the output layer.
template <typename T>
class DenseLayer : public Layer<T> {
 public:
  DenseLayer(std::size_t units, Shape in, Shape out)
      : Layer<T>(in, out),
        units_(units),
        weight_(in.size() * units),
        bias_(units),
        dweight_(weight_.size()),
        dbias_(units) {}

  void init(Rng& rng) override {
    fill_normal<T>(weight_, std::sqrt(2.0 / static_cast<double>(this->in_.size())), rng);
    std::fill(bias_.begin(), bias_.end(), T(0));
  }

  std::vector<ParamView<T>> params() override {
    return {{"dense.weight", weight_, dweight_}, {"dense.bias", bias_, dbias_}};
  }

  void forward_infer(const Tensor<T>& in, Tensor<T>& out) const override {
    out.resize(in.batch, this->out_);
    affine(in, out);
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    const auto B = static_cast<Eigen::Index>(in.batch);
    const auto D = static_cast<Eigen::Index>(this->in_.size());
    const auto N = static_cast<Eigen::Index>(units_);
    CMapR<T> x(in.data.data(), B, D);
    CMapR<T> dy(grad_out.data.data(), B, N);
    MapR<T>(dweight_.data(), D, N).noalias() += x.transpose() * dy;
    Eigen::Map<RowVec<T>>(dbias_.data(), N) += dy.colwise().sum();
    if (!grad_in) return;
    grad_in->resize(in.batch, this->in_);
    MapR<T>(grad_in->data.data(), B, D).noalias() =
        dy * CMapR<T>(weight_.data(), D, N).transpose();
  }

 protected:
  void affine(const Tensor<T>& in, Tensor<T>& out) const {
    const auto B = static_cast<Eigen::Index>(in.batch);
    const auto D = static_cast<Eigen::Index>(this->in_.size());
    const auto N = static_cast<Eigen::Index>(units_);
    MapR<T> y(out.data.data(), B, N);
    y.noalias() = CMapR<T>(in.data.data(), B, D) * CMapR<T>(weight_.data(), D, N);
    y.rowwise() += Eigen::Map<const RowVec<T>>(bias_.data(), N);
  }

  std::size_t units_;
  AlignedVector<T> weight_;  // [in_features][units]
  AlignedVector<T> bias_;
  AlignedVector<T> dweight_;
  AlignedVector<T> dbias_;
};

// ---------------------------------------------------------------------------
template <typename T>
class SoftmaxOutputLayer final : public DenseLayer<T> {
 public:
  SoftmaxOutputLayer(std::size_t classes, Shape in, Shape out)
      : DenseLayer<T>(classes, in, out) {}

  void init(Rng& rng) override {
    const double limit = std::sqrt(6.0 / static_cast<double>(this->in_.size() + this->units_));
    fill_uniform<T>(this->weight_, limit, rng);
    std::fill(this->bias_.begin(), this->bias_.end(), T(0));
  }

  std::vector<ParamView<T>> params() override {
    return {{"output.weight", this->weight_, this->dweight_},
            {"output.bias", this->bias_, this->dbias_}};
  }

  void forward_infer(const Tensor<T>& in, Tensor<T>& out) const override {
    out.resize(in.batch, this->out_);
    this->affine(in, out);
    const std::size_t N = this->units_;
    for (std::size_t b = 0; b < in.batch; ++b) {
      T* row = out.data.data() + b * N;
      const T m = *std::max_element(row, row + N);
      double sum = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        row[j] = std::exp(row[j] - m);
        sum += row[j];
      }
      const double inv = 1.0 / sum;
      for (std::size_t j = 0; j < N; ++j) row[j] = static_cast<T>(row[j] * inv);
    }
  }
};

}  // namespace

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, Shape in, Shape out) {
  struct Visitor {
    Shape in, out;
    std::unique_ptr<Layer<T>> operator()(const Conv1DSpec& s) const {
      return std::make_unique<Conv1DLayer<T>>(s, in, out);
    }
    std::unique_ptr<Layer<T>> operator()(const BatchNormSpec&) const {
      return std::make_unique<BatchNormLayer<T>>(in);
    }
    std::unique_ptr<Layer<T>> operator()(const ActivationSpec& s) const {
      return std::make_unique<ActivationLayer<T>>(s.kind, in);
    }
    std::unique_ptr<Layer<T>> operator()(const PoolSpec& s) const {
      return std::make_unique<PoolLayer<T>>(s, in, out);
    }
    std::unique_ptr<Layer<T>> operator()(const FlattenSpec&) const {
      return std::make_unique<FlattenLayer<T>>(in, out);
    }
    std::unique_ptr<Layer<T>> operator()(const DenseSpec& s) const {
      return std::make_unique<DenseLayer<T>>(static_cast<std::size_t>(s.n_neurons), in, out);
    }
    std::unique_ptr<Layer<T>> operator()(const SoftmaxOutputSpec& s) const {
      return std::make_unique<SoftmaxOutputLayer<T>>(static_cast<std::size_t>(s.n_classes), in,
                                                     out);
    }
  };
  return std::visit(Visitor{in, out}, spec);
}

template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&, Shape, Shape);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&, Shape, Shape);

}  // namespace nascty
