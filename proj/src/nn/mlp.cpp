/* Copyright 2026 The ActorQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "actorq/nn/mlp.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "actorq/common/error.hpp"
#include "actorq/common/rng.hpp"
#include "actorq/quant/quant.hpp"

namespace actorq::nn {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXf>;
using VectorMap = Eigen::Map<Eigen::VectorXf>;

ConstMatrixMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatrixMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatrixMap(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Empty when the layer's stored weight is used as is.
std::optional<Tensor> fake_quant_weight(const MlpPolicy& net, std::size_t layer) {
  if (!net.fake_quant_active() || !net.fake_quant()->quantize_weights) return std::nullopt;
  const Tensor& w = net.layers()[layer].weight;
  const FakeQuantConfig& fq = *net.fake_quant();
  if (fq.kind == FakeQuantConfig::Kind::kFp16) return quant::fp16_round(w);
  return quant::fake_quant(w, quant::BitWidth(fq.bits), /*per_channel=*/true);
}

void quantize_activations(const MlpPolicy& net, std::span<float> data, std::size_t row_size) {
  if (!net.fake_quant_active() || !net.fake_quant()->quantize_activations) return;
  const FakeQuantConfig& fq = *net.fake_quant();
  if (fq.kind == FakeQuantConfig::Kind::kFp16) {
    quant::fp16_round_inplace(data);
  } else {
    quant::fake_quant_rows(data, row_size, quant::BitWidth(fq.bits));
  }
}

// Batched layer stack shared by inference and training passes.
Tensor run_layers(const MlpPolicy& net, Tensor x, ForwardCache* cache) {
  const std::size_t batch = x.dim(0);
  const std::size_t layers = net.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const DenseLayer& layer = net.layers()[l];
    const std::size_t out = layer.weight.dim(0);
    const std::size_t in = layer.weight.dim(1);
    quantize_activations(net, x.data(), in);
    std::optional<Tensor> fq = fake_quant_weight(net, l);
    const Tensor& w = fq ? *fq : layer.weight;
    Tensor z({batch, out});
    auto zm = as_matrix(z, batch, out);
    zm.noalias() = as_matrix(x, batch, in) * as_matrix(w, out, in).transpose();
    zm.rowwise() += ConstVectorMap(layer.bias.raw(), static_cast<Eigen::Index>(out)).transpose();
    Tensor a = z;
    if (l + 1 < layers) {
      for (float& v : a.data()) v = v > 0.0f ? v : 0.0f;
    }
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(x));
      cache->weights.push_back(fq ? std::move(*fq) : Tensor{});
      cache->pre_activations.push_back(std::move(z));
    }
    x = std::move(a);
  }
  return x;
}

void check_input(const MlpPolicy& net, std::size_t width) {
  if (net.layer_count() == 0) throw UsageError("network has no layers");
  if (width != net.input_dim()) {
    throw DomainError("input width " + std::to_string(width) + " does not match network input " +
                      std::to_string(net.input_dim()));
  }
}

}  // namespace

MlpPolicy::MlpPolicy(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& d = layers_[l];
    if (d.weight.rank() != 2 || d.bias.rank() != 1 || d.bias.dim(0) != d.weight.dim(0)) {
      throw DomainError("layer " + std::to_string(l) + " has inconsistent weight/bias shapes");
    }
    if (l > 0 && layers_[l - 1].weight.dim(0) != d.weight.dim(1)) {
      throw DomainError("layer " + std::to_string(l) + " input does not chain with previous output");
    }
  }
}

MlpPolicy MlpPolicy::init(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw DomainError("an MLP needs at least input and output dims");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    DenseLayer layer{Tensor({out, in}), Tensor({out})};
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (float& w : layer.weight.data()) w = static_cast<float>(rng.uniform(-limit, limit));
    layers.push_back(std::move(layer));
  }
  return MlpPolicy(std::move(layers));
}

std::size_t MlpPolicy::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weight.dim(1);
}

std::size_t MlpPolicy::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().weight.dim(0);
}

std::vector<std::size_t> MlpPolicy::dims() const {
  std::vector<std::size_t> d;
  if (layers_.empty()) return d;
  d.push_back(input_dim());
  for (const auto& l : layers_) d.push_back(l.weight.dim(0));
  return d;
}

std::size_t MlpPolicy::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpPolicy::set_fake_quant(std::optional<FakeQuantConfig> config) {
  if (config && config->kind == FakeQuantConfig::Kind::kAffine) quant::BitWidth check(config->bits);
  fake_quant_ = config;
  gate_open_ = config.has_value() && config->quant_delay <= 0;
}

void MlpPolicy::update_fake_quant_gate(std::int64_t training_step) {
  gate_open_ = fake_quant_.has_value() && training_step >= fake_quant_->quant_delay;
}

Tensor forward_f32(const MlpPolicy& net, const Tensor& x) {
  if (x.rank() == 1) return forward_f32(net, x.data());
  if (x.rank() != 2) throw DomainError("forward expects a rank-1 or rank-2 input");
  check_input(net, x.dim(1));
  return run_layers(net, x, nullptr);
}

Tensor forward_f32(const MlpPolicy& net, std::span<const float> x) {
  check_input(net, x.size());
  if (net.fake_quant_active()) {
    Tensor batch({1, x.size()}, std::vector<float>(x.begin(), x.end()));
    Tensor y = run_layers(net, std::move(batch), nullptr);
    y.reshape({y.size()});
    return y;
  }
  // Single-sample matrix-vector path.
  Tensor cur = Tensor::vector(x);
  const std::size_t layers = net.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const DenseLayer& layer = net.layers()[l];
    const std::size_t out = layer.weight.dim(0);
    const std::size_t in = layer.weight.dim(1);
    Tensor next({out});
    VectorMap y(next.raw(), static_cast<Eigen::Index>(out));
    y.noalias() = as_matrix(layer.weight, out, in) *
                  ConstVectorMap(cur.raw(), static_cast<Eigen::Index>(in));
    y += ConstVectorMap(layer.bias.raw(), static_cast<Eigen::Index>(out));
    if (l + 1 < layers) y = y.cwiseMax(0.0f);
    cur = std::move(next);
  }
  return cur;
}

Tensor forward_train(const MlpPolicy& net, const Tensor& x, ForwardCache& cache) {
  if (x.rank() != 2) throw DomainError("training forward expects a [batch, in] input");
  check_input(net, x.dim(1));
  cache = ForwardCache{};
  cache.batch = x.dim(0);
  Tensor y = run_layers(net, x, &cache);
  cache.valid = true;
  return y;
}

Gradients zero_gradients(const MlpPolicy& net) {
  Gradients g;
  for (const auto& l : net.layers()) g.push_back({Tensor(l.weight.shape()), Tensor(l.bias.shape())});
  return g;
}

Gradients backward(const MlpPolicy& net, const ForwardCache& cache, const Tensor& grad_out) {
  if (!cache.valid) throw UsageError("backward called without a forward cache");
  const std::size_t layers = net.layer_count();
  if (cache.inputs.size() != layers) {
    throw UsageError("forward cache was recorded for a different network");
  }
  const std::size_t batch = cache.batch;
  if (grad_out.rank() != 2 || grad_out.dim(0) != batch || grad_out.dim(1) != net.output_dim()) {
    throw DomainError("gradient shape " + shape_string(grad_out.shape()) +
                      " does not match the cached output");
  }
  Gradients grads = zero_gradients(net);
  Tensor delta = grad_out;  // d loss / d (layer output)
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t out = net.layers()[l].weight.dim(0);
    const std::size_t in = net.layers()[l].weight.dim(1);
    if (l + 1 < layers) {
      const Tensor& z = cache.pre_activations[l];
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (!(z[i] > 0.0f)) delta[i] = 0.0f;
      }
    }
    const auto dz = as_matrix(std::as_const(delta), batch, out);
    // Fake-quantized weights and inputs pass gradients through unchanged.
    as_matrix(grads[l].weight, out, in).noalias() =
        dz.transpose() * as_matrix(cache.inputs[l], batch, in);
    VectorMap(grads[l].bias.raw(), static_cast<Eigen::Index>(out)) = dz.colwise().sum().transpose();
    if (l > 0) {
      Tensor next({batch, in});
      const Tensor& w = !cache.weights[l].empty() ? cache.weights[l] : net.layers()[l].weight;
      as_matrix(next, batch, in).noalias() = dz * as_matrix(w, out, in);
      delta = std::move(next);
    }
  }
  return grads;
}

int argmax(std::span<const float> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace actorq::nn
