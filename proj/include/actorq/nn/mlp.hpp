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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "actorq/common/tensor.hpp"

namespace actorq::nn {

struct DenseLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
};

// Simulated quantization inserted into the forward pass. Used for
// quantization-aware training (gated by quant_delay) and for post-training
// accuracy sweeps.
struct FakeQuantConfig {
  enum class Kind { kAffine, kFp16 };
  Kind kind = Kind::kAffine;
  int bits = 8;
  bool quantize_weights = true;      // per-channel, axis 0
  bool quantize_activations = true;  // dynamic per-tensor, per sample
  std::int64_t quant_delay = 0;
};

// ReLU multi-layer perceptron; identity on the output layer.
class MlpPolicy {
 public:
  MlpPolicy() = default;
  explicit MlpPolicy(std::vector<DenseLayer> layers);

  // He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  static MlpPolicy init(const std::vector<std::size_t>& dims, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t layer_count() const { return layers_.size(); }
  std::vector<std::size_t> dims() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  const std::optional<FakeQuantConfig>& fake_quant() const { return fake_quant_; }
  void set_fake_quant(std::optional<FakeQuantConfig> config);
  // Opens the fake-quant gate once the training step reaches quant_delay.
  void update_fake_quant_gate(std::int64_t training_step);
  bool fake_quant_active() const { return fake_quant_.has_value() && gate_open_; }

 private:
  std::vector<DenseLayer> layers_;
  std::optional<FakeQuantConfig> fake_quant_;
  bool gate_open_ = false;
};

// Activations recorded by a training forward pass.
struct ForwardCache {
  bool valid = false;
  std::size_t batch = 0;
  std::vector<Tensor> inputs;   // layer inputs as consumed by the matmul
  std::vector<Tensor> weights;  // fake-quantized weights; empty when unquantized
  std::vector<Tensor> pre_activations;
};

using Gradients = std::vector<DenseLayer>;

// x is [in] or [batch, in]; the result has the matching rank.
Tensor forward_f32(const MlpPolicy& net, const Tensor& x);
Tensor forward_f32(const MlpPolicy& net, std::span<const float> x);

// Batched forward pass that records what backward needs. x is [batch, in].
Tensor forward_train(const MlpPolicy& net, const Tensor& x, ForwardCache& cache);

// Gradients of sum(grad_out * output) with respect to every parameter.
// Fake-quant nodes pass gradients straight through.
Gradients backward(const MlpPolicy& net, const ForwardCache& cache, const Tensor& grad_out);

Gradients zero_gradients(const MlpPolicy& net);

// Index of the largest entry; ties resolve to the lowest index.
int argmax(std::span<const float> values);

}  // namespace actorq::nn
