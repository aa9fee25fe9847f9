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

// Integer inference for MLP policies.
//
// Weights are quantized per output channel and packed once ("load"); each
// forward pass quantizes the layer input per tensor, accumulates integer
// products (int32 for 8-bit, int64 for 16-bit) and rescales:
//
//   y[r] = dw[r] * dx * sum_k (qw[r,k] - zw[r]) * (qx[k] - zx) + b[r]
//
// The zero-point cross terms are folded in with precomputed row sums.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "actorq/common/tensor.hpp"
#include "actorq/nn/mlp.hpp"
#include "actorq/quant/quant.hpp"

namespace actorq::nn {

class QuantizedLinear {
 public:
  // Packs an already quantized weight (per-channel or per-tensor) for the
  // kernel of matching cell width. Requires bits == 8 or 16.
  QuantizedLinear(const quant::QuantizedTensor& weight, Tensor bias);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  int bits() const { return bits_; }

  // y = layer(x); x has cols() entries, y has rows().
  void forward(std::span<const float> x, std::span<float> y) const;

  // Integer accumulation with pre-quantized input codes; exposed for tests.
  void forward_codes(std::span<const std::int32_t> x_codes, quant::AffineParams x_params,
                     std::span<float> y) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t stride_ = 0;  // padded row length
  int bits_ = 8;
  std::vector<std::int8_t> w8_;
  std::vector<std::int16_t> w16_;
  std::vector<float> scales_;
  std::vector<std::int32_t> zero_points_;
  std::vector<std::int64_t> row_sums_;
  std::vector<float> bias_;
};

// Integer-kernel copy of an MLP for actor inference at 8 or 16 bits.
class QuantizedMlp {
 public:
  QuantizedMlp() = default;

  // Quantizes f32 weights per channel at `bits` and packs them.
  static QuantizedMlp from_policy(const MlpPolicy& net, int bits);
  // Packs pre-quantized weights directly (no dequantize/requantize round trip).
  static QuantizedMlp from_quantized(const std::vector<quant::QuantizedTensor>& weights,
                                     const std::vector<Tensor>& biases);

  int bits() const { return bits_; }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().cols(); }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().rows(); }
  const std::vector<QuantizedLinear>& layers() const { return layers_; }

  Tensor forward(std::span<const float> x) const;

 private:
  int bits_ = 8;
  std::vector<QuantizedLinear> layers_;
};

// Throws UnsupportedPrecision unless bits is 8 or 16.
void check_execution_bits(int bits);

// Integer-kernel forward pass. Weights are quantized per channel at `bits`
// on every call; use QuantizedMlp to amortize the packing.
Tensor forward_quantized(const MlpPolicy& net, const Tensor& x, int bits);

}  // namespace actorq::nn
