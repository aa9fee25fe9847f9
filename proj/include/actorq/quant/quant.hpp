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

// Uniform affine quantization.
//
//   delta = (|min(W, 0)| + |max(W, 0)|) / 2^n          (floored at kScaleFloor)
//   z     = qmin + min(floor(|min(W, 0)| / delta), 2^n - 1)
//   q     = clamp(round(W / delta) + z, qmin, qmax)     round half away from zero
//   W'    = delta * (q - z)
//
// The grid spans 2^n steps of delta anchored so that zero is exactly
// representable. Every element reconstructs within delta / 2 unless it is
// clamped at a range end, where the error is at most delta.

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "actorq/common/tensor.hpp"

namespace actorq::quant {

inline constexpr float kScaleFloor = 1e-8f;

// Integer bit count in [2, 16].
class BitWidth {
 public:
  explicit BitWidth(int bits);

  int bits() const noexcept { return bits_; }
  std::int32_t qmin() const noexcept { return -(std::int32_t{1} << (bits_ - 1)); }
  std::int32_t qmax() const noexcept { return (std::int32_t{1} << (bits_ - 1)) - 1; }
  std::int64_t levels() const noexcept { return std::int64_t{1} << bits_; }
  // Storage cell width in bytes: 1 for n <= 8, 2 otherwise.
  std::size_t cell_bytes() const noexcept { return bits_ <= 8 ? 1 : 2; }

  friend bool operator==(BitWidth, BitWidth) = default;

 private:
  int bits_;
};

// Scale and zero point of one quantization group (a tensor or a channel).
struct AffineParams {
  float scale = kScaleFloor;
  std::int32_t zero_point = 0;
};

using Cells = std::variant<std::vector<std::int8_t>, std::vector<std::int16_t>>;

struct QuantizedTensor {
  Shape shape;
  Cells cells;
  // One entry per tensor (per_channel = false) or per axis-0 slice.
  std::vector<float> scales;
  std::vector<std::int32_t> zero_points;
  BitWidth bits{8};
  bool per_channel = false;

  std::size_t size() const;
  std::int32_t value(std::size_t i) const;
  std::size_t channel_count() const { return scales.size(); }
  // Elements per scale group.
  std::size_t group_size() const;
  AffineParams params(std::size_t group) const { return {scales[group], zero_points[group]}; }

  // Throws DomainError when an invariant is violated: element outside the
  // signed range, non-positive scale, or scale count inconsistent with shape.
  void validate() const;

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&);
};

float compute_scale(std::span<const float> w, BitWidth n);
float compute_scale(const Tensor& w, BitWidth n);

AffineParams compute_params(std::span<const float> w, BitWidth n);

// Quantizes one group into caller-provided cells (sizes must match).
template <typename Cell>
void quantize_group(std::span<const float> w, AffineParams p, BitWidth n, std::span<Cell> out);

std::int32_t quantize_value(float w, AffineParams p, BitWidth n);

inline float dequantize_value(std::int32_t q, AffineParams p) {
  return static_cast<float>(static_cast<double>(p.scale) * static_cast<double>(q - p.zero_point));
}

QuantizedTensor quantize(const Tensor& w, BitWidth n);
QuantizedTensor quantize_per_channel(const Tensor& w, BitWidth n);
Tensor dequantize(const QuantizedTensor& q);

Tensor fake_quant(const Tensor& w, BitWidth n, bool per_channel);

// Fake quantization with fixed parameters (one group per tensor).
void fake_quant_inplace(std::span<float> w, AffineParams p, BitWidth n);

// Quantize-dequantize each row of a [rows, k] view independently with its own
// dynamic per-tensor range.
void fake_quant_rows(std::span<float> data, std::size_t row_size, BitWidth n);

float fp16_round(float x);
Tensor fp16_round(const Tensor& w);
void fp16_round_inplace(std::span<float> w);

// Straight-through estimator: the quantizer's gradient is the identity.
Tensor ste_backward(const Tensor& upstream_grad);

}  // namespace actorq::quant
