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

#include "actorq/nn/quantized_mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#if defined(__AVX512F__) && defined(__AVX512VNNI__) && defined(__AVX512BW__)
#include <immintrin.h>
#define ACTORQ_HAVE_VNNI 1
#endif

#include "actorq/common/error.hpp"

namespace actorq::nn {

namespace {

constexpr std::size_t kPad = 64;

std::size_t padded(std::size_t n) { return (n + kPad - 1) / kPad * kPad; }

// sum_k u[k] * w[k] over a padded row; u holds input codes shifted by +128.
std::int32_t dot_u8s8(const std::uint8_t* u, const std::int8_t* w, std::size_t n) {
#if ACTORQ_HAVE_VNNI
  __m512i acc = _mm512_setzero_si512();
  for (std::size_t k = 0; k < n; k += 64) {
    const __m512i a = _mm512_loadu_si512(u + k);
    const __m512i b = _mm512_loadu_si512(w + k);
    acc = _mm512_dpbusd_epi32(acc, a, b);
  }
  return _mm512_reduce_add_epi32(acc);
#else
  std::int32_t acc = 0;
  for (std::size_t k = 0; k < n; ++k) acc += static_cast<std::int32_t>(u[k]) * w[k];
  return acc;
#endif
}

#if ACTORQ_HAVE_VNNI
// Four rows at once so every activation load feeds four multiply-adds.
void dot4_u8s8(const std::uint8_t* u, const std::int8_t* w, std::size_t stride, std::size_t n,
               std::int32_t* out) {
  __m512i a0 = _mm512_setzero_si512();
  __m512i a1 = _mm512_setzero_si512();
  __m512i a2 = _mm512_setzero_si512();
  __m512i a3 = _mm512_setzero_si512();
  for (std::size_t k = 0; k < n; k += 64) {
    const __m512i x = _mm512_loadu_si512(u + k);
    a0 = _mm512_dpbusd_epi32(a0, x, _mm512_loadu_si512(w + k));
    a1 = _mm512_dpbusd_epi32(a1, x, _mm512_loadu_si512(w + stride + k));
    a2 = _mm512_dpbusd_epi32(a2, x, _mm512_loadu_si512(w + 2 * stride + k));
    a3 = _mm512_dpbusd_epi32(a3, x, _mm512_loadu_si512(w + 3 * stride + k));
  }
  out[0] = _mm512_reduce_add_epi32(a0);
  out[1] = _mm512_reduce_add_epi32(a1);
  out[2] = _mm512_reduce_add_epi32(a2);
  out[3] = _mm512_reduce_add_epi32(a3);
}
#endif

std::int64_t dot_s16(const std::int16_t* x, const std::int16_t* w, std::size_t n) {
  std::int64_t acc = 0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += static_cast<std::int64_t>(static_cast<std::int32_t>(x[k]) * w[k]);
  }
  return acc;
}

}  // namespace

void check_execution_bits(int bits) {
  if (bits != 8 && bits != 16) {
    throw UnsupportedPrecision("integer execution supports 8 or 16 bits, got " +
                               std::to_string(bits));
  }
}

QuantizedLinear::QuantizedLinear(const quant::QuantizedTensor& weight, Tensor bias)
    : rows_(weight.shape.at(0)),
      cols_(weight.shape.at(1)),
      stride_(padded(cols_)),
      bits_(weight.bits.bits()),
      bias_(bias.data().begin(), bias.data().end()) {
  check_execution_bits(bits_);
  if (weight.shape.size() != 2 || bias.size() != rows_) {
    throw DomainError("quantized layer needs a [out, in] weight and [out] bias");
  }
  scales_.resize(rows_);
  zero_points_.resize(rows_);
  row_sums_.assign(rows_, 0);
  if (bits_ == 8) {
    w8_.assign(rows_ * stride_, 0);
  } else {
    w16_.assign(rows_ * stride_, 0);
  }
  const std::size_t per_group = weight.group_size();
  for (std::size_t r = 0; r < rows_; ++r) {
    const std::size_t group = (r * cols_) / per_group;
    scales_[r] = weight.scales[group];
    zero_points_[r] = weight.zero_points[group];
    std::int64_t sum = 0;
    for (std::size_t k = 0; k < cols_; ++k) {
      const std::int32_t v = weight.value(r * cols_ + k);
      sum += v;
      if (bits_ == 8) {
        w8_[r * stride_ + k] = static_cast<std::int8_t>(v);
      } else {
        w16_[r * stride_ + k] = static_cast<std::int16_t>(v);
      }
    }
    row_sums_[r] = sum;
  }
}

void QuantizedLinear::forward_codes(std::span<const std::int32_t> x_codes,
                                    quant::AffineParams x_params, std::span<float> y) const {
  const auto k = static_cast<std::int64_t>(cols_);
  const std::int64_t zx = x_params.zero_point;
  std::int64_t x_sum = 0;
  for (std::int32_t v : x_codes) x_sum += v;
  auto finish = [&](std::size_t r, std::int64_t raw_dot) {
    // raw_dot = sum_k qx[k] * qw[r,k]
    const std::int64_t zw = zero_points_[r];
    const std::int64_t acc = raw_dot - zx * row_sums_[r] - zw * x_sum + k * zx * zw;
    y[r] = scales_[r] * x_params.scale * static_cast<float>(acc) + bias_[r];
  };
  if (bits_ == 8) {
    std::vector<std::uint8_t> u(stride_, 0);
    for (std::size_t i = 0; i < cols_; ++i) u[i] = static_cast<std::uint8_t>(x_codes[i] + 128);
    std::size_t r = 0;
#if ACTORQ_HAVE_VNNI
    std::int32_t quad[4];
    for (; r + 4 <= rows_; r += 4) {
      dot4_u8s8(u.data(), &w8_[r * stride_], stride_, stride_, quad);
      for (std::size_t j = 0; j < 4; ++j) finish(r + j, quad[j] - 128 * row_sums_[r + j]);
    }
#endif
    for (; r < rows_; ++r) {
      finish(r, dot_u8s8(u.data(), &w8_[r * stride_], stride_) - 128 * row_sums_[r]);
    }
  } else {
    std::vector<std::int16_t> xs(stride_, 0);
    for (std::size_t i = 0; i < cols_; ++i) xs[i] = static_cast<std::int16_t>(x_codes[i]);
    for (std::size_t r = 0; r < rows_; ++r) finish(r, dot_s16(xs.data(), &w16_[r * stride_], stride_));
  }
}

void QuantizedLinear::forward(std::span<const float> x, std::span<float> y) const {
  const quant::BitWidth n(bits_);
  const quant::AffineParams p = quant::compute_params(x, n);
  std::vector<std::int32_t> codes(cols_);
  for (std::size_t i = 0; i < cols_; ++i) codes[i] = quant::quantize_value(x[i], p, n);
  forward_codes(codes, p, y);
}

QuantizedMlp QuantizedMlp::from_policy(const MlpPolicy& net, int bits) {
  check_execution_bits(bits);
  QuantizedMlp q;
  q.bits_ = bits;
  const quant::BitWidth n(bits);
  for (const auto& layer : net.layers()) {
    q.layers_.emplace_back(quant::quantize_per_channel(layer.weight, n), layer.bias);
  }
  return q;
}

QuantizedMlp QuantizedMlp::from_quantized(const std::vector<quant::QuantizedTensor>& weights,
                                          const std::vector<Tensor>& biases) {
  if (weights.empty() || weights.size() != biases.size()) {
    throw DomainError("quantized MLP needs one bias per weight");
  }
  QuantizedMlp q;
  q.bits_ = weights.front().bits.bits();
  check_execution_bits(q.bits_);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].bits.bits() != q.bits_) throw DomainError("mixed bit widths across layers");
    if (l > 0 && weights[l].shape.at(1) != weights[l - 1].shape.at(0)) {
      throw DomainError("quantized layer " + std::to_string(l) + " does not chain");
    }
    q.layers_.emplace_back(weights[l], biases[l]);
  }
  return q;
}

Tensor QuantizedMlp::forward(std::span<const float> x) const {
  if (layers_.empty()) throw UsageError("quantized network has no layers");
  if (x.size() != input_dim()) {
    throw DomainError("input width " + std::to_string(x.size()) + " does not match network input " +
                      std::to_string(input_dim()));
  }
  std::vector<float> cur(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    std::vector<float> next(layers_[l].rows());
    layers_[l].forward(cur, next);
    if (l + 1 < layers_.size()) {
      for (float& v : next) v = std::max(v, 0.0f);
    }
    cur = std::move(next);
  }
  const std::size_t n = cur.size();
  return Tensor({n}, std::move(cur));
}

Tensor forward_quantized(const MlpPolicy& net, const Tensor& x, int bits) {
  check_execution_bits(bits);
  for (float v : x.data()) {
    if (!std::isfinite(v)) throw DomainError("non-finite input to quantized forward");
  }
  return QuantizedMlp::from_policy(net, bits).forward(x.data());
}

}  // namespace actorq::nn
