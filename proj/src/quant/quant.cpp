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

#include "actorq/quant/quant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "actorq/common/error.hpp"

namespace actorq::quant {

BitWidth::BitWidth(int bits) : bits_(bits) {
  if (bits < 2 || bits > 16) {
    throw DomainError("bit width must lie in [2, 16], got " + std::to_string(bits));
  }
}

std::size_t QuantizedTensor::size() const {
  return std::visit([](const auto& v) { return v.size(); }, cells);
}

std::int32_t QuantizedTensor::value(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<std::int32_t>(v[i]); }, cells);
}

std::size_t QuantizedTensor::group_size() const {
  return scales.empty() ? 0 : size() / scales.size();
}

void QuantizedTensor::validate() const {
  if (shape_size(shape) != size()) {
    throw DomainError("quantized payload length does not match shape " + shape_string(shape));
  }
  if ((bits.cell_bytes() == 1) != std::holds_alternative<std::vector<std::int8_t>>(cells)) {
    throw DomainError("storage cell width does not match bit width " +
                      std::to_string(bits.bits()));
  }
  if (scales.empty() || scales.size() != zero_points.size()) {
    throw DomainError("quantized tensor needs one zero point per scale");
  }
  if (per_channel) {
    if (shape.size() < 2 || scales.size() != shape[0]) {
      throw DomainError("per-channel tensor needs one scale per axis-0 slice");
    }
  } else if (scales.size() != 1) {
    throw DomainError("per-tensor quantization carries exactly one scale");
  }
  for (float s : scales) {
    if (!(s > 0.0f) || !std::isfinite(s)) throw DomainError("quantization scale must be positive");
  }
  const std::int32_t lo = bits.qmin();
  const std::int32_t hi = bits.qmax();
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t v = value(i);
    if (v < lo || v > hi) {
      throw DomainError("quantized element " + std::to_string(i) + " = " + std::to_string(v) +
                        " outside the " + std::to_string(bits.bits()) + "-bit range");
    }
  }
}

bool operator==(const QuantizedTensor& a, const QuantizedTensor& b) {
  if (a.shape != b.shape || a.bits != b.bits || a.per_channel != b.per_channel ||
      a.zero_points != b.zero_points || a.cells != b.cells || a.scales.size() != b.scales.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.scales.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a.scales[i]) != std::bit_cast<std::uint32_t>(b.scales[i])) {
      return false;
    }
  }
  return true;
}

float compute_scale(std::span<const float> w, BitWidth n) {
  if (w.empty()) throw DomainError("cannot compute a quantization scale for an empty tensor");
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  const double below = std::fabs(std::min(static_cast<double>(*lo), 0.0));
  const double above = std::fabs(std::max(static_cast<double>(*hi), 0.0));
  const float delta = static_cast<float>((below + above) / static_cast<double>(n.levels()));
  return std::max(delta, kScaleFloor);
}

float compute_scale(const Tensor& w, BitWidth n) { return compute_scale(w.data(), n); }

AffineParams compute_params(std::span<const float> w, BitWidth n) {
  AffineParams p;
  p.scale = compute_scale(w, n);
  const float lo = *std::min_element(w.begin(), w.end());
  const double below = std::fabs(std::min(static_cast<double>(lo), 0.0));
  const double steps = std::floor(below / static_cast<double>(p.scale));
  const double capped = std::min(steps, static_cast<double>(n.levels() - 1));
  p.zero_point = n.qmin() + static_cast<std::int32_t>(capped);
  return p;
}

std::int32_t quantize_value(float w, AffineParams p, BitWidth n) {
  const double raw = std::round(static_cast<double>(w) / static_cast<double>(p.scale)) +
                     static_cast<double>(p.zero_point);
  return static_cast<std::int32_t>(
      std::clamp(raw, static_cast<double>(n.qmin()), static_cast<double>(n.qmax())));
}

template <typename Cell>
void quantize_group(std::span<const float> w, AffineParams p, BitWidth n, std::span<Cell> out) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = static_cast<Cell>(quantize_value(w[i], p, n));
  }
}

template void quantize_group<std::int8_t>(std::span<const float>, AffineParams, BitWidth,
                                          std::span<std::int8_t>);
template void quantize_group<std::int16_t>(std::span<const float>, AffineParams, BitWidth,
                                           std::span<std::int16_t>);

namespace {

Cells make_cells(BitWidth n, std::size_t count) {
  if (n.cell_bytes() == 1) return std::vector<std::int8_t>(count);
  return std::vector<std::int16_t>(count);
}

QuantizedTensor quantize_groups(const Tensor& w, BitWidth n, std::size_t groups) {
  QuantizedTensor q;
  q.shape = w.shape();
  q.bits = n;
  q.cells = make_cells(n, w.size());
  const std::size_t group = w.size() / groups;
  q.scales.resize(groups);
  q.zero_points.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const auto src = w.data().subspan(g * group, group);
    const AffineParams p = compute_params(src, n);
    q.scales[g] = p.scale;
    q.zero_points[g] = p.zero_point;
    std::visit(
        [&](auto& cells) { quantize_group(src, p, n, std::span(cells).subspan(g * group, group)); },
        q.cells);
  }
  return q;
}

}  // namespace

QuantizedTensor quantize(const Tensor& w, BitWidth n) {
  if (w.empty()) throw DomainError("cannot quantize an empty tensor");
  return quantize_groups(w, n, 1);
}

QuantizedTensor quantize_per_channel(const Tensor& w, BitWidth n) {
  if (w.rank() < 2) {
    throw DomainError("per-channel quantization needs rank >= 2, got shape " +
                      shape_string(w.shape()));
  }
  if (w.empty()) throw DomainError("cannot quantize an empty tensor");
  QuantizedTensor q = quantize_groups(w, n, w.dim(0));
  // A single channel is indistinguishable from per-tensor quantization; keep
  // the canonical per-tensor form so the wire encoding stays unambiguous.
  q.per_channel = w.dim(0) > 1;
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  Tensor out(q.shape);
  const std::size_t group = q.group_size();
  std::visit(
      [&](const auto& cells) {
        for (std::size_t g = 0; g < q.scales.size(); ++g) {
          const AffineParams p = q.params(g);
          for (std::size_t i = g * group; i < (g + 1) * group; ++i) {
            out[i] = dequantize_value(cells[i], p);
          }
        }
      },
      q.cells);
  return out;
}

void fake_quant_inplace(std::span<float> w, AffineParams p, BitWidth n) {
  for (float& x : w) x = dequantize_value(quantize_value(x, p, n), p);
}

Tensor fake_quant(const Tensor& w, BitWidth n, bool per_channel) {
  if (w.empty()) throw DomainError("cannot fake-quantize an empty tensor");
  if (per_channel && w.rank() < 2) {
    throw DomainError("per-channel quantization needs rank >= 2");
  }
  Tensor out = w;
  const std::size_t groups = per_channel ? w.dim(0) : 1;
  const std::size_t group = w.size() / groups;
  for (std::size_t g = 0; g < groups; ++g) {
    auto span = out.data().subspan(g * group, group);
    fake_quant_inplace(span, compute_params(span, n), n);
  }
  return out;
}

void fake_quant_rows(std::span<float> data, std::size_t row_size, BitWidth n) {
  for (std::size_t off = 0; off + row_size <= data.size(); off += row_size) {
    auto row = data.subspan(off, row_size);
    fake_quant_inplace(row, compute_params(row, n), n);
  }
}

float fp16_round(float x) {
  constexpr double kMax = 65504.0;
  if (std::isnan(x)) return x;
  const double v = x;
  const double mag = std::fabs(v);
  if (mag == 0.0) return x;
  if (mag >= 65520.0) return static_cast<float>(std::copysign(kMax, v));
  // Spacing of binary16 values around |v|: 2^-24 in the subnormal range,
  // 2^(e - 10) for normal values in [2^e, 2^(e+1)).
  int exp = 0;
  std::frexp(mag, &exp);  // mag = m * 2^exp, m in [0.5, 1)
  const int e = std::max(exp - 1, -14);
  const double spacing = std::ldexp(1.0, e - 10);
  const double rounded = std::nearbyint(v / spacing) * spacing;  // ties to even
  if (std::fabs(rounded) > kMax) return static_cast<float>(std::copysign(kMax, v));
  return static_cast<float>(rounded);
}

void fp16_round_inplace(std::span<float> w) {
  for (float& x : w) x = fp16_round(x);
}

Tensor fp16_round(const Tensor& w) {
  Tensor out = w;
  fp16_round_inplace(out.data());
  return out;
}

Tensor ste_backward(const Tensor& upstream_grad) { return upstream_grad; }

}  // namespace actorq::quant
