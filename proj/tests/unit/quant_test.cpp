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

#include <gtest/gtest.h>
#include <immintrin.h>

#include <cmath>
#include <limits>
#include <vector>

#include "actorq/common/error.hpp"
#include "actorq/common/rng.hpp"
#include "actorq/quant/quant.hpp"

namespace actorq::quant {
namespace {

std::vector<std::int32_t> codes(const QuantizedTensor& q) {
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < q.size(); ++i) out.push_back(q.value(i));
  return out;
}

TEST(ComputeScale, SymmetricRange) {
  EXPECT_FLOAT_EQ(compute_scale(Tensor::vector({-1.0f, 0.5f, 1.0f}), BitWidth(8)), 0.0078125f);
}

TEST(ComputeScale, ZeroRangeUsesFloor) {
  EXPECT_EQ(compute_scale(Tensor::vector({0.0f, 0.0f, 0.0f}), BitWidth(8)), kScaleFloor);
}

TEST(ComputeScale, OneSidedRange) {
  EXPECT_FLOAT_EQ(compute_scale(Tensor::vector({0.0f, 4.0f}), BitWidth(4)), 0.25f);
}

TEST(ComputeScale, EmptyTensorIsDomainError) {
  EXPECT_THROW(compute_scale(Tensor({0}), BitWidth(8)), DomainError);
}

TEST(BitWidth, RejectsOutOfRange) {
  EXPECT_THROW(BitWidth(1), DomainError);
  EXPECT_THROW(BitWidth(17), DomainError);
  EXPECT_EQ(BitWidth(8).qmin(), -128);
  EXPECT_EQ(BitWidth(8).qmax(), 127);
  EXPECT_EQ(BitWidth(16).cell_bytes(), 2u);
  EXPECT_EQ(BitWidth(3).cell_bytes(), 1u);
}

TEST(Quantize, ClampsTopOfRange) {
  const QuantizedTensor q = quantize(Tensor::vector({-1.0f, 0.5f, 1.0f}), BitWidth(8));
  EXPECT_FLOAT_EQ(q.scales[0], 1.0f / 128.0f);
  EXPECT_EQ(q.zero_points[0], 0);
  EXPECT_EQ(codes(q), (std::vector<std::int32_t>{-128, 64, 127}));
  EXPECT_FALSE(q.per_channel);
  EXPECT_NO_THROW(q.validate());
}

TEST(Quantize, AllZerosStayZero) {
  const QuantizedTensor q = quantize(Tensor::vector({0.0f, 0.0f}), BitWidth(8));
  EXPECT_EQ(q.scales[0], kScaleFloor);
  const Tensor back = dequantize(q);
  EXPECT_EQ(back[0], 0.0f);
  EXPECT_EQ(back[1], 0.0f);
}

TEST(Quantize, RoundsHalfAwayFromZero) {
  // delta = 1/128 over [-1, 1]; +-0.5 delta ties round outward.
  const float half = 0.5f / 128.0f;
  const QuantizedTensor q = quantize(Tensor::vector({-1.0f, half, -half, 1.0f}), BitWidth(8));
  EXPECT_EQ(q.value(1), 1);
  EXPECT_EQ(q.value(2), -1);
}

TEST(Quantize, StorageCellsFollowBitWidth) {
  const Tensor w = Tensor::vector({-1.0f, 1.0f});
  EXPECT_TRUE(std::holds_alternative<std::vector<std::int8_t>>(quantize(w, BitWidth(3)).cells));
  EXPECT_TRUE(std::holds_alternative<std::vector<std::int16_t>>(quantize(w, BitWidth(9)).cells));
}

TEST(Dequantize, ScalesCodes) {
  QuantizedTensor q;
  q.shape = {1};
  q.cells = std::vector<std::int8_t>{64};
  q.scales = {1.0f / 128.0f};
  q.zero_points = {0};
  EXPECT_FLOAT_EQ(dequantize(q)[0], 0.5f);
  q.cells = std::vector<std::int8_t>{0};
  EXPECT_EQ(dequantize(q)[0], 0.0f);
}

TEST(Dequantize, PerChannelUsesRowScale) {
  QuantizedTensor q;
  q.shape = {2, 1};
  q.cells = std::vector<std::int8_t>{2, 2};
  q.scales = {0.5f, 0.25f};
  q.zero_points = {0, 0};
  q.per_channel = true;
  const Tensor out = dequantize(q);
  EXPECT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_FLOAT_EQ(out[0], 1.0f);
  EXPECT_FLOAT_EQ(out[1], 0.5f);
}

TEST(FakeQuant, RepresentableValueIsExact) {
  const Tensor r = fake_quant(Tensor::vector({-1.0f, 0.5f, 1.0f}), BitWidth(8), false);
  EXPECT_EQ(r[1], 0.5f);
  EXPECT_EQ(r[0], -1.0f);
}

TEST(FakeQuant, EqualElementsStayEqual) {
  const Tensor r = fake_quant(Tensor({5}, std::vector<float>(5, 0.7f)), BitWidth(8), false);
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_EQ(r[i], r[0]);
  EXPECT_EQ(r[0], fake_quant(Tensor::vector({0.7f}), BitWidth(8), false)[0]);
}

// Oracle: the reconstructed value must be the nearest point of the full
// representable grid {delta * (q - z) : q in [qmin, qmax]}, found by
// enumeration. Grid parameters are recomputed here from the formula.
TEST(FakeQuant, MatchesExhaustiveGridProjection) {
  Rng rng(7);
  for (int trial = 0; trial < 100000; ++trial) {
    const int bits = 2 + static_cast<int>(rng.below(7));  // 2..8
    const std::size_t len = 1 + rng.below(8);
    std::vector<float> w(len);
    const double shift = rng.uniform(-1.0, 1.0);
    for (float& x : w) x = static_cast<float>(rng.uniform(-1.0, 1.0) + shift);
    const Tensor t({len}, w);
    const Tensor r = fake_quant(t, BitWidth(bits), false);

    double lo = 0.0, hi = 0.0;
    for (float x : w) {
      lo = std::min(lo, static_cast<double>(x));
      hi = std::max(hi, static_cast<double>(x));
    }
    const double levels = std::ldexp(1.0, bits);
    const float delta = std::max(static_cast<float>((-lo + hi) / levels), kScaleFloor);
    const double qmin = -levels / 2, qmax = levels / 2 - 1;
    const double z = qmin + std::min(std::floor(-lo / delta), levels - 1);
    for (std::size_t i = 0; i < len; ++i) {
      double best = 0.0, best_err = std::numeric_limits<double>::infinity();
      for (double q = qmin; q <= qmax; q += 1.0) {
        const double g = static_cast<double>(delta) * (q - z);
        const double err = std::fabs(g - w[i]);
        if (err < best_err) {
          best_err = err;
          best = g;
        }
      }
      ASSERT_NEAR(r[i], best, 1e-6 * delta + std::fabs(best) * 0x1p-23) << "trial " << trial << " element " << i;
      ASSERT_LE(std::fabs(double(r[i]) - w[i]), delta + std::fabs(w[i]) * 0x1p-22) << "trial " << trial;
    }
  }
}

TEST(FakeQuant, PerChannelRequiresRankTwo) {
  EXPECT_THROW(fake_quant(Tensor::vector({1.0f}), BitWidth(8), true), DomainError);
  EXPECT_THROW(fake_quant(Tensor({0}), BitWidth(8), false), DomainError);
}

TEST(FakeQuant, FixedParametersAreIdempotent) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> w(32);
    for (float& x : w) x = static_cast<float>(rng.uniform(-2.0, 3.0));
    const BitWidth n(2 + static_cast<int>(rng.below(15)));
    const AffineParams p = compute_params(w, n);
    std::vector<float> once = w;
    fake_quant_inplace(once, p, n);
    std::vector<float> twice = once;
    fake_quant_inplace(twice, p, n);
    ASSERT_EQ(once, twice);
  }
}

TEST(QuantizePerChannel, RowScales) {
  const Tensor w({2, 2}, {1.0f, -1.0f, 0.25f, 0.25f});
  const QuantizedTensor q = quantize_per_channel(w, BitWidth(8));
  ASSERT_EQ(q.scales.size(), 2u);
  EXPECT_FLOAT_EQ(q.scales[0], 2.0f / 256.0f);
  EXPECT_FLOAT_EQ(q.scales[1], 0.25f / 256.0f);
  EXPECT_EQ(q.value(0), 127);
  EXPECT_EQ(q.value(1), -128);
  EXPECT_TRUE(q.per_channel);
  EXPECT_NO_THROW(q.validate());
}

TEST(QuantizePerChannel, IdenticalRowsMatchPerTensor) {
  const Tensor w({3, 4}, {0.1f, -0.4f, 0.9f, 0.3f, 0.1f, -0.4f, 0.9f, 0.3f, 0.1f, -0.4f, 0.9f,
                          0.3f});
  const QuantizedTensor pc = quantize_per_channel(w, BitWidth(8));
  const QuantizedTensor row = quantize(Tensor::vector({0.1f, -0.4f, 0.9f, 0.3f}), BitWidth(8));
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(pc.scales[r], row.scales[0]);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(pc.value(r * 4 + k), row.value(k));
  }
}

TEST(QuantizePerChannel, RankOneIsDomainError) {
  EXPECT_THROW(quantize_per_channel(Tensor::vector({1.0f, 2.0f}), BitWidth(8)), DomainError);
}

double frobenius_error(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  return std::sqrt(s);
}

TEST(QuantizePerChannel, NoWorseThanPerTensorOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Tensor w({64, 64});
    for (float& x : w.data()) x = static_cast<float>(rng.normal() * 0.1);
    const Tensor per_channel = dequantize(quantize_per_channel(w, BitWidth(8)));
    const Tensor per_tensor = dequantize(quantize(w, BitWidth(8)));
    EXPECT_LE(frobenius_error(per_channel, w), frobenius_error(per_tensor, w)) << "seed " << seed;
  }
}

float hardware_fp16_round(float x) {
  return _cvtsh_ss(_cvtss_sh(x, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC));
}

TEST(Fp16Round, Examples) {
  EXPECT_EQ(fp16_round(1.0f), 1.0f);
  EXPECT_EQ(fp16_round(2049.0f), 2048.0f);
  EXPECT_EQ(fp16_round(1e6f), 65504.0f);
  EXPECT_EQ(fp16_round(-1e6f), -65504.0f);
  EXPECT_EQ(fp16_round(0.0f), 0.0f);
}

// Oracle: the F16C conversion instructions (round to nearest even).
TEST(Fp16Round, MatchesHardwareConversion) {
  Rng rng(11);
  for (int i = 0; i < 200000; ++i) {
    const float x = static_cast<float>(std::ldexp(rng.uniform(-1.0, 1.0),
                                                  static_cast<int>(rng.below(42)) - 26));
    ASSERT_EQ(fp16_round(x), hardware_fp16_round(x)) << x;
  }
}

TEST(SteBackward, IsIdentity) {
  const Tensor g = Tensor::vector({1.5f, -2.0f});
  EXPECT_TRUE(bitwise_equal(ste_backward(g), g));
  const Tensor z({3});
  EXPECT_TRUE(bitwise_equal(ste_backward(z), z));
  Rng rng(5);
  Tensor r({100});
  for (float& x : r.data()) x = static_cast<float>(rng.normal());
  EXPECT_TRUE(bitwise_equal(ste_backward(r), r));
}

TEST(QuantizedTensor, ValidateRejectsBrokenInvariants) {
  QuantizedTensor q = quantize(Tensor::vector({-1.0f, 1.0f}), BitWidth(4));
  q.cells = std::vector<std::int8_t>{-9, 0};
  EXPECT_THROW(q.validate(), DomainError);
  q = quantize(Tensor::vector({-1.0f, 1.0f}), BitWidth(4));
  q.scales[0] = 0.0f;
  EXPECT_THROW(q.validate(), DomainError);
}

}  // namespace
}  // namespace actorq::quant
