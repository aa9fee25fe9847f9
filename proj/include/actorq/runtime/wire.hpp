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
// Model-dict wire format.
//
// Little-endian throughout:
//
//   magic "AQMD" | format_version u32 | model_version u64 | entry_count u32
//   per entry:
//     name_len u32 | name bytes | dtype u8 | bit_width u8 | rank u8 |
//     dims u32[rank] | scale_count u32 | scales f32[scale_count] |
//     zero_points i32[scale_count]   (quantized dtypes only) |
//     payload (row-major; 4, 1 or 2 bytes per element for dtype 0, 1, 2)

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "actorq/common/tensor.hpp"
#include "actorq/nn/mlp.hpp"
#include "actorq/nn/quantized_mlp.hpp"
#include "actorq/quant/quant.hpp"

namespace actorq::runtime {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class DType : std::uint8_t { kF32 = 0, kQuant8 = 1, kQuant16 = 2 };

struct ModelEntry {
  std::string name;
  std::variant<Tensor, quant::QuantizedTensor> payload;

  bool quantized() const { return payload.index() == 1; }
  friend bool operator==(const ModelEntry& a, const ModelEntry& b);
};

struct ModelMessage {
  std::uint64_t model_version = 0;
  std::vector<ModelEntry> entries;

  friend bool operator==(const ModelMessage& a, const ModelMessage& b) {
    return a.model_version == b.model_version && a.entries == b.entries;
  }
};

std::vector<std::uint8_t> serialize_model(const ModelMessage& msg);
// Throws FormatError carrying the byte offset where decoding failed.
ModelMessage deserialize_model(std::span<const std::uint8_t> bytes);

// Entries "fc<i>.weight" and "fc<i>.bias" in layer order.
ModelMessage policy_to_message(const nn::MlpPolicy& net, std::uint64_t version);
// Rebuilds an f32 policy, dequantizing quantized entries.
nn::MlpPolicy message_to_policy(const ModelMessage& msg);

// Per-channel quantization of every weight entry at q_comm bits (biases stay
// f32). q_comm = 32 returns the message unchanged.
ModelMessage quantize_message(const ModelMessage& msg, int q_comm);

// Checks q_comm in 2..16 or 32.
void check_comm_bits(int q_comm);

// Integer-kernel network for q_compute in {8, 16}. Quantized weight entries
// whose width equals q_compute are installed without a round trip.
nn::QuantizedMlp message_to_quantized(const ModelMessage& msg, int q_compute);

// Writes via a temporary file and rename, so readers never see a partial file.
void save_model(const std::filesystem::path& path, const ModelMessage& msg);
ModelMessage load_model(const std::filesystem::path& path);

}  // namespace actorq::runtime
