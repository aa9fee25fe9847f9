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

#include "actorq/runtime/wire.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "actorq/common/error.hpp"

namespace actorq::runtime {

namespace {

constexpr char kMagic[4] = {'A', 'Q', 'M', 'D'};

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<std::conditional_t<std::is_same_v<T, float>, std::int32_t, T>>;
    U u;
    if constexpr (std::is_same_v<T, float>) {
      u = std::bit_cast<std::uint32_t>(v);
    } else {
      u = static_cast<U>(v);
    }
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }

  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }

  template <typename T>
  void put_array(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(values.data(), values.size_bytes());
    } else {
      out_.reserve(out_.size() + values.size_bytes());
      for (T v : values) put(v);
    }
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const std::string& what) {
    if (in_.size() - pos_ < n) {
      throw FormatError("truncated " + what + ": need " + std::to_string(n) + " bytes, have " +
                            std::to_string(in_.size() - pos_),
                        pos_);
    }
  }

  template <typename T>
  T get(const std::string& what) {
    using U = std::make_unsigned_t<std::conditional_t<std::is_same_v<T, float>, std::int32_t, T>>;
    need(sizeof(U), what);
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(U{in_[pos_ + i]} << (8 * i));
    pos_ += sizeof(U);
    if constexpr (std::is_same_v<T, float>) {
      return std::bit_cast<float>(static_cast<std::uint32_t>(u));
    } else {
      return static_cast<T>(u);
    }
  }

  template <typename T>
  void get_array(std::span<T> out, const std::string& what) {
    need(out.size_bytes(), what);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), in_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (T& v : out) v = get<T>(what);
    }
  }

  std::span<const std::uint8_t> take(std::size_t n, const std::string& what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_entry(Writer& w, const ModelEntry& e) {
  w.put(static_cast<std::uint32_t>(e.name.size()));
  w.bytes(e.name.data(), e.name.size());
  const Shape& shape = e.quantized() ? std::get<1>(e.payload).shape : std::get<0>(e.payload).shape();
  if (shape.size() > 255) throw DomainError("entry rank exceeds 255: " + e.name);

  if (!e.quantized()) {
    const Tensor& t = std::get<0>(e.payload);
    w.put(static_cast<std::uint8_t>(DType::kF32));
    w.put(std::uint8_t{32});
    w.put(static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) w.put(static_cast<std::uint32_t>(d));
    w.put(std::uint32_t{0});
    w.put_array(t.data());
    return;
  }
  const quant::QuantizedTensor& q = std::get<1>(e.payload);
  const bool wide = q.bits.cell_bytes() == 2;
  w.put(static_cast<std::uint8_t>(wide ? DType::kQuant16 : DType::kQuant8));
  w.put(static_cast<std::uint8_t>(q.bits.bits()));
  w.put(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t d : shape) w.put(static_cast<std::uint32_t>(d));
  w.put(static_cast<std::uint32_t>(q.scales.size()));
  w.put_array(std::span<const float>(q.scales));
  w.put_array(std::span<const std::int32_t>(q.zero_points));
  std::visit([&](const auto& cells) { w.put_array(std::span(cells)); }, q.cells);
}

ModelEntry read_entry(Reader& r, std::size_t index) {
  const std::string tag = "entry " + std::to_string(index);
  ModelEntry e;
  const auto name_len = r.get<std::uint32_t>(tag + " name length");
  const auto name = r.take(name_len, tag + " name");
  e.name.assign(name.begin(), name.end());
  const std::string where = "entry '" + e.name + "'";

  const std::size_t dtype_at = r.offset();
  const auto dtype = r.get<std::uint8_t>(where + " dtype");
  if (dtype > 2) throw FormatError("unknown dtype " + std::to_string(dtype) + " in " + where, dtype_at);
  const std::size_t bits_at = r.offset();
  const int bits = r.get<std::uint8_t>(where + " bit width");
  const auto rank = r.get<std::uint8_t>(where + " rank");
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = r.get<std::uint32_t>(where + " dims");
    count *= d;
  }
  const std::size_t scales_at = r.offset();
  const auto scale_count = r.get<std::uint32_t>(where + " scale count");

  if (dtype == 0) {
    if (bits != 32) throw FormatError("f32 entry with bit width " + std::to_string(bits), bits_at);
    if (scale_count != 0) throw FormatError("f32 entry with scales in " + where, scales_at);
    r.need(count * 4, where + " payload");
    std::vector<float> data(count);
    r.get_array(std::span(data), where + " payload");
    e.payload = Tensor(std::move(shape), std::move(data));
    return e;
  }

  const bool wide = dtype == 2;
  if (bits < 2 || bits > 16 || (bits > 8) != wide) {
    throw FormatError("bit width " + std::to_string(bits) + " does not fit dtype " +
                          std::to_string(dtype) + " in " + where,
                      bits_at);
  }
  quant::QuantizedTensor q;
  q.bits = quant::BitWidth(bits);
  q.shape = shape;
  q.per_channel = rank >= 2 && shape[0] > 1 && scale_count == shape[0];
  if (scale_count != 1 && !q.per_channel) {
    throw FormatError("scale count " + std::to_string(scale_count) + " does not fit shape in " + where,
                      scales_at);
  }
  r.need(std::size_t{scale_count} * 8, where + " scales");
  q.scales.resize(scale_count);
  r.get_array(std::span(q.scales), where + " scales");
  q.zero_points.resize(scale_count);
  r.get_array(std::span(q.zero_points), where + " zero points");
  const std::size_t payload_at = r.offset();
  r.need(count * (wide ? 2 : 1), where + " payload");
  if (wide) {
    std::vector<std::int16_t> cells(count);
    r.get_array(std::span(cells), where + " payload");
    q.cells = std::move(cells);
  } else {
    std::vector<std::int8_t> cells(count);
    r.get_array(std::span(cells), where + " payload");
    q.cells = std::move(cells);
  }
  try {
    q.validate();
  } catch (const DomainError& err) {
    throw FormatError(std::string(err.what()) + " in " + where, payload_at);
  }
  e.payload = std::move(q);
  return e;
}

}  // namespace

bool operator==(const ModelEntry& a, const ModelEntry& b) {
  if (a.name != b.name || a.payload.index() != b.payload.index()) return false;
  if (!a.quantized()) return bitwise_equal(std::get<0>(a.payload), std::get<0>(b.payload));
  return std::get<1>(a.payload) == std::get<1>(b.payload);
}

std::vector<std::uint8_t> serialize_model(const ModelMessage& msg) {
  std::vector<std::uint8_t> out;
  Writer w(out);
  w.bytes(kMagic, 4);
  w.put(kFormatVersion);
  w.put(msg.model_version);
  w.put(static_cast<std::uint32_t>(msg.entries.size()));
  for (const auto& e : msg.entries) write_entry(w, e);
  return out;
}

ModelMessage deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad magic", 0);
  const auto version = r.get<std::uint32_t>("format version");
  if (version != kFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(version), 4);
  }
  ModelMessage msg;
  msg.model_version = r.get<std::uint64_t>("model version");
  const auto count = r.get<std::uint32_t>("entry count");
  for (std::uint32_t i = 0; i < count; ++i) msg.entries.push_back(read_entry(r, i));
  if (r.offset() != bytes.size()) {
    throw FormatError(std::to_string(bytes.size() - r.offset()) + " trailing bytes", r.offset());
  }
  return msg;
}

ModelMessage policy_to_message(const nn::MlpPolicy& net, std::uint64_t version) {
  ModelMessage msg;
  msg.model_version = version;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const std::string prefix = "fc" + std::to_string(l);
    msg.entries.push_back({prefix + ".weight", net.layers()[l].weight});
    msg.entries.push_back({prefix + ".bias", net.layers()[l].bias});
  }
  return msg;
}

namespace {

Tensor as_f32(const ModelEntry& e) {
  return e.quantized() ? quant::dequantize(std::get<1>(e.payload)) : std::get<0>(e.payload);
}

void check_layout(const ModelMessage& msg) {
  if (msg.entries.empty() || msg.entries.size() % 2 != 0) {
    throw DomainError("model message must hold weight/bias pairs");
  }
  for (std::size_t i = 0; i < msg.entries.size(); i += 2) {
    const std::string prefix = "fc" + std::to_string(i / 2);
    if (msg.entries[i].name != prefix + ".weight" || msg.entries[i + 1].name != prefix + ".bias") {
      throw DomainError("unexpected entry order at '" + msg.entries[i].name + "'");
    }
    if (msg.entries[i + 1].quantized()) throw DomainError("bias entries must be f32");
  }
}

}  // namespace

nn::MlpPolicy message_to_policy(const ModelMessage& msg) {
  check_layout(msg);
  std::vector<nn::DenseLayer> layers;
  for (std::size_t i = 0; i < msg.entries.size(); i += 2) {
    layers.push_back({as_f32(msg.entries[i]), as_f32(msg.entries[i + 1])});
  }
  return nn::MlpPolicy(std::move(layers));
}

void check_comm_bits(int q_comm) {
  if (q_comm == 32 || (q_comm >= 2 && q_comm <= 16)) return;
  throw UnsupportedPrecision("communication precision must be 2..16 or 32, got " +
                             std::to_string(q_comm));
}

ModelMessage quantize_message(const ModelMessage& msg, int q_comm) {
  check_comm_bits(q_comm);
  if (q_comm == 32) return msg;
  ModelMessage out;
  out.model_version = msg.model_version;
  const quant::BitWidth n(q_comm);
  for (const auto& e : msg.entries) {
    const bool weight = e.name.ends_with(".weight");
    if (!weight) {
      out.entries.push_back({e.name, as_f32(e)});
      continue;
    }
    const Tensor w = as_f32(e);
    out.entries.push_back({e.name, w.rank() >= 2 ? quant::quantize_per_channel(w, n)
                                                 : quant::quantize(w, n)});
  }
  return out;
}

nn::QuantizedMlp message_to_quantized(const ModelMessage& msg, int q_compute) {
  nn::check_execution_bits(q_compute);
  check_layout(msg);
  bool direct = true;
  for (std::size_t i = 0; i < msg.entries.size(); i += 2) {
    const auto& e = msg.entries[i];
    direct = direct && e.quantized() && std::get<1>(e.payload).bits.bits() == q_compute;
  }
  if (!direct) return nn::QuantizedMlp::from_policy(message_to_policy(msg), q_compute);
  std::vector<quant::QuantizedTensor> weights;
  std::vector<Tensor> biases;
  for (std::size_t i = 0; i < msg.entries.size(); i += 2) {
    weights.push_back(std::get<1>(msg.entries[i].payload));
    biases.push_back(std::get<0>(msg.entries[i + 1].payload));
  }
  return nn::QuantizedMlp::from_quantized(weights, biases);
}

void save_model(const std::filesystem::path& path, const ModelMessage& msg) {
  const auto bytes = serialize_model(msg);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelMessage load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace actorq::runtime
