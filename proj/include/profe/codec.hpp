#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "profe/tensor.hpp"

namespace profe {

enum class QuantMode : std::uint8_t {
  Int16Affine = 0,  // per-tensor scale, 16-bit signed codes
  Float16 = 1,      // IEEE binary16, round-to-nearest-even
  Fp32 = 2,         // raw 32-bit floats (baseline / quantization off)
};

struct QuantizedTensor {
  std::vector<std::size_t> shape;
  QuantMode mode = QuantMode::Float16;
  float scale = 1.0f;                // Int16Affine only
  std::vector<std::uint16_t> codes;  // Int16Affine/Float16 payload
  std::vector<float> raw;            // Fp32 payload

  std::size_t numel() const { return Tensor::numel_of(shape); }
  // Payload bytes on the wire (codes only, headers excluded).
  std::size_t payload_bytes() const {
    return numel() * (mode == QuantMode::Fp32 ? 4 : 2);
  }
};

QuantizedTensor quantize(const Tensor& t, QuantMode mode);
// Int16Affine with a caller-supplied scale (re-quantization path).
QuantizedTensor quantize_with_scale(const Tensor& t, float scale);
Tensor dequantize(const QuantizedTensor& q);

// IEEE binary16 conversion helpers.
std::uint16_t f32_to_f16(float f);
float f16_to_f32(std::uint16_t h);

enum class Algorithm : std::uint8_t { ProFe = 0, FedAvg = 1, FedProto = 2 };

struct ProtoRecord {
  std::uint16_t class_id = 0;
  std::uint64_t count = 0;
  QuantizedTensor vec;
};

// One node's per-round broadcast unit.
struct RoundMessage {
  std::uint16_t sender = 0;
  std::uint32_t round = 0;
  Algorithm algorithm = Algorithm::ProFe;
  std::vector<QuantizedTensor> params;  // SplitModel serialization order
  std::vector<ProtoRecord> prototypes;
};

std::vector<std::uint8_t> encode_message(const RoundMessage& m);
RoundMessage decode_message(const std::vector<std::uint8_t>& buf);

// Exact cumulative wire bytes per node.
class ByteLedger {
 public:
  void record_send(int node, std::size_t bytes) { sent_[node] += bytes; }
  void record_receive(int node, std::size_t bytes) { received_[node] += bytes; }
  std::uint64_t bytes_sent(int node) const { return lookup(sent_, node); }
  std::uint64_t bytes_received(int node) const {
    return lookup(received_, node);
  }
  std::uint64_t total_sent() const { return total(sent_); }
  std::uint64_t total_received() const { return total(received_); }

 private:
  static std::uint64_t lookup(const std::map<int, std::uint64_t>& m, int k) {
    auto it = m.find(k);
    return it == m.end() ? 0 : it->second;
  }
  static std::uint64_t total(const std::map<int, std::uint64_t>& m) {
    std::uint64_t t = 0;
    for (const auto& [k, v] : m) t += v;
    return t;
  }
  std::map<int, std::uint64_t> sent_, received_;
};

}  // namespace profe
