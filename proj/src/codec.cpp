#include "profe/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace profe {

namespace {

constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kMsgTypeRoundUpdate = 0;
constexpr char kMagic[4] = {'P', 'R', 'F', 'E'};
constexpr float kInt16Max = 32767.0f;

void check_finite(const Tensor& t, const char* what) {
  for (float f : t.v)
    if (!std::isfinite(f))
      throw DataError(std::string(what) + ": non-finite value in input");
}

}  // namespace

std::uint16_t f32_to_f16(float f) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t sign = (bits >> 16) & 0x8000u;
  const std::int32_t exp = static_cast<std::int32_t>((bits >> 23) & 0xFF) - 127;
  std::uint32_t mant = bits & 0x7FFFFFu;

  if (exp == 128) {  // Inf/NaN
    return static_cast<std::uint16_t>(sign | 0x7C00u | (mant ? 0x200u : 0));
  }
  if (exp > 15) {  // overflow -> Inf
    return static_cast<std::uint16_t>(sign | 0x7C00u);
  }
  if (exp >= -14) {  // normal range
    std::uint32_t half = (static_cast<std::uint32_t>(exp + 15) << 10) |
                         (mant >> 13);
    // round to nearest even on the 13 dropped bits
    std::uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  if (exp >= -24) {  // subnormal half
    mant |= 0x800000u;  // implicit bit
    const int shift = -exp - 14 + 13;
    std::uint32_t half = mant >> shift;
    std::uint32_t rem = mant & ((1u << shift) - 1u);
    std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (half & 1u))) ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  return static_cast<std::uint16_t>(sign);  // underflow -> signed zero
}

float f16_to_f32(std::uint16_t h) {
  const std::uint32_t sign = (static_cast<std::uint32_t>(h) & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1Fu;
  const std::uint32_t mant = h & 0x3FFu;
  std::uint32_t bits;
  if (exp == 0x1F) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {  // subnormal: renormalize
      int e = -1;
      std::uint32_t m = mant;
      do {
        ++e;
        m <<= 1;
      } while ((m & 0x400u) == 0);
      bits = sign | (static_cast<std::uint32_t>(112 - e) << 23) |
             ((m & 0x3FFu) << 13);
    }
  } else {
    bits = sign | ((exp + 112) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

QuantizedTensor quantize(const Tensor& t, QuantMode mode) {
  check_finite(t, "quantize");
  QuantizedTensor q;
  q.shape = t.shape;
  q.mode = mode;
  switch (mode) {
    case QuantMode::Int16Affine: {
      float mx = 0.0f;
      for (float f : t.v) mx = std::max(mx, std::fabs(f));
      q.scale = mx > 0.0f ? mx / kInt16Max : 1.0f;
      return quantize_with_scale(t, q.scale);
    }
    case QuantMode::Float16:
      q.codes.reserve(t.numel());
      for (float f : t.v) q.codes.push_back(f32_to_f16(f));
      return q;
    case QuantMode::Fp32:
      q.raw = t.v;
      return q;
  }
  throw ParameterError("quantize: unknown mode");
}

QuantizedTensor quantize_with_scale(const Tensor& t, float scale) {
  check_finite(t, "quantize");
  if (!(scale > 0.0f)) throw ParameterError("quantize: scale must be > 0");
  QuantizedTensor q;
  q.shape = t.shape;
  q.mode = QuantMode::Int16Affine;
  q.scale = scale;
  q.codes.reserve(t.numel());
  for (float f : t.v) {
    // round half up per floor(x/scale + 0.5)
    float c = std::floor(f / scale + 0.5f);
    c = std::clamp(c, -kInt16Max, kInt16Max);
    q.codes.push_back(
        static_cast<std::uint16_t>(static_cast<std::int16_t>(c)));
  }
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  Tensor t(q.shape);
  switch (q.mode) {
    case QuantMode::Int16Affine:
      for (std::size_t i = 0; i < t.numel(); ++i)
        t.v[i] = static_cast<float>(
                     static_cast<std::int16_t>(q.codes[i])) *
                 q.scale;
      return t;
    case QuantMode::Float16:
      for (std::size_t i = 0; i < t.numel(); ++i)
        t.v[i] = f16_to_f32(q.codes[i]);
      return t;
    case QuantMode::Fp32:
      t.v = q.raw;
      return t;
  }
  throw ParameterError("dequantize: unknown mode");
}

namespace {

// --- little-endian writer / bounds-checked reader ---

struct Writer {
  std::vector<std::uint8_t> buf;
  void u8(std::uint8_t v) { buf.push_back(v); }
  void u16(std::uint16_t v) {
    buf.push_back(static_cast<std::uint8_t>(v));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
      buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
};

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw ProtocolError("truncated message at offset " +
                          std::to_string(pos) + ": need " + std::to_string(n) +
                          " bytes, have " + std::to_string(buf.size() - pos));
  }
  std::uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(buf[pos]) |
                      static_cast<std::uint16_t>(buf[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
};

void write_tensor(Writer& w, const QuantizedTensor& q) {
  if (q.shape.size() > 255)
    throw ProtocolError("encode: tensor rank exceeds 255");
  w.u8(static_cast<std::uint8_t>(q.mode));
  w.u8(static_cast<std::uint8_t>(q.shape.size()));
  for (std::size_t d : q.shape) {
    if (d > std::numeric_limits<std::uint32_t>::max())
      throw ProtocolError("encode: dimension exceeds u32");
    w.u32(static_cast<std::uint32_t>(d));
  }
  if (q.mode == QuantMode::Int16Affine) w.f32(q.scale);
  if (q.mode == QuantMode::Fp32) {
    for (float f : q.raw) w.f32(f);
  } else {
    for (std::uint16_t c : q.codes) w.u16(c);
  }
}

QuantizedTensor read_tensor(Reader& r) {
  QuantizedTensor q;
  const std::uint8_t mode = r.u8();
  if (mode > 2)
    throw ProtocolError("unknown tensor mode " + std::to_string(mode) +
                        " at offset " + std::to_string(r.pos - 1));
  q.mode = static_cast<QuantMode>(mode);
  const std::uint8_t ndim = r.u8();
  std::uint64_t count = 1;
  for (std::uint8_t i = 0; i < ndim; ++i) {
    std::uint32_t d = r.u32();
    if (d == 0 || count * d < count || count * d > (1ull << 32))
      throw ProtocolError("bad tensor dimension at offset " +
                          std::to_string(r.pos - 4));
    q.shape.push_back(d);
    count *= d;
  }
  if (q.mode == QuantMode::Int16Affine) {
    q.scale = r.f32();
    if (!(q.scale > 0.0f))
      throw ProtocolError("bad quantization scale at offset " +
                          std::to_string(r.pos - 4));
  }
  // Size the payload before reading so truncation is caught up front.
  r.need(count * (q.mode == QuantMode::Fp32 ? 4 : 2));
  if (q.mode == QuantMode::Fp32) {
    q.raw.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) q.raw.push_back(r.f32());
  } else {
    q.codes.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) q.codes.push_back(r.u16());
  }
  return q;
}

}  // namespace

std::vector<std::uint8_t> encode_message(const RoundMessage& m) {
  if (m.params.size() > 0xFFFF || m.prototypes.size() > 0xFFFF)
    throw ProtocolError("encode: too many tensors or prototypes");
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kVersion);
  w.u8(kMsgTypeRoundUpdate);
  w.u8(static_cast<std::uint8_t>(m.algorithm));
  w.u16(m.sender);
  w.u32(m.round);
  w.u16(static_cast<std::uint16_t>(m.params.size()));
  w.u16(static_cast<std::uint16_t>(m.prototypes.size()));
  for (const QuantizedTensor& q : m.params) write_tensor(w, q);
  for (const ProtoRecord& p : m.prototypes) {
    w.u16(p.class_id);
    w.u64(p.count);
    write_tensor(w, p.vec);
  }
  return w.buf;
}

RoundMessage decode_message(const std::vector<std::uint8_t>& buf) {
  Reader r{buf};
  r.need(4);
  for (int i = 0; i < 4; ++i)
    if (buf[i] != static_cast<std::uint8_t>(kMagic[i]))
      throw ProtocolError("bad magic at offset " + std::to_string(i));
  r.pos = 4;
  const std::uint8_t version = r.u8();
  if (version != kVersion)
    throw ProtocolError("unsupported version " + std::to_string(version) +
                        " at offset 4");
  const std::uint8_t msg_type = r.u8();
  if (msg_type != kMsgTypeRoundUpdate)
    throw ProtocolError("unknown message type " + std::to_string(msg_type) +
                        " at offset 5");
  RoundMessage m;
  const std::uint8_t algo = r.u8();
  if (algo > 2)
    throw ProtocolError("unknown algorithm " + std::to_string(algo) +
                        " at offset 6");
  m.algorithm = static_cast<Algorithm>(algo);
  m.sender = r.u16();
  m.round = r.u32();
  const std::uint16_t n_tensors = r.u16();
  const std::uint16_t n_protos = r.u16();
  for (std::uint16_t i = 0; i < n_tensors; ++i)
    m.params.push_back(read_tensor(r));
  for (std::uint16_t i = 0; i < n_protos; ++i) {
    ProtoRecord p;
    p.class_id = r.u16();
    p.count = r.u64();
    p.vec = read_tensor(r);
    m.prototypes.push_back(std::move(p));
  }
  if (r.pos != buf.size())
    throw ProtocolError("trailing bytes at offset " + std::to_string(r.pos));
  return m;
}

}  // namespace profe
