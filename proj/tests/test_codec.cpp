#include <cmath>
#include <random>

#include <doctest.h>

#include "profe/codec.hpp"
#include "test_util.hpp"

using namespace profe;

namespace {

RoundMessage sample_message(std::uint64_t seed, QuantMode mode) {
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  RoundMessage m;
  m.sender = static_cast<std::uint16_t>(rng() % 100);
  m.round = rng() % 50;
  m.algorithm = Algorithm::ProFe;
  for (int i = 0; i < 3; ++i)
    m.params.push_back(
        quantize(testutil::random_tensor({4, 5}, rng()), mode));
  for (int i = 0; i < 2; ++i) {
    ProtoRecord p;
    p.class_id = static_cast<std::uint16_t>(i);
    p.count = rng() % 1000 + 1;
    p.vec = quantize(testutil::random_tensor({8}, rng()), mode);
    m.prototypes.push_back(std::move(p));
  }
  return m;
}

bool messages_equal(const RoundMessage& a, const RoundMessage& b) {
  if (a.sender != b.sender || a.round != b.round ||
      a.algorithm != b.algorithm || a.params.size() != b.params.size() ||
      a.prototypes.size() != b.prototypes.size())
    return false;
  auto qeq = [](const QuantizedTensor& x, const QuantizedTensor& y) {
    return x.shape == y.shape && x.mode == y.mode && x.codes == y.codes &&
           x.raw == y.raw &&
           (x.mode != QuantMode::Int16Affine || x.scale == y.scale);
  };
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (!qeq(a.params[i], b.params[i])) return false;
  for (std::size_t i = 0; i < a.prototypes.size(); ++i) {
    if (a.prototypes[i].class_id != b.prototypes[i].class_id ||
        a.prototypes[i].count != b.prototypes[i].count ||
        !qeq(a.prototypes[i].vec, b.prototypes[i].vec))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("int16 affine quantization") {
  SUBCASE("all-zero tensor roundtrips exactly with scale 1") {
    Tensor t({2, 3});
    QuantizedTensor q = quantize(t, QuantMode::Int16Affine);
    CHECK(q.scale == 1.0f);
    for (std::uint16_t c : q.codes) CHECK(c == 0);
    Tensor back = dequantize(q);
    CHECK(back.v == t.v);
  }
  SUBCASE("(-1,0,1) uses the full code range") {
    Tensor t({3}, {-1.0f, 0.0f, 1.0f});
    QuantizedTensor q = quantize(t, QuantMode::Int16Affine);
    CHECK(q.scale == doctest::Approx(1.0 / 32767.0));
    CHECK(static_cast<std::int16_t>(q.codes[0]) == -32767);
    CHECK(static_cast<std::int16_t>(q.codes[1]) == 0);
    CHECK(static_cast<std::int16_t>(q.codes[2]) == 32767);
  }
  SUBCASE("roundtrip error bounded by half a step over random values") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Tensor t({1000});
    for (float& f : t.v) f = dist(rng);
    QuantizedTensor q = quantize(t, QuantMode::Int16Affine);
    Tensor back = dequantize(q);
    for (std::size_t i = 0; i < t.numel(); ++i)
      // slack covers the float rounding of x / delta inside quantize
      CHECK(std::fabs(t.v[i] - back.v[i]) <= q.scale * (0.5f + 0.01f));
  }
  SUBCASE("lattice points roundtrip exactly") {
    QuantizedTensor probe = quantize(
        Tensor({2}, {-0.5f, 0.5f}), QuantMode::Int16Affine);
    Tensor lattice({4});
    for (int i = 0; i < 4; ++i)
      lattice.v[i] = static_cast<float>(i * 100) * probe.scale;
    QuantizedTensor q = quantize_with_scale(lattice, probe.scale);
    Tensor back = dequantize(q);
    CHECK(back.v == lattice.v);
  }
  SUBCASE("re-quantization with unchanged scale is idempotent") {
    Tensor t = testutil::random_tensor({64}, 19);
    QuantizedTensor q = quantize(t, QuantMode::Int16Affine);
    QuantizedTensor q2 = quantize_with_scale(dequantize(q), q.scale);
    CHECK(q.codes == q2.codes);
  }
  SUBCASE("non-finite input rejected") {
    Tensor t({2}, {1.0f, std::numeric_limits<float>::infinity()});
    CHECK_THROWS_AS(quantize(t, QuantMode::Int16Affine), DataError);
    Tensor n({1}, {std::nanf("")});
    CHECK_THROWS_AS(quantize(n, QuantMode::Float16), DataError);
  }
}

TEST_CASE("float16 conversion") {
  SUBCASE("exactly representable values roundtrip") {
    for (float f : {0.0f, 1.0f, -1.0f, 0.5f, 2048.0f, 0.25f, -0.125f})
      CHECK(f16_to_f32(f32_to_f16(f)) == f);
  }
  SUBCASE("relative error <= 2^-11 in the normal range, vs a frexp oracle") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<float> mant(-1.0f, 1.0f);
    std::uniform_int_distribution<int> expo(-14, 15);
    for (int i = 0; i < 20000; ++i) {
      float f = std::ldexp(mant(rng), expo(rng));
      if (std::fabs(f) < std::ldexp(1.0f, -14)) continue;  // keep normal
      float back = f16_to_f32(f32_to_f16(f));
      CHECK(std::fabs(back - f) <= std::fabs(f) * std::ldexp(1.0f, -11));

      // independent oracle: nearest multiple of 2^(e-11) where
      // f = m * 2^e with m in [0.5, 1)
      int e;
      std::frexp(f, &e);
      const double ulp = std::ldexp(1.0, e - 11);
      const double nearest = std::nearbyint(static_cast<double>(f) / ulp) * ulp;
      CHECK(std::fabs(back - f) <=
            std::fabs(nearest - f) + 1e-12 + std::fabs(f) * 1e-7);
    }
  }
  SUBCASE("subnormal halves roundtrip within one step") {
    const float tiny = std::ldexp(1.0f, -20);
    float back = f16_to_f32(f32_to_f16(tiny));
    CHECK(std::fabs(back - tiny) <= std::ldexp(1.0f, -24));
  }
}

TEST_CASE("fp32 mode is lossless") {
  Tensor t = testutil::random_tensor({7, 3}, 43);
  QuantizedTensor q = quantize(t, QuantMode::Fp32);
  CHECK(dequantize(q).v == t.v);
  CHECK(q.payload_bytes() == t.numel() * 4);
}

TEST_CASE("16-bit payload is exactly half the 32-bit payload") {
  Tensor t = testutil::random_tensor({13, 9}, 47);
  QuantizedTensor f16 = quantize(t, QuantMode::Float16);
  QuantizedTensor i16 = quantize(t, QuantMode::Int16Affine);
  QuantizedTensor f32 = quantize(t, QuantMode::Fp32);
  CHECK(f16.payload_bytes() * 2 == f32.payload_bytes());
  CHECK(i16.payload_bytes() * 2 == f32.payload_bytes());
}

TEST_CASE("message encode/decode") {
  SUBCASE("roundtrip identity on random messages") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      for (QuantMode mode :
           {QuantMode::Float16, QuantMode::Int16Affine, QuantMode::Fp32}) {
        RoundMessage m = sample_message(seed, mode);
        RoundMessage back = decode_message(encode_message(m));
        CHECK(messages_equal(m, back));
      }
    }
  }
  SUBCASE("encoding is deterministic") {
    RoundMessage m = sample_message(5, QuantMode::Float16);
    CHECK(encode_message(m) == encode_message(m));
  }
  SUBCASE("exact length for a parameters-only message") {
    RoundMessage m;
    m.sender = 1;
    m.round = 0;
    m.algorithm = Algorithm::ProFe;
    m.params.push_back(
        quantize(Tensor({10}), QuantMode::Float16));  // 10 elements
    // header 17 + tensor header (mode 1 + ndim 1 + dim 4) + 20 payload
    CHECK(encode_message(m).size() == 17 + 6 + 20);
  }
  SUBCASE("truncation raises a protocol error, no partial result") {
    RoundMessage m = sample_message(9, QuantMode::Int16Affine);
    std::vector<std::uint8_t> buf = encode_message(m);
    for (std::size_t cut : {1ul, 5ul, 17ul, buf.size() / 2, buf.size() - 1}) {
      std::vector<std::uint8_t> t(buf.begin(),
                                  buf.begin() + static_cast<std::ptrdiff_t>(cut));
      CHECK_THROWS_AS(decode_message(t), ProtocolError);
    }
  }
  SUBCASE("flipped magic byte raises a magic error") {
    std::vector<std::uint8_t> buf = encode_message(sample_message(9, QuantMode::Float16));
    buf[0] ^= 0xFF;
    CHECK_THROWS_WITH_AS(decode_message(buf),
                         doctest::Contains("magic"), ProtocolError);
  }
  SUBCASE("single-byte mutations never crash the decoder") {
    RoundMessage m = sample_message(13, QuantMode::Int16Affine);
    std::vector<std::uint8_t> buf = encode_message(m);
    std::mt19937 rng(99);
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<std::uint8_t> mutated = buf;
      std::size_t pos = rng() % mutated.size();
      mutated[pos] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      try {
        decode_message(mutated);  // either decodes or throws cleanly
      } catch (const ProtocolError&) {
      }
    }
  }
}

TEST_CASE("byte ledger totals and conservation") {
  ByteLedger ledger;
  // 3-node full mesh, message sizes 100/200/300
  const std::size_t sizes[3] = {100, 200, 300};
  for (int s = 0; s < 3; ++s) ledger.record_send(s, sizes[s] * 2);
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s)
      if (s != r) ledger.record_receive(r, sizes[s]);
  CHECK(ledger.total_sent() == ledger.total_received());
  CHECK(ledger.bytes_received(0) == 500);
  CHECK(ledger.bytes_received(1) == 400);
  CHECK(ledger.bytes_received(2) == 300);
}
