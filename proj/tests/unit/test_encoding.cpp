#include <doctest.h>

#include <cmath>
#include <limits>

#include "cstore/codec.hpp"
#include "cstore/encoding.hpp"
#include "cstore/ledger.hpp"
#include "cstore/rng.hpp"
#include "cstore/storage.hpp"

using namespace cstore;
using wire::Decoder;
using wire::Encoder;

TEST_CASE("integers are fixed width big-endian") {
  Encoder e;
  e.u8(0xAB);
  e.u16(0x0102);
  e.u32(0x03040506);
  e.u64(0x0708090A0B0C0D0EULL);
  CHECK(to_hex(e.buffer()) == "ab010203040506" "0708090a0b0c0d0e");

  Decoder d(e.buffer());
  CHECK(d.u8() == 0xAB);
  CHECK(d.u16() == 0x0102);
  CHECK(d.u32() == 0x03040506);
  CHECK(d.u64() == 0x0708090A0B0C0D0EULL);
  CHECK(d.done());
}

TEST_CASE("f64 is the IEEE bit pattern") {
  Encoder e;
  e.f64(1.0);
  CHECK(to_hex(e.buffer()) == "3ff0000000000000");
  for (double v : {0.0, -0.0, 3.25, -1e300, std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::denorm_min()}) {
    Encoder x;
    x.f64(v);
    Decoder d(x.buffer());
    double back = d.f64();
    CHECK(std::signbit(back) == std::signbit(v));
    CHECK(back == v);
  }
  Encoder n;
  n.f64(std::numeric_limits<double>::quiet_NaN());
  Decoder dn(n.buffer());
  CHECK(std::isnan(dn.f64()));
}

TEST_CASE("byte strings, strings and lists carry u32 prefixes") {
  Encoder e;
  e.bytes(Bytes{1, 2, 3});
  e.str("hi");
  std::vector<std::uint16_t> items{5, 6};
  e.list(items, [](Encoder& enc, std::uint16_t v) { enc.u16(v); });
  CHECK(to_hex(e.buffer()) == "00000003010203" "000000026869" "00000002" "00050006");

  Decoder d(e.buffer());
  CHECK(d.bytes() == Bytes{1, 2, 3});
  CHECK(d.str() == "hi");
  auto back = d.list<std::uint16_t>([](Decoder& dec) { return dec.u16(); }, 2);
  CHECK(back == items);
  d.expect_end();
}

TEST_CASE("digests are raw 32 bytes") {
  auto dg = crypto::hash(as_bytes("d"));
  Encoder e;
  e.digest(dg);
  CHECK(e.buffer().size() == 32);
  Decoder d(e.buffer());
  CHECK(d.digest() == dg);
}

TEST_CASE("lengths beyond u32 are rejected") {
  CHECK(wire::checked_length(0xFFFFFFFFULL) == 0xFFFFFFFFU);
  CHECK_THROWS_AS(wire::checked_length(0x100000000ULL), wire::EncodeError);
  Encoder e;
  CHECK_THROWS_AS(e.count(std::size_t{1} << 32), wire::EncodeError);
}

TEST_CASE("decoder rejects truncation, trailing bytes and absurd counts") {
  Bytes two{0, 1};
  Decoder d(two);
  CHECK_THROWS_AS(d.u32(), wire::DecodeError);

  Bytes prefix{0, 0, 0, 5, 1, 2};
  Decoder d2(prefix);
  CHECK_THROWS_AS(d2.bytes(), wire::DecodeError);

  Bytes huge{0xFF, 0xFF, 0xFF, 0xFF};
  Decoder d3(huge);
  CHECK_THROWS_AS(d3.count(), wire::DecodeError);

  Bytes boolean{2};
  Decoder d4(boolean);
  CHECK_THROWS_AS(d4.boolean(), wire::DecodeError);

  Bytes extra{0, 0, 0, 1, 9};
  CHECK_THROWS_AS(wire::from_bytes<ledger::StoragePointer>(extra), wire::DecodeError);
}

namespace {

ledger::SubBlock sample_subblock(Rng& rng) {
  ledger::SubBlock sb;
  auto d = [&] {
    crypto::Digest x;
    rng.fill(x.bytes);
    return x;
  };
  sb.gop_timestamp_ms = rng.next();
  sb.gop_merkle_root = d();
  sb.access_privileges = Bytes(60, 3);
  sb.storage = {d(), rng.next(), d(), rng.next(), static_cast<std::uint32_t>(rng.next())};
  sb.codec = {"cs-rle/1", 8, 64, 64, 25};
  sb.quality = {rng.unit() * 50, 30.0};
  sb.sensor_metadata = Bytes{'c', 'a', 'm'};
  sb.video_id = rng.next();
  sb.gop_index = rng.next();
  sb.raw_gop_digest = d();
  sb.chain_prev_i = d();
  sb.chain_prev_last_p = d();
  sb.initiator_pubkey.bytes = Bytes(32, 4);
  sb.initiator_signature.bytes = Bytes(64, 5);
  return sb;
}

}  // namespace

TEST_CASE("ledger types round trip and encode canonically") {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    auto sb = sample_subblock(rng);
    auto enc = wire::to_bytes(sb);
    auto back = wire::from_bytes<ledger::SubBlock>(enc);
    CHECK(back == sb);
    CHECK(wire::to_bytes(back) == enc);
    for (std::size_t cut : {std::size_t{0}, enc.size() / 2, enc.size() - 1}) {
      CHECK_THROWS_AS(wire::from_bytes<ledger::SubBlock>(ByteView(enc).subspan(0, cut)), wire::DecodeError);
    }
  }

  ledger::Block b;
  b.height = 3;
  b.timestamp_ms = 12345;
  b.subblocks = {sample_subblock(rng), sample_subblock(rng)};
  b.storage_proofs = {ledger::StorageProofRef{}, ledger::StorageProofRef{}};
  b.miner_id = 8;
  b.miner_pubkey.bytes = Bytes(32, 1);
  b.miner_signature.bytes = Bytes(64, 2);
  auto enc = wire::to_bytes(b);
  CHECK(wire::from_bytes<ledger::Block>(enc) == b);
  CHECK(wire::to_bytes(wire::from_bytes<ledger::Block>(enc)) == enc);
}

TEST_CASE("block streams round trip") {
  std::vector<const ledger::Block*> blocks{&ledger::genesis_block(), &ledger::genesis_block()};
  auto stream = ledger::dump_blocks(blocks);
  auto back = ledger::load_blocks(stream);
  REQUIRE(back.size() == 2);
  CHECK(back[1] == ledger::genesis_block());
}

TEST_CASE("codec types round trip") {
  codec::SyntheticVideoParams p;
  p.width = 8;
  p.height = 8;
  p.gop_size = 3;
  auto g = codec::SyntheticVideo(p).gop(2);
  CHECK(wire::from_bytes<codec::Gop>(wire::to_bytes(g)) == g);
  auto c = codec::encode_gop(g, 4, crypto::Digest{}, crypto::Digest{});
  CHECK(wire::from_bytes<codec::CompressedGop>(wire::to_bytes(c)) == c);
}

TEST_CASE("hex helpers") {
  CHECK(to_hex(Bytes{0x00, 0xff, 0x10}) == "00ff10");
  CHECK(from_hex("00FF10") == Bytes{0x00, 0xff, 0x10});
  CHECK_THROWS_AS(from_hex("abc"), std::invalid_argument);
  CHECK_THROWS_AS(from_hex("zz"), std::invalid_argument);
}
