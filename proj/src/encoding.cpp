#include "cstore/encoding.hpp"

#include <bit>
#include <limits>

namespace cstore::wire {

std::uint32_t checked_length(std::size_t n) {
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw EncodeError("length " + std::to_string(n) + " exceeds u32 prefix");
  }
  return static_cast<std::uint32_t>(n);
}

void Encoder::u16(std::uint16_t v) {
  out_.push_back(static_cast<std::uint8_t>(v >> 8));
  out_.push_back(static_cast<std::uint8_t>(v));
}

void Encoder::u32(std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Encoder::u64(std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Encoder::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Encoder::bytes(ByteView data) {
  u32(checked_length(data.size()));
  raw(data);
}

void Decoder::need(std::size_t n) const {
  if (remaining() < n) {
    throw DecodeError("truncated input: need " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", have " + std::to_string(remaining()));
  }
}

ByteView Decoder::raw(std::size_t n) {
  need(n);
  ByteView out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t Decoder::u8() {
  need(1);
  return in_[pos_++];
}

std::uint16_t Decoder::u16() {
  auto b = raw(2);
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t Decoder::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (std::uint8_t x : b) v = (v << 8) | x;
  return v;
}

std::uint64_t Decoder::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (std::uint8_t x : b) v = (v << 8) | x;
  return v;
}

double Decoder::f64() { return std::bit_cast<double>(u64()); }

bool Decoder::boolean() {
  std::uint8_t v = u8();
  if (v > 1) throw DecodeError("boolean byte out of range");
  return v == 1;
}

crypto::Digest Decoder::digest() { return crypto::Digest::from_bytes(raw(crypto::kDigestSize)); }

Bytes Decoder::bytes() {
  std::uint32_t n = u32();
  auto b = raw(n);
  return Bytes(b.begin(), b.end());
}

std::string Decoder::str() {
  std::uint32_t n = u32();
  auto b = raw(n);
  return std::string(b.begin(), b.end());
}

std::size_t Decoder::count(std::size_t min_element_size) {
  std::uint32_t n = u32();
  if (min_element_size > 0 && n > remaining() / min_element_size) {
    throw DecodeError("list count " + std::to_string(n) + " exceeds remaining input");
  }
  return n;
}

void Decoder::expect_end() const {
  if (!done()) throw DecodeError(std::to_string(remaining()) + " trailing bytes");
}

}  // namespace cstore::wire
