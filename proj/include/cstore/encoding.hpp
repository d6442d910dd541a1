#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cstore/bytes.hpp"
#include "cstore/crypto.hpp"

// Canonical encoding shared by every wire and storage format in the repo.
//
//   integers      fixed width, big-endian
//   f64           IEEE-754 bit pattern as u64
//   bool          one byte, 0 or 1
//   Digest        32 raw bytes, no prefix
//   byte string   u32 length, then the bytes
//   list          u32 element count, then the elements
//   struct        fields in declared order, no tags or padding
//
// See docs/wire-format.md for the per-type field layouts.
namespace cstore::wire {

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Validates a length or count against the u32 prefix limit.
std::uint32_t checked_length(std::size_t n);

class Encoder {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void boolean(bool v) { u8(v ? 1 : 0); }
  void digest(const crypto::Digest& d) { raw(d.view()); }
  void bytes(ByteView data);
  void str(std::string_view s) { bytes(as_bytes(s)); }
  void count(std::size_t n) { u32(checked_length(n)); }
  void raw(ByteView data) { append(out_, data); }

  template <class Range, class Fn>
  void list(const Range& items, Fn&& each) {
    count(std::size(items));
    for (const auto& item : items) each(*this, item);
  }

  const Bytes& buffer() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Decoder {
 public:
  explicit Decoder(ByteView in) : in_(in) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  bool boolean();
  crypto::Digest digest();
  Bytes bytes();
  std::string str();
  // Reads a u32 count and sanity-checks it against the bytes left, assuming each
  // element takes at least min_element_size bytes.
  std::size_t count(std::size_t min_element_size = 1);
  ByteView raw(std::size_t n);

  template <class T, class Fn>
  std::vector<T> list(Fn&& each, std::size_t min_element_size = 1) {
    std::size_t n = count(min_element_size);
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(each(*this));
    return out;
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  ByteView in_;
  std::size_t pos_ = 0;
};

// Serializable types provide `void write(Encoder&, const T&)` and
// `void read(Decoder&, T&)` found by ADL.
template <class T>
Bytes to_bytes(const T& value) {
  Encoder e;
  write(e, value);
  return e.take();
}

template <class T>
T from_bytes(ByteView data) {
  Decoder d(data);
  T value{};
  read(d, value);
  d.expect_end();
  return value;
}

}  // namespace cstore::wire
