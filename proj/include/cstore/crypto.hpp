#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "cstore/bytes.hpp"

// Hashing, signatures and the symmetric transform. SHA-256, Ed25519 and
// ChaCha20-Poly1305, all through OpenSSL's EVP interface.
namespace cstore::crypto {

class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDigestSize = 32;

struct Digest {
  std::array<std::uint8_t, kDigestSize> bytes{};

  static Digest zero() { return {}; }
  static Digest from_hex(std::string_view hex);
  static Digest from_bytes(ByteView data);

  ByteView view() const { return bytes; }
  std::string hex() const { return to_hex(bytes); }
  bool is_zero() const { return *this == Digest{}; }

  // First eight bytes, big-endian. Handy for seeding and bucketing.
  std::uint64_t prefix64() const;

  auto operator<=>(const Digest&) const = default;
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    return static_cast<std::size_t>(d.prefix64());
  }
};

Digest hash(ByteView data);
Digest hash_pair(const Digest& left, const Digest& right);

// Incremental hashing over several parts; hash(a || b || ...) without copying.
class Hasher {
 public:
  Hasher();
  ~Hasher();
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;

  Hasher& update(ByteView data);
  Hasher& update(const Digest& d) { return update(d.view()); }
  Hasher& update_u64(std::uint64_t v);
  Digest finish();

 private:
  void* ctx_;
};

struct PublicKey {
  Bytes bytes;
  bool operator==(const PublicKey&) const = default;
};

struct SecretKey {
  Bytes bytes;
};

struct Signature {
  Bytes bytes;
  bool operator==(const Signature&) const = default;
};

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;

  // Deterministic Ed25519 key pair; the 32-byte seed is the private key.
  static KeyPair from_seed(const Digest& seed);
};

Signature sign(const SecretKey& key, ByteView message);

enum class SignatureStatus {
  valid,
  invalid,    // well-formed key and signature that do not match the message
  malformed,  // wrong key or signature length
};

SignatureStatus verify(const PublicKey& key, ByteView message, const Signature& sig);

inline bool verify_ok(const PublicKey& key, ByteView message, const Signature& sig) {
  return verify(key, message, sig) == SignatureStatus::valid;
}

struct SymmetricKey {
  std::array<std::uint8_t, 32> bytes{};
  bool operator==(const SymmetricKey&) const = default;
};

struct Nonce {
  std::array<std::uint8_t, 12> bytes{};

  static Nonce from_counter(std::uint64_t counter);
  static Nonce from_digest(const Digest& d);
};

inline constexpr std::size_t kAeadTagSize = 16;

// Output is ciphertext || 16-byte tag. The (key, nonce) pair must not repeat.
Bytes encrypt(const SymmetricKey& key, const Nonce& nonce, ByteView plaintext);

// nullopt when authentication fails or the input is shorter than the tag.
std::optional<Bytes> decrypt(const SymmetricKey& key, const Nonce& nonce, ByteView ciphertext);

}  // namespace cstore::crypto
