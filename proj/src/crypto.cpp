#include "cstore/crypto.hpp"

#include <openssl/evp.h>

#include <memory>

namespace cstore::crypto {

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
struct PkeyDeleter {
  void operator()(EVP_PKEY* k) const { EVP_PKEY_free(k); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};

using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using Pkey = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

constexpr std::size_t kEd25519KeySize = 32;
constexpr std::size_t kEd25519SigSize = 64;

void check(int rc, const char* what) {
  if (rc != 1) throw CryptoError(what);
}

}  // namespace

Digest Digest::from_hex(std::string_view hex) { return from_bytes(cstore::from_hex(hex)); }

Digest Digest::from_bytes(ByteView data) {
  if (data.size() != kDigestSize) throw std::invalid_argument("digest must be 32 bytes");
  Digest d;
  std::copy(data.begin(), data.end(), d.bytes.begin());
  return d;
}

std::uint64_t Digest::prefix64() const {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[i];
  return v;
}

Hasher::Hasher() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr) throw CryptoError("EVP_MD_CTX_new");
  check(EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr),
        "EVP_DigestInit_ex");
}

Hasher::~Hasher() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Hasher& Hasher::update(ByteView data) {
  check(EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size()),
        "EVP_DigestUpdate");
  return *this;
}

Hasher& Hasher::update_u64(std::uint64_t v) {
  std::array<std::uint8_t, 8> be{};
  for (int i = 0; i < 8; ++i) be[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  return update(be);
}

Digest Hasher::finish() {
  Digest d;
  unsigned int len = 0;
  check(EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), d.bytes.data(), &len),
        "EVP_DigestFinal_ex");
  return d;
}

Digest hash(ByteView data) {
  Digest d;
  unsigned int len = 0;
  check(EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(), nullptr),
        "EVP_Digest");
  return d;
}

Digest hash_pair(const Digest& left, const Digest& right) {
  std::array<std::uint8_t, 2 * kDigestSize> buf;
  std::copy(left.bytes.begin(), left.bytes.end(), buf.begin());
  std::copy(right.bytes.begin(), right.bytes.end(), buf.begin() + kDigestSize);
  return hash(buf);
}

KeyPair KeyPair::from_seed(const Digest& seed) {
  Pkey key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.bytes.data(),
                                        seed.bytes.size()));
  if (!key) throw CryptoError("EVP_PKEY_new_raw_private_key");
  KeyPair kp;
  kp.secret_key.bytes.assign(seed.bytes.begin(), seed.bytes.end());
  std::size_t len = kEd25519KeySize;
  kp.public_key.bytes.resize(len);
  check(EVP_PKEY_get_raw_public_key(key.get(), kp.public_key.bytes.data(), &len),
        "EVP_PKEY_get_raw_public_key");
  return kp;
}

Signature sign(const SecretKey& secret, ByteView message) {
  if (secret.bytes.size() != kEd25519KeySize) throw CryptoError("malformed secret key");
  Pkey key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, secret.bytes.data(),
                                        secret.bytes.size()));
  if (!key) throw CryptoError("EVP_PKEY_new_raw_private_key");
  MdCtx ctx(EVP_MD_CTX_new());
  if (!ctx) throw CryptoError("EVP_MD_CTX_new");
  check(EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()), "EVP_DigestSignInit");
  Signature sig;
  std::size_t len = kEd25519SigSize;
  sig.bytes.resize(len);
  check(EVP_DigestSign(ctx.get(), sig.bytes.data(), &len, message.data(), message.size()),
        "EVP_DigestSign");
  sig.bytes.resize(len);
  return sig;
}

SignatureStatus verify(const PublicKey& public_key, ByteView message, const Signature& sig) {
  if (public_key.bytes.size() != kEd25519KeySize || sig.bytes.size() != kEd25519SigSize) {
    return SignatureStatus::malformed;
  }
  Pkey key(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.bytes.data(),
                                       public_key.bytes.size()));
  if (!key) return SignatureStatus::malformed;
  MdCtx ctx(EVP_MD_CTX_new());
  if (!ctx) throw CryptoError("EVP_MD_CTX_new");
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) {
    return SignatureStatus::malformed;
  }
  int rc = EVP_DigestVerify(ctx.get(), sig.bytes.data(), sig.bytes.size(), message.data(),
                            message.size());
  return rc == 1 ? SignatureStatus::valid : SignatureStatus::invalid;
}

Nonce Nonce::from_counter(std::uint64_t counter) {
  Nonce n;
  for (int i = 0; i < 8; ++i) n.bytes[4 + i] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
  return n;
}

Nonce Nonce::from_digest(const Digest& d) {
  Nonce n;
  std::copy_n(d.bytes.begin(), n.bytes.size(), n.bytes.begin());
  return n;
}

Bytes encrypt(const SymmetricKey& key, const Nonce& nonce, ByteView plaintext) {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw CryptoError("EVP_CIPHER_CTX_new");
  check(EVP_EncryptInit_ex(ctx.get(), EVP_chacha20_poly1305(), nullptr, key.bytes.data(),
                           nonce.bytes.data()),
        "EVP_EncryptInit_ex");
  Bytes out(plaintext.size() + kAeadTagSize);
  int len = 0;
  if (!plaintext.empty()) {
    check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                            static_cast<int>(plaintext.size())),
          "EVP_EncryptUpdate");
  }
  int tail = 0;
  check(EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &tail), "EVP_EncryptFinal_ex");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_GET_TAG, kAeadTagSize,
                            out.data() + plaintext.size()),
        "EVP_CTRL_AEAD_GET_TAG");
  return out;
}

std::optional<Bytes> decrypt(const SymmetricKey& key, const Nonce& nonce, ByteView ciphertext) {
  if (ciphertext.size() < kAeadTagSize) return std::nullopt;
  const std::size_t body = ciphertext.size() - kAeadTagSize;
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw CryptoError("EVP_CIPHER_CTX_new");
  check(EVP_DecryptInit_ex(ctx.get(), EVP_chacha20_poly1305(), nullptr, key.bytes.data(),
                           nonce.bytes.data()),
        "EVP_DecryptInit_ex");
  Bytes out(body);
  int len = 0;
  if (body > 0) {
    check(EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(), static_cast<int>(body)),
          "EVP_DecryptUpdate");
  }
  Bytes tag(ciphertext.begin() + static_cast<std::ptrdiff_t>(body), ciphertext.end());
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG, kAeadTagSize, tag.data()),
        "EVP_CTRL_AEAD_SET_TAG");
  int tail = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &tail) != 1) return std::nullopt;
  return out;
}

}  // namespace cstore::crypto
