#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cstore/crypto.hpp"
#include "cstore/encoding.hpp"

// On-chain data model. Blocks carry GOP metadata only; compressed video lives
// with the storage nodes named in each subblock.
namespace cstore::ledger {

using crypto::Digest;
using NodeId = std::uint32_t;

class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultBMax = 5;
inline constexpr std::size_t kMaxSubBlockSize = 1024;

// Stable codes shared by chain validation, block verification and the tamper
// detector. Names are part of the CLI and metrics output.
enum class RejectReason : std::uint8_t {
  structural,
  signature_fail,
  storage_fail,
  merkle_fail,
  quality_fail,
  chain_link_fail,
  raw_missing,
};

std::string_view to_string(RejectReason r);

struct StoragePointer {
  Digest address;             // hash of the stored object
  NodeId storage_node = 0;
  Digest chunk_root;          // Merkle root over the object's chunk hashes
  std::uint64_t object_size = 0;
  std::uint32_t chunk_size = 0;
  bool operator==(const StoragePointer&) const = default;
};

struct CodecParams {
  std::string algorithm_id;
  std::uint32_t quantizer = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t frame_count = 0;
  bool operator==(const CodecParams&) const = default;
};

struct QualityClaim {
  double mean_psnr_db = 0.0;
  double threshold_db = 0.0;
  bool operator==(const QualityClaim&) const = default;
};

struct SubBlock {
  std::uint64_t gop_timestamp_ms = 0;
  Digest gop_merkle_root;          // over hashes of the encrypted frame payloads
  Bytes access_privileges;         // content key wrapped for authorized readers
  StoragePointer storage;
  CodecParams codec;
  QualityClaim quality;
  Bytes sensor_metadata;
  std::uint64_t video_id = 0;
  std::uint64_t gop_index = 0;
  Digest raw_gop_digest;           // hash of the canonical raw GOP encoding
  Digest chain_prev_i;
  Digest chain_prev_last_p;
  crypto::PublicKey initiator_pubkey;
  crypto::Signature initiator_signature;

  bool operator==(const SubBlock&) const = default;
};

// What the initiator signs: the fields it authors when the GOP is captured.
Bytes initiator_signing_payload(std::uint64_t video_id, std::uint64_t gop_index,
                                std::uint64_t timestamp_ms, ByteView sensor_metadata,
                                const Digest& raw_gop_digest);
Bytes initiator_signing_payload(const SubBlock& sb);

bool initiator_signature_ok(const SubBlock& sb);

struct StorageProofRef {
  Digest address;
  Digest nonce;
  Digest proof_digest;  // hash of the encoded StorageProof obtained at placement
  bool operator==(const StorageProofRef&) const = default;
};

struct Block {
  Digest prev_block_hash;
  std::uint64_t height = 0;
  std::uint64_t timestamp_ms = 0;
  std::vector<SubBlock> subblocks;
  Digest block_merkle_root;
  NodeId miner_id = 0;
  crypto::PublicKey miner_pubkey;
  std::vector<StorageProofRef> storage_proofs;
  crypto::Signature miner_signature;

  bool operator==(const Block&) const = default;
};

// Canonical encoding of everything but the miner signature; the block hash and
// the miner signature are both taken over these bytes.
Bytes block_signing_payload(const Block& b);
Digest block_hash(const Block& b);

const Block& genesis_block();

struct ChainParams {
  std::size_t b_max = kDefaultBMax;
  std::size_t max_subblock_size = kMaxSubBlockSize;
};

// Throws LedgerError for a bad initiator signature or an oversize encoding.
SubBlock make_subblock(SubBlock draft, const ChainParams& params = {});

// Signs and returns the block; throws LedgerError on an empty or oversized set,
// invalid initiator signatures, or mismatched proof references.
Block assemble_block(std::vector<SubBlock> subblocks, const Digest& prev_hash,
                     std::uint64_t prev_height, NodeId miner_id, const crypto::KeyPair& miner_keys,
                     std::uint64_t timestamp_ms, std::vector<StorageProofRef> storage_proofs,
                     const ChainParams& params = {});

struct Rejection {
  RejectReason reason;
  std::string detail;
};

// Checks that only need the block and its parent's height.
std::optional<Rejection> check_structure(const Block& b, std::uint64_t parent_height,
                                         const ChainParams& params);

enum class AppendStatus { appended, duplicate, orphaned, rejected };

struct AppendResult {
  AppendStatus status = AppendStatus::rejected;
  std::optional<Rejection> rejection;
  Digest hash;
};

class Chain {
 public:
  explicit Chain(ChainParams params = {});

  const ChainParams& params() const { return params_; }
  Digest genesis_hash() const { return genesis_hash_; }

  // Structural validation only; consensus checks must already have passed.
  // Unknown parents are held as orphans until the parent arrives.
  AppendResult validate_and_append(const Block& block);

  bool contains(const Digest& h) const { return entries_.count(h) != 0; }
  const Block* find(const Digest& h) const;
  std::optional<std::uint64_t> height_of(const Digest& h) const;

  // Longest chain; equal heights resolved by the lexicographically smaller hash.
  Digest tip() const;
  std::uint64_t tip_height() const { return entries_.at(tip()).block.height; }
  const std::set<Digest>& tips() const { return tips_; }

  // Blocks from genesis to the given block (default: canonical tip), inclusive.
  std::vector<const Block*> path_to(const Digest& h) const;
  std::vector<const Block*> canonical() const { return path_to(tip()); }

  bool is_ancestor(const Digest& ancestor, const Digest& descendant) const;

  std::vector<Block> take_orphans_of(const Digest& parent);
  std::size_t orphan_count() const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Block block;
  };

  ChainParams params_;
  Digest genesis_hash_;
  std::unordered_map<Digest, Entry, crypto::DigestHash> entries_;
  std::set<Digest> tips_;
  std::map<Digest, std::map<Digest, Block>> orphans_;  // parent -> (hash -> block)
};

Digest fork_choice(const Chain& chain);

void write(wire::Encoder& e, const StoragePointer& v);
void read(wire::Decoder& d, StoragePointer& v);
void write(wire::Encoder& e, const CodecParams& v);
void read(wire::Decoder& d, CodecParams& v);
void write(wire::Encoder& e, const QualityClaim& v);
void read(wire::Decoder& d, QualityClaim& v);
void write(wire::Encoder& e, const SubBlock& v);
void read(wire::Decoder& d, SubBlock& v);
void write(wire::Encoder& e, const StorageProofRef& v);
void read(wire::Decoder& d, StorageProofRef& v);
void write(wire::Encoder& e, const Block& v);
void read(wire::Decoder& d, Block& v);

// Length-prefixed block stream: per block a u32 length, then its encoding.
Bytes dump_blocks(const std::vector<const Block*>& blocks);
std::vector<Block> load_blocks(ByteView stream);

}  // namespace cstore::ledger
