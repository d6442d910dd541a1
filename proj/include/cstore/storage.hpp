#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cstore/crypto.hpp"
#include "cstore/encoding.hpp"
#include "cstore/ledger.hpp"
#include "cstore/merkle.hpp"

// Content-addressed storage nodes, chunk-level storage proofs, credit
// accounting and the traveling auditor.
namespace cstore::storage {

using crypto::Digest;
using ledger::NodeId;

inline constexpr std::uint32_t kDefaultChunkSize = 4096;
inline constexpr std::size_t kDefaultChallengeCount = 16;

class StorageError : public std::runtime_error {
 public:
  enum class Kind { capacity, not_found, protocol };

  StorageError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ContentAddress {
  Digest digest;

  static ContentAddress of(ByteView data) { return {crypto::hash(data)}; }
  auto operator<=>(const ContentAddress&) const = default;
};

// ceil(size / chunk_size), with an empty object counted as one empty chunk.
std::uint64_t chunk_count(std::uint64_t object_size, std::uint32_t chunk_size);
std::uint64_t chunk_length(std::uint64_t index, std::uint64_t object_size, std::uint32_t chunk_size);

merkle::MerkleTree chunk_tree(ByteView data, std::uint32_t chunk_size);

struct StoredObject {
  Bytes data;
  std::uint32_t chunk_size = kDefaultChunkSize;
  merkle::MerkleTree tree;        // built when the object was stored
  std::vector<bool> missing;      // chunks the node has lost
  std::uint32_t refs = 1;

  StoredObject(Bytes bytes, std::uint32_t chunk_size);

  std::uint64_t chunks() const { return tree.leaf_count(); }
  ByteView chunk(std::uint64_t index) const;
  bool intact() const;
};

struct StorageChallenge {
  ContentAddress address;
  Digest nonce;
  std::vector<std::uint64_t> chunk_indices;  // distinct, ascending
  std::uint64_t object_size = 0;
  std::uint32_t chunk_size = kDefaultChunkSize;
};

struct ChunkResponse {
  std::uint64_t index = 0;
  bool present = false;
  Bytes chunk;
  merkle::MerkleProof proof;
  Digest binding;  // hash(nonce || chunk)
};

struct StorageProof {
  ContentAddress address;
  Digest nonce;
  std::vector<ChunkResponse> responses;
};

Digest nonce_binding(const Digest& nonce, ByteView chunk);

// k distinct chunk indices drawn uniformly, plus a fresh 32-byte nonce; both are
// a pure function of (address, rng_seed). Throws StorageError(protocol) when k
// is zero or exceeds the chunk count.
StorageChallenge make_challenge(const ContentAddress& address, std::uint64_t rng_seed,
                                std::size_t k, std::uint64_t object_size,
                                std::uint32_t chunk_size = kDefaultChunkSize);

bool verify_storage_proof(const Digest& chunk_root, const StorageChallenge& challenge,
                          const StorageProof& proof);

class StorageNode {
 public:
  StorageNode(NodeId id, std::uint64_t capacity, std::uint32_t chunk_size = kDefaultChunkSize);

  NodeId id() const { return id_; }
  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t used() const { return used_; }
  std::uint64_t available() const { return capacity_ - used_; }
  std::uint32_t chunk_size() const { return chunk_size_; }
  bool online() const { return online_; }
  void set_online(bool v) { online_ = v; }

  // Identical bytes are stored once and charged once.
  ContentAddress store(Bytes ciphertext);
  Bytes retrieve(const ContentAddress& address) const;
  bool has(const ContentAddress& address) const { return objects_.count(address.digest) != 0; }
  const StoredObject* object(const ContentAddress& address) const;
  const std::map<Digest, StoredObject>& objects() const { return objects_; }

  StorageProof respond(const StorageChallenge& challenge) const;

  // Fault injection: the node's view of an object diverges from what it promised.
  bool drop_object(const ContentAddress& address);
  void drop_chunks(const ContentAddress& address, const std::vector<std::uint64_t>& indices);
  void flip_byte(const ContentAddress& address, std::uint64_t offset, std::uint8_t mask = 0x01);
  void replace_object(const ContentAddress& address, Bytes data);

  // Restores an object exactly as dumped, including lost chunks.
  void restore(const Digest& address, StoredObject object);

 private:
  StoredObject& mutable_object(const ContentAddress& address);

  NodeId id_;
  std::uint64_t capacity_;
  std::uint32_t chunk_size_;
  std::uint64_t used_ = 0;
  bool online_ = true;
  std::map<Digest, StoredObject> objects_;
};

class StorageDirectory {
 public:
  StorageNode& add(StorageNode node);
  StorageNode* find(NodeId id);
  const StorageNode* find(NodeId id) const;
  StorageNode& at(NodeId id);
  const std::map<NodeId, StorageNode>& nodes() const { return nodes_; }
  std::map<NodeId, StorageNode>& nodes() { return nodes_; }

  // Issues a fresh challenge to the node named by the pointer and checks the
  // answer against the pointer's chunk root. Unreachable nodes fail.
  bool challenge(const ledger::StoragePointer& pointer, std::uint64_t rng_seed, std::size_t k,
                 std::string* detail = nullptr) const;

 private:
  std::map<NodeId, StorageNode> nodes_;
};

// Byte-denominated storage credits. Balances never go negative and always sum
// to total_granted - total_spent.
class CreditLedger {
 public:
  void grant(NodeId node, std::uint64_t amount);
  // Grants at most once per key; returns false on a repeat.
  bool grant_once(const Digest& key, NodeId node, std::uint64_t amount);
  bool spend(NodeId node, std::uint64_t amount);
  std::uint64_t balance(NodeId node) const;

  void accrue_pending(NodeId node, const Digest& object, std::uint64_t amount);
  std::uint64_t pending(NodeId node) const;
  std::uint64_t settle(NodeId node);
  std::uint64_t settle_all();
  std::uint64_t forfeit(NodeId node, const Digest& object);

  std::uint64_t total_granted() const { return granted_; }
  std::uint64_t total_spent() const { return spent_; }
  std::uint64_t total_forfeited() const { return forfeited_; }
  const std::map<NodeId, std::uint64_t>& balances() const { return balances_; }

 private:
  std::map<NodeId, std::uint64_t> balances_;
  std::map<NodeId, std::map<Digest, std::uint64_t>> pending_;
  std::set<Digest> granted_keys_;
  std::uint64_t granted_ = 0;
  std::uint64_t spent_ = 0;
  std::uint64_t forfeited_ = 0;
};

struct Auditor {
  std::uint64_t seed = 0;
  std::size_t samples_per_round = 4;
  std::size_t challenge_k = kDefaultChallengeCount;
  std::uint64_t round = 0;
};

struct AuditSample {
  std::uint64_t height = 0;
  std::size_t subblock_index = 0;
  std::uint64_t video_id = 0;
  std::uint64_t gop_index = 0;
  Digest address;
  NodeId node = 0;
  bool passed = false;
  std::string detail;
};

struct AuditReport {
  std::uint64_t round = 0;
  std::vector<AuditSample> samples;
  std::size_t failures = 0;
  std::vector<NodeId> flagged_nodes;
  std::uint64_t forfeited = 0;
};

// Samples subblocks of the chain uniformly without replacement, challenges
// their storage nodes and flags failures. Flagged objects forfeit their pending
// credits when a ledger is supplied. Advances auditor.round.
AuditReport audit_round(Auditor& auditor, const std::vector<const ledger::Block*>& chain,
                        const StorageDirectory& directory, CreditLedger* credits = nullptr);

void write(wire::Encoder& e, const StorageChallenge& v);
void read(wire::Decoder& d, StorageChallenge& v);
void write(wire::Encoder& e, const StorageProof& v);
void read(wire::Decoder& d, StorageProof& v);
void write(wire::Encoder& e, const StorageDirectory& v);
void read(wire::Decoder& d, StorageDirectory& v);

}  // namespace cstore::storage
