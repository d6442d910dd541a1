#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cstore/codec.hpp"
#include "cstore/crypto.hpp"
#include "cstore/ledger.hpp"
#include "cstore/storage.hpp"

// Proof of WorkStore: mining is compression to a quality target plus verifiable
// storage of the encrypted result; verification re-checks storage (a), Merkle
// commitments (b) and compression quality against the raw GOP (c).
namespace cstore::consensus {

using crypto::Digest;
using ledger::Block;
using ledger::NodeId;
using ledger::RejectReason;
using ledger::Rejection;
using ledger::SubBlock;

class ConsensusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Digest raw_gop_digest(const codec::Gop& gop);

struct GopTransaction {
  codec::Gop gop;
  std::uint64_t video_id = 0;
  std::uint64_t gop_index = 0;
  std::uint64_t timestamp_ms = 0;
  Bytes sensor_metadata;
  Digest raw_digest;
  crypto::PublicKey initiator_pubkey;
  crypto::Signature signature;

  static GopTransaction create(codec::Gop gop, std::uint64_t video_id, Bytes sensor_metadata,
                               const crypto::KeyPair& initiator);

  // Signature valid and the raw frames hash to raw_digest.
  bool authentic() const;
  std::size_t raw_size() const { return gop.raw_size(); }
};

void write(wire::Encoder& e, const GopTransaction& v);
void read(wire::Decoder& d, GopTransaction& v);

// Where a video's content chain stands after some block: the digests the next
// GOP must embed and the index it must carry.
struct LinkState {
  Digest prev_i;
  Digest prev_last_p;
  std::uint64_t next_gop_index = 0;
  bool operator==(const LinkState&) const = default;
};

using ContentState = std::map<std::uint64_t, LinkState>;

// (hash(I payload), hash(last P payload)); the I payload stands in for the last
// P when the GOP has a single frame. nullptr means the video's first GOP.
std::pair<Digest, Digest> chain_link_digests(const codec::CompressedGop* prev);

struct MiningParams {
  std::size_t b_max = ledger::kDefaultBMax;
  std::vector<std::uint32_t> quantizer_ladder{64, 32, 16, 8, 4, 2, 1};
  double threshold_db = 30.0;
  std::uint32_t chunk_size = storage::kDefaultChunkSize;
  std::size_t challenge_k = storage::kDefaultChallengeCount;
};

struct QuantizerChoice {
  std::uint32_t quantizer = 1;
  std::size_t steps = 0;  // encodings tried
  double mean_psnr_db = 0.0;
};

// Walks the ladder from coarse to fine and keeps the first quantizer whose mean
// PSNR meets the threshold. The ladder must end at 1 so a finite threshold is
// always reachable; a non-finite threshold is a configuration error.
QuantizerChoice search_quantizer(const codec::Gop& gop, const std::vector<std::uint32_t>& ladder,
                                 double threshold_db);

struct Miner {
  NodeId id = 0;
  crypto::KeyPair keys;
  Digest key_seed;  // source of per-GOP content keys
  std::uint64_t seal_counter = 0;

  static Miner create(NodeId id, const Digest& seed);
};

// Services a miner or verifier talks to.
struct Network {
  storage::StorageDirectory& storage;
  storage::CreditLedger& credits;
  const crypto::SymmetricKey& access_key;  // wraps content keys for authorized readers
};

struct SealedGop {
  SubBlock subblock;
  ledger::StorageProofRef proof_ref;
  codec::CompressedGop compressed;
  std::uint64_t ciphertext_size = 0;
  LinkState link_after;
};

// Encrypts each frame payload, places the object with a willing storage node
// (paying ciphertext-size credits), takes a placement storage proof and builds
// the subblock. Throws ConsensusError when no node accepts the object.
SealedGop seal_gop(const GopTransaction& tx, const codec::CompressedGop& compressed,
                   const ledger::QualityClaim& claim, Miner& miner, Network& net,
                   const MiningParams& params);

using SearchCache = std::map<std::pair<std::uint64_t, std::uint64_t>, QuantizerChoice>;

struct ParentView {
  Digest hash;
  std::uint64_t height = 0;
  const ContentState* content = nullptr;
};

struct SkippedGop {
  std::uint64_t video_id = 0;
  std::uint64_t gop_index = 0;
  std::string reason;
};

struct MiningResult {
  Block block;
  std::vector<SealedGop> sealed;
  std::size_t work_steps = 0;
  std::uint64_t pixels = 0;
  ContentState content_after;
  std::vector<SkippedGop> skipped;
};

// Takes up to b_max authentic transactions that extend each video's content
// chain, compresses each at the coarsest passing quantizer, seals them and signs
// the block. Throws ConsensusError when nothing could be mined.
MiningResult mine(const std::vector<GopTransaction>& pending, const MiningParams& params,
                  Miner& miner, Network& net, const ParentView& parent, std::uint64_t timestamp_ms,
                  SearchCache* cache = nullptr);

class VerifierCache {
 public:
  void insert(const GopTransaction& tx);
  // Shares an already authenticated GOP; digest must be its raw_gop_digest.
  void insert(std::uint64_t video_id, std::uint64_t gop_index, std::shared_ptr<const codec::Gop> gop,
              const Digest& digest);
  const codec::Gop* find(std::uint64_t video_id, std::uint64_t gop_index,
                         const Digest& expected) const;
  bool contains(std::uint64_t video_id, std::uint64_t gop_index) const;
  void evict(std::uint64_t video_id, std::uint64_t gop_index);
  std::size_t size() const { return entries_.size(); }
  std::uint64_t bytes() const { return bytes_; }

 private:
  struct Entry {
    std::shared_ptr<const codec::Gop> gop;
    Digest digest;
  };
  std::map<std::pair<std::uint64_t, std::uint64_t>, Entry> entries_;
  std::uint64_t bytes_ = 0;
};

struct VerifyContext {
  const storage::StorageDirectory& storage;
  const crypto::SymmetricKey& access_key;
  double threshold_db = 30.0;
  std::size_t challenge_k = storage::kDefaultChallengeCount;
  std::uint64_t challenge_seed = 0;
  ledger::ChainParams chain_params;
};

struct ContentCheck {
  std::optional<Rejection> rejection;
  std::optional<codec::CompressedGop> content;  // set whenever the payloads could be decrypted
};

// Checks (a), (b), (c) and the embedded chain header for one subblock against
// the raw GOP. Does not look at the video's previous GOP.
ContentCheck check_subblock(const SubBlock& sb, const codec::Gop* raw, const VerifyContext& ctx,
                            std::uint64_t challenge_seed);

// Content key from a subblock's access_privileges; nullopt if it does not unwrap.
std::optional<crypto::SymmetricKey> unwrap_content_key(ByteView access_privileges,
                                                       const crypto::SymmetricKey& access_key);

// Stored object layout: list<bytes> of per-frame ciphertexts, frame i sealed
// under nonce i.
Bytes encrypt_object(const codec::CompressedGop& c, const crypto::SymmetricKey& content_key);

// Decrypts the object named by the subblock; nullopt if anything is missing or
// fails authentication.
std::optional<codec::CompressedGop> open_subblock(const SubBlock& sb,
                                                  const storage::StorageDirectory& storage,
                                                  const crypto::SymmetricKey& access_key);

struct VerifyOutcome {
  std::optional<Rejection> rejection;
  ContentState content_after;
  bool accepted() const { return !rejection.has_value(); }
};

VerifyOutcome verify_block(const Block& block, const VerifierCache& cache, const ParentView& parent,
                           const VerifyContext& ctx);

// Grants the miner the raw byte size of every GOP in the block, once per block.
bool reward(NodeId miner_id, const Block& block, storage::CreditLedger& credits);

// One holding epoch: each live object referenced by the chain accrues
// ceil(size / 1024) pending credits for its storage node.
void accrue_holding(const std::vector<const Block*>& chain, storage::CreditLedger& credits);

// Chain plus the content state after every block.
class ChainState {
 public:
  explicit ChainState(ledger::ChainParams params = {});

  ledger::Chain& chain() { return chain_; }
  const ledger::Chain& chain() const { return chain_; }
  const ContentState* content_at(const Digest& block_hash) const;
  std::optional<ParentView> parent_view(const Digest& block_hash) const;

  // For a block that already passed verify_block against its parent.
  ledger::AppendResult append_verified(const Block& block, ContentState content_after);

 private:
  ledger::Chain chain_;
  std::unordered_map<Digest, ContentState, crypto::DigestHash> content_;
};

}  // namespace cstore::consensus
