#include "cstore/ledger.hpp"

#include <algorithm>

#include "cstore/merkle.hpp"

namespace cstore::ledger {

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::structural: return "structural";
    case RejectReason::signature_fail: return "signature-fail";
    case RejectReason::storage_fail: return "storage-fail";
    case RejectReason::merkle_fail: return "merkle-fail";
    case RejectReason::quality_fail: return "quality-fail";
    case RejectReason::chain_link_fail: return "chain-link-fail";
    case RejectReason::raw_missing: return "raw-missing";
  }
  return "unknown";
}

Bytes initiator_signing_payload(std::uint64_t video_id, std::uint64_t gop_index,
                                std::uint64_t timestamp_ms, ByteView sensor_metadata,
                                const Digest& raw_gop_digest) {
  wire::Encoder e;
  e.str("cstore/gop-tx/1");
  e.u64(video_id);
  e.u64(gop_index);
  e.u64(timestamp_ms);
  e.bytes(sensor_metadata);
  e.digest(raw_gop_digest);
  return e.take();
}

Bytes initiator_signing_payload(const SubBlock& sb) {
  return initiator_signing_payload(sb.video_id, sb.gop_index, sb.gop_timestamp_ms,
                                   sb.sensor_metadata, sb.raw_gop_digest);
}

bool initiator_signature_ok(const SubBlock& sb) {
  return crypto::verify_ok(sb.initiator_pubkey, initiator_signing_payload(sb),
                           sb.initiator_signature);
}

void write(wire::Encoder& e, const StoragePointer& v) {
  e.digest(v.address);
  e.u32(v.storage_node);
  e.digest(v.chunk_root);
  e.u64(v.object_size);
  e.u32(v.chunk_size);
}

void read(wire::Decoder& d, StoragePointer& v) {
  v.address = d.digest();
  v.storage_node = d.u32();
  v.chunk_root = d.digest();
  v.object_size = d.u64();
  v.chunk_size = d.u32();
}

void write(wire::Encoder& e, const CodecParams& v) {
  e.str(v.algorithm_id);
  e.u32(v.quantizer);
  e.u32(v.width);
  e.u32(v.height);
  e.u32(v.frame_count);
}

void read(wire::Decoder& d, CodecParams& v) {
  v.algorithm_id = d.str();
  v.quantizer = d.u32();
  v.width = d.u32();
  v.height = d.u32();
  v.frame_count = d.u32();
}

void write(wire::Encoder& e, const QualityClaim& v) {
  e.f64(v.mean_psnr_db);
  e.f64(v.threshold_db);
}

void read(wire::Decoder& d, QualityClaim& v) {
  v.mean_psnr_db = d.f64();
  v.threshold_db = d.f64();
}

void write(wire::Encoder& e, const SubBlock& v) {
  e.u64(v.gop_timestamp_ms);
  e.digest(v.gop_merkle_root);
  e.bytes(v.access_privileges);
  write(e, v.storage);
  write(e, v.codec);
  write(e, v.quality);
  e.bytes(v.sensor_metadata);
  e.u64(v.video_id);
  e.u64(v.gop_index);
  e.digest(v.raw_gop_digest);
  e.digest(v.chain_prev_i);
  e.digest(v.chain_prev_last_p);
  e.bytes(v.initiator_pubkey.bytes);
  e.bytes(v.initiator_signature.bytes);
}

void read(wire::Decoder& d, SubBlock& v) {
  v.gop_timestamp_ms = d.u64();
  v.gop_merkle_root = d.digest();
  v.access_privileges = d.bytes();
  read(d, v.storage);
  read(d, v.codec);
  read(d, v.quality);
  v.sensor_metadata = d.bytes();
  v.video_id = d.u64();
  v.gop_index = d.u64();
  v.raw_gop_digest = d.digest();
  v.chain_prev_i = d.digest();
  v.chain_prev_last_p = d.digest();
  v.initiator_pubkey.bytes = d.bytes();
  v.initiator_signature.bytes = d.bytes();
}

void write(wire::Encoder& e, const StorageProofRef& v) {
  e.digest(v.address);
  e.digest(v.nonce);
  e.digest(v.proof_digest);
}

void read(wire::Decoder& d, StorageProofRef& v) {
  v.address = d.digest();
  v.nonce = d.digest();
  v.proof_digest = d.digest();
}

namespace {

void write_unsigned(wire::Encoder& e, const Block& v) {
  e.digest(v.prev_block_hash);
  e.u64(v.height);
  e.u64(v.timestamp_ms);
  e.list(v.subblocks, [](wire::Encoder& enc, const SubBlock& sb) { write(enc, sb); });
  e.digest(v.block_merkle_root);
  e.u32(v.miner_id);
  e.bytes(v.miner_pubkey.bytes);
  e.list(v.storage_proofs, [](wire::Encoder& enc, const StorageProofRef& r) { write(enc, r); });
}

Digest subblock_root(const std::vector<SubBlock>& subblocks) {
  std::vector<Digest> roots;
  roots.reserve(subblocks.size());
  for (const auto& sb : subblocks) roots.push_back(sb.gop_merkle_root);
  return merkle::block_root(roots);
}

}  // namespace

void write(wire::Encoder& e, const Block& v) {
  write_unsigned(e, v);
  e.bytes(v.miner_signature.bytes);
}

void read(wire::Decoder& d, Block& v) {
  v.prev_block_hash = d.digest();
  v.height = d.u64();
  v.timestamp_ms = d.u64();
  v.subblocks = d.list<SubBlock>(
      [](wire::Decoder& dec) {
        SubBlock sb;
        read(dec, sb);
        return sb;
      },
      64);
  v.block_merkle_root = d.digest();
  v.miner_id = d.u32();
  v.miner_pubkey.bytes = d.bytes();
  v.storage_proofs = d.list<StorageProofRef>(
      [](wire::Decoder& dec) {
        StorageProofRef r;
        read(dec, r);
        return r;
      },
      96);
  v.miner_signature.bytes = d.bytes();
}

Bytes block_signing_payload(const Block& b) {
  wire::Encoder e;
  write_unsigned(e, b);
  return e.take();
}

Digest block_hash(const Block& b) { return crypto::hash(block_signing_payload(b)); }

const Block& genesis_block() {
  static const Block genesis = [] {
    Block g;
    g.height = 0;
    g.timestamp_ms = 0;
    return g;
  }();
  return genesis;
}

SubBlock make_subblock(SubBlock draft, const ChainParams& params) {
  if (!initiator_signature_ok(draft)) throw LedgerError("subblock initiator signature invalid");
  const std::size_t size = wire::to_bytes(draft).size();
  if (size > params.max_subblock_size) {
    throw LedgerError("subblock encodes to " + std::to_string(size) + " bytes, limit " +
                      std::to_string(params.max_subblock_size));
  }
  return draft;
}

Block assemble_block(std::vector<SubBlock> subblocks, const Digest& prev_hash,
                     std::uint64_t prev_height, NodeId miner_id, const crypto::KeyPair& miner_keys,
                     std::uint64_t timestamp_ms, std::vector<StorageProofRef> storage_proofs,
                     const ChainParams& params) {
  if (subblocks.empty()) throw LedgerError("block needs at least one subblock");
  if (subblocks.size() > params.b_max) {
    throw LedgerError("block has " + std::to_string(subblocks.size()) + " subblocks, B_max " +
                      std::to_string(params.b_max));
  }
  if (storage_proofs.size() != subblocks.size()) {
    throw LedgerError("one storage proof reference per subblock required");
  }
  for (const auto& sb : subblocks) {
    if (!initiator_signature_ok(sb)) throw LedgerError("subblock initiator signature invalid");
  }
  Block b;
  b.prev_block_hash = prev_hash;
  b.height = prev_height + 1;
  b.timestamp_ms = timestamp_ms;
  b.block_merkle_root = subblock_root(subblocks);
  b.subblocks = std::move(subblocks);
  b.miner_id = miner_id;
  b.miner_pubkey = miner_keys.public_key;
  b.storage_proofs = std::move(storage_proofs);
  b.miner_signature = crypto::sign(miner_keys.secret_key, block_signing_payload(b));
  return b;
}

std::optional<Rejection> check_structure(const Block& b, std::uint64_t parent_height,
                                         const ChainParams& params) {
  if (b.height != parent_height + 1) {
    return Rejection{RejectReason::structural, "height " + std::to_string(b.height) +
                                                   " does not follow parent " +
                                                   std::to_string(parent_height)};
  }
  if (b.subblocks.empty() || b.subblocks.size() > params.b_max) {
    return Rejection{RejectReason::structural,
                     "subblock count " + std::to_string(b.subblocks.size()) + " outside [1, B_max]"};
  }
  if (b.storage_proofs.size() != b.subblocks.size()) {
    return Rejection{RejectReason::structural, "storage proof count mismatch"};
  }
  for (std::size_t i = 0; i < b.subblocks.size(); ++i) {
    if (wire::to_bytes(b.subblocks[i]).size() > params.max_subblock_size) {
      return Rejection{RejectReason::structural, "subblock " + std::to_string(i) + " oversize"};
    }
  }
  if (!crypto::verify_ok(b.miner_pubkey, block_signing_payload(b), b.miner_signature)) {
    return Rejection{RejectReason::signature_fail, "miner signature invalid"};
  }
  for (std::size_t i = 0; i < b.subblocks.size(); ++i) {
    if (!initiator_signature_ok(b.subblocks[i])) {
      return Rejection{RejectReason::signature_fail,
                       "initiator signature invalid on subblock " + std::to_string(i)};
    }
  }
  if (subblock_root(b.subblocks) != b.block_merkle_root) {
    return Rejection{RejectReason::merkle_fail, "block Merkle root mismatch"};
  }
  return std::nullopt;
}

Chain::Chain(ChainParams params) : params_(params) {
  const Block& g = genesis_block();
  genesis_hash_ = block_hash(g);
  entries_.emplace(genesis_hash_, Entry{g});
  tips_.insert(genesis_hash_);
}

const Block* Chain::find(const Digest& h) const {
  auto it = entries_.find(h);
  return it == entries_.end() ? nullptr : &it->second.block;
}

std::optional<std::uint64_t> Chain::height_of(const Digest& h) const {
  auto it = entries_.find(h);
  if (it == entries_.end()) return std::nullopt;
  return it->second.block.height;
}

AppendResult Chain::validate_and_append(const Block& block) {
  AppendResult result;
  result.hash = block_hash(block);
  if (entries_.count(result.hash) != 0) {
    result.status = AppendStatus::duplicate;
    return result;
  }
  auto parent = entries_.find(block.prev_block_hash);
  if (parent == entries_.end()) {
    orphans_[block.prev_block_hash].emplace(result.hash, block);
    result.status = AppendStatus::orphaned;
    return result;
  }
  if (auto rej = check_structure(block, parent->second.block.height, params_)) {
    result.status = AppendStatus::rejected;
    result.rejection = std::move(rej);
    return result;
  }
  entries_.emplace(result.hash, Entry{block});
  tips_.erase(block.prev_block_hash);
  tips_.insert(result.hash);
  result.status = AppendStatus::appended;
  return result;
}

Digest Chain::tip() const {
  const Digest* best = nullptr;
  std::uint64_t best_height = 0;
  // tips_ is ordered by hash, so the first of the tallest is the tie-break winner.
  for (const auto& t : tips_) {
    const std::uint64_t h = entries_.at(t).block.height;
    if (best == nullptr || h > best_height) {
      best = &t;
      best_height = h;
    }
  }
  return *best;
}

std::vector<const Block*> Chain::path_to(const Digest& h) const {
  std::vector<const Block*> out;
  auto it = entries_.find(h);
  while (it != entries_.end()) {
    out.push_back(&it->second.block);
    if (it->first == genesis_hash_) break;
    it = entries_.find(it->second.block.prev_block_hash);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

bool Chain::is_ancestor(const Digest& ancestor, const Digest& descendant) const {
  auto a = entries_.find(ancestor);
  if (a == entries_.end()) return false;
  const std::uint64_t target = a->second.block.height;
  Digest cur = descendant;
  while (true) {
    auto it = entries_.find(cur);
    if (it == entries_.end()) return false;
    if (it->second.block.height < target) return false;
    if (cur == ancestor) return true;
    if (cur == genesis_hash_) return false;
    cur = it->second.block.prev_block_hash;
  }
}

std::vector<Block> Chain::take_orphans_of(const Digest& parent) {
  std::vector<Block> out;
  auto it = orphans_.find(parent);
  if (it == orphans_.end()) return out;
  for (auto& [h, b] : it->second) out.push_back(std::move(b));
  orphans_.erase(it);
  return out;
}

std::size_t Chain::orphan_count() const {
  std::size_t n = 0;
  for (const auto& [p, m] : orphans_) n += m.size();
  return n;
}

Digest fork_choice(const Chain& chain) { return chain.tip(); }

Bytes dump_blocks(const std::vector<const Block*>& blocks) {
  wire::Encoder e;
  for (const Block* b : blocks) e.bytes(wire::to_bytes(*b));
  return e.take();
}

std::vector<Block> load_blocks(ByteView stream) {
  wire::Decoder d(stream);
  std::vector<Block> out;
  while (!d.done()) {
    Bytes one = d.bytes();
    out.push_back(wire::from_bytes<Block>(one));
  }
  return out;
}

}  // namespace cstore::ledger
