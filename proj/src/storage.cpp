#include "cstore/storage.hpp"

#include <algorithm>
#include <numeric>

#include "cstore/rng.hpp"

namespace cstore::storage {

std::uint64_t chunk_count(std::uint64_t object_size, std::uint32_t chunk_size) {
  if (chunk_size == 0) throw StorageError(StorageError::Kind::protocol, "chunk size is zero");
  if (object_size == 0) return 1;
  return (object_size + chunk_size - 1) / chunk_size;
}

std::uint64_t chunk_length(std::uint64_t index, std::uint64_t object_size, std::uint32_t chunk_size) {
  const std::uint64_t n = chunk_count(object_size, chunk_size);
  if (index + 1 < n) return chunk_size;
  return object_size - (n - 1) * chunk_size;
}

merkle::MerkleTree chunk_tree(ByteView data, std::uint32_t chunk_size) {
  const std::uint64_t n = chunk_count(data.size(), chunk_size);
  std::vector<Digest> leaves;
  leaves.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t off = i * chunk_size;
    leaves.push_back(crypto::hash(data.subspan(off, chunk_length(i, data.size(), chunk_size))));
  }
  return merkle::MerkleTree(std::move(leaves));
}

StoredObject::StoredObject(Bytes bytes, std::uint32_t cs)
    : data(std::move(bytes)), chunk_size(cs), tree(chunk_tree(data, cs)), missing(tree.leaf_count(), false) {}

ByteView StoredObject::chunk(std::uint64_t index) const {
  return ByteView(data).subspan(index * chunk_size, chunk_length(index, data.size(), chunk_size));
}

bool StoredObject::intact() const {
  return std::none_of(missing.begin(), missing.end(), [](bool m) { return m; });
}

Digest nonce_binding(const Digest& nonce, ByteView chunk) {
  crypto::Hasher h;
  h.update(nonce).update(chunk);
  return h.finish();
}

StorageChallenge make_challenge(const ContentAddress& address, std::uint64_t rng_seed, std::size_t k,
                                std::uint64_t object_size, std::uint32_t chunk_size) {
  const std::uint64_t n = chunk_count(object_size, chunk_size);
  if (k == 0 || k > n) {
    throw StorageError(StorageError::Kind::protocol,
                       "challenge size " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  crypto::Hasher seed_hash;
  seed_hash.update_u64(rng_seed).update(address.digest);
  Rng rng(seed_hash.finish().prefix64());

  StorageChallenge c;
  c.address = address;
  c.object_size = object_size;
  c.chunk_size = chunk_size;
  rng.fill(c.nonce.bytes);
  // Partial Fisher-Yates over [0, n).
  std::vector<std::uint64_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t j = i + rng.below(n - i);
    std::swap(pool[i], pool[j]);
  }
  c.chunk_indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(c.chunk_indices.begin(), c.chunk_indices.end());
  return c;
}

bool verify_storage_proof(const Digest& chunk_root, const StorageChallenge& challenge,
                          const StorageProof& proof) {
  if (proof.address != challenge.address || proof.nonce != challenge.nonce) return false;
  if (proof.responses.size() != challenge.chunk_indices.size()) return false;
  const std::uint64_t n = chunk_count(challenge.object_size, challenge.chunk_size);
  for (std::size_t i = 0; i < proof.responses.size(); ++i) {
    const ChunkResponse& r = proof.responses[i];
    const std::uint64_t idx = challenge.chunk_indices[i];
    if (!r.present || r.index != idx || r.proof.leaf_index != idx) return false;
    if (r.chunk.size() != chunk_length(idx, challenge.object_size, challenge.chunk_size)) return false;
    if (!merkle::verify_proof(chunk_root, crypto::hash(r.chunk), r.proof, n)) return false;
    if (r.binding != nonce_binding(challenge.nonce, r.chunk)) return false;
  }
  return true;
}

StorageNode::StorageNode(NodeId id, std::uint64_t capacity, std::uint32_t chunk_size)
    : id_(id), capacity_(capacity), chunk_size_(chunk_size) {
  if (chunk_size_ == 0) throw StorageError(StorageError::Kind::protocol, "chunk size is zero");
}

ContentAddress StorageNode::store(Bytes ciphertext) {
  ContentAddress address = ContentAddress::of(ciphertext);
  auto it = objects_.find(address.digest);
  if (it != objects_.end()) {
    ++it->second.refs;
    return address;
  }
  if (ciphertext.size() > available()) {
    throw StorageError(StorageError::Kind::capacity,
                       "node " + std::to_string(id_) + " lacks capacity for " +
                           std::to_string(ciphertext.size()) + " bytes");
  }
  used_ += ciphertext.size();
  objects_.emplace(address.digest, StoredObject(std::move(ciphertext), chunk_size_));
  return address;
}

const StoredObject* StorageNode::object(const ContentAddress& address) const {
  auto it = objects_.find(address.digest);
  return it == objects_.end() ? nullptr : &it->second;
}

Bytes StorageNode::retrieve(const ContentAddress& address) const {
  const StoredObject* obj = object(address);
  if (obj == nullptr || !obj->intact()) {
    throw StorageError(StorageError::Kind::not_found, "object " + address.digest.hex() + " not found");
  }
  return obj->data;
}

StorageProof StorageNode::respond(const StorageChallenge& challenge) const {
  const StoredObject* obj = object(challenge.address);
  if (obj == nullptr) {
    throw StorageError(StorageError::Kind::not_found,
                       "object " + challenge.address.digest.hex() + " not found");
  }
  StorageProof proof;
  proof.address = challenge.address;
  proof.nonce = challenge.nonce;
  for (std::uint64_t idx : challenge.chunk_indices) {
    if (idx >= obj->chunks()) {
      throw StorageError(StorageError::Kind::protocol, "chunk index " + std::to_string(idx) + " out of range");
    }
    ChunkResponse r;
    r.index = idx;
    if (!obj->missing[idx]) {
      r.present = true;
      auto c = obj->chunk(idx);
      r.chunk.assign(c.begin(), c.end());
      r.proof = obj->tree.prove(idx);
      r.binding = nonce_binding(challenge.nonce, r.chunk);
    }
    proof.responses.push_back(std::move(r));
  }
  return proof;
}

StoredObject& StorageNode::mutable_object(const ContentAddress& address) {
  auto it = objects_.find(address.digest);
  if (it == objects_.end()) {
    throw StorageError(StorageError::Kind::not_found, "object " + address.digest.hex() + " not found");
  }
  return it->second;
}

bool StorageNode::drop_object(const ContentAddress& address) {
  auto it = objects_.find(address.digest);
  if (it == objects_.end()) return false;
  used_ -= it->second.data.size();
  objects_.erase(it);
  return true;
}

void StorageNode::drop_chunks(const ContentAddress& address, const std::vector<std::uint64_t>& indices) {
  StoredObject& obj = mutable_object(address);
  for (auto i : indices) {
    if (i >= obj.missing.size()) throw StorageError(StorageError::Kind::protocol, "chunk index out of range");
    obj.missing[i] = true;
  }
}

void StorageNode::flip_byte(const ContentAddress& address, std::uint64_t offset, std::uint8_t mask) {
  StoredObject& obj = mutable_object(address);
  if (offset >= obj.data.size()) throw StorageError(StorageError::Kind::protocol, "byte offset out of range");
  obj.data[offset] ^= mask;
}

void StorageNode::replace_object(const ContentAddress& address, Bytes data) {
  StoredObject& obj = mutable_object(address);
  used_ = used_ - obj.data.size() + data.size();
  const std::uint32_t refs = obj.refs;
  obj = StoredObject(std::move(data), chunk_size_);
  obj.refs = refs;
}

void StorageNode::restore(const Digest& address, StoredObject object) {
  auto it = objects_.find(address);
  if (it != objects_.end()) used_ -= it->second.data.size();
  used_ += object.data.size();
  objects_.insert_or_assign(address, std::move(object));
}

StorageNode& StorageDirectory::add(StorageNode node) {
  const NodeId id = node.id();
  auto [it, inserted] = nodes_.emplace(id, std::move(node));
  if (!inserted) throw StorageError(StorageError::Kind::protocol, "duplicate storage node id");
  return it->second;
}

StorageNode* StorageDirectory::find(NodeId id) {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

const StorageNode* StorageDirectory::find(NodeId id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

StorageNode& StorageDirectory::at(NodeId id) {
  StorageNode* n = find(id);
  if (n == nullptr) throw StorageError(StorageError::Kind::not_found, "no storage node " + std::to_string(id));
  return *n;
}

bool StorageDirectory::challenge(const ledger::StoragePointer& pointer, std::uint64_t rng_seed,
                                 std::size_t k, std::string* detail) const {
  auto fail = [&](std::string why) {
    if (detail != nullptr) *detail = std::move(why);
    return false;
  };
  const StorageNode* node = find(pointer.storage_node);
  if (node == nullptr || !node->online()) return fail("storage node unreachable");
  try {
    const std::uint64_t n = chunk_count(pointer.object_size, pointer.chunk_size);
    auto ch = make_challenge({pointer.address}, rng_seed, std::min<std::uint64_t>(k, n),
                             pointer.object_size, pointer.chunk_size);
    auto proof = node->respond(ch);
    if (!verify_storage_proof(pointer.chunk_root, ch, proof)) return fail("storage proof rejected");
  } catch (const StorageError& e) {
    return fail(e.what());
  }
  return true;
}

void CreditLedger::grant(NodeId node, std::uint64_t amount) {
  balances_[node] += amount;
  granted_ += amount;
}

bool CreditLedger::grant_once(const Digest& key, NodeId node, std::uint64_t amount) {
  if (!granted_keys_.insert(key).second) return false;
  grant(node, amount);
  return true;
}

bool CreditLedger::spend(NodeId node, std::uint64_t amount) {
  auto it = balances_.find(node);
  const std::uint64_t have = it == balances_.end() ? 0 : it->second;
  if (have < amount) return false;
  if (amount == 0) return true;
  it->second -= amount;
  spent_ += amount;
  return true;
}

std::uint64_t CreditLedger::balance(NodeId node) const {
  auto it = balances_.find(node);
  return it == balances_.end() ? 0 : it->second;
}

void CreditLedger::accrue_pending(NodeId node, const Digest& object, std::uint64_t amount) {
  pending_[node][object] += amount;
}

std::uint64_t CreditLedger::pending(NodeId node) const {
  auto it = pending_.find(node);
  if (it == pending_.end()) return 0;
  std::uint64_t sum = 0;
  for (const auto& [obj, amount] : it->second) sum += amount;
  return sum;
}

std::uint64_t CreditLedger::settle(NodeId node) {
  const std::uint64_t amount = pending(node);
  pending_.erase(node);
  if (amount > 0) grant(node, amount);
  return amount;
}

std::uint64_t CreditLedger::settle_all() {
  std::uint64_t total = 0;
  std::vector<NodeId> ids;
  for (const auto& [id, m] : pending_) ids.push_back(id);
  for (NodeId id : ids) total += settle(id);
  return total;
}

std::uint64_t CreditLedger::forfeit(NodeId node, const Digest& object) {
  auto it = pending_.find(node);
  if (it == pending_.end()) return 0;
  auto jt = it->second.find(object);
  if (jt == it->second.end()) return 0;
  const std::uint64_t amount = jt->second;
  it->second.erase(jt);
  forfeited_ += amount;
  return amount;
}

AuditReport audit_round(Auditor& auditor, const std::vector<const ledger::Block*>& chain,
                        const StorageDirectory& directory, CreditLedger* credits) {
  struct Ref {
    const ledger::Block* block;
    std::size_t index;
  };
  std::vector<Ref> refs;
  for (const ledger::Block* b : chain) {
    for (std::size_t i = 0; i < b->subblocks.size(); ++i) refs.push_back({b, i});
  }
  AuditReport report;
  report.round = auditor.round;
  Rng rng = Rng::derive(auditor.seed, "audit-round", auditor.round);
  ++auditor.round;
  if (refs.empty()) return report;

  const std::size_t s = std::min(auditor.samples_per_round, refs.size());
  for (std::size_t i = 0; i < s; ++i) {
    const std::uint64_t j = i + rng.below(refs.size() - i);
    std::swap(refs[i], refs[j]);
  }
  std::set<NodeId> flagged;
  for (std::size_t i = 0; i < s; ++i) {
    const auto& sb = refs[i].block->subblocks[refs[i].index];
    AuditSample sample;
    sample.height = refs[i].block->height;
    sample.subblock_index = refs[i].index;
    sample.video_id = sb.video_id;
    sample.gop_index = sb.gop_index;
    sample.address = sb.storage.address;
    sample.node = sb.storage.storage_node;
    sample.passed = directory.challenge(sb.storage, rng.next(), auditor.challenge_k, &sample.detail);
    if (!sample.passed) {
      ++report.failures;
      flagged.insert(sample.node);
      if (credits != nullptr) report.forfeited += credits->forfeit(sample.node, sample.address);
    }
    report.samples.push_back(std::move(sample));
  }
  report.flagged_nodes.assign(flagged.begin(), flagged.end());
  return report;
}

void write(wire::Encoder& e, const StorageChallenge& v) {
  e.digest(v.address.digest);
  e.digest(v.nonce);
  e.list(v.chunk_indices, [](wire::Encoder& enc, std::uint64_t i) { enc.u64(i); });
  e.u64(v.object_size);
  e.u32(v.chunk_size);
}

void read(wire::Decoder& d, StorageChallenge& v) {
  v.address.digest = d.digest();
  v.nonce = d.digest();
  v.chunk_indices = d.list<std::uint64_t>([](wire::Decoder& dec) { return dec.u64(); }, 8);
  v.object_size = d.u64();
  v.chunk_size = d.u32();
}

void write(wire::Encoder& e, const StorageProof& v) {
  e.digest(v.address.digest);
  e.digest(v.nonce);
  e.list(v.responses, [](wire::Encoder& enc, const ChunkResponse& r) {
    enc.u64(r.index);
    enc.boolean(r.present);
    enc.bytes(r.chunk);
    write(enc, r.proof);
    enc.digest(r.binding);
  });
}

void read(wire::Decoder& d, StorageProof& v) {
  v.address.digest = d.digest();
  v.nonce = d.digest();
  v.responses = d.list<ChunkResponse>(
      [](wire::Decoder& dec) {
        ChunkResponse r;
        r.index = dec.u64();
        r.present = dec.boolean();
        r.chunk = dec.bytes();
        read(dec, r.proof);
        r.binding = dec.digest();
        return r;
      },
      57);
}

void write(wire::Encoder& e, const StorageDirectory& v) {
  e.count(v.nodes().size());
  for (const auto& [id, node] : v.nodes()) {
    e.u32(id);
    e.u64(node.capacity());
    e.u32(node.chunk_size());
    e.boolean(node.online());
    e.count(node.objects().size());
    for (const auto& [addr, obj] : node.objects()) {
      e.digest(addr);
      e.u32(obj.refs);
      e.bytes(obj.data);
      std::vector<std::uint64_t> lost;
      for (std::size_t i = 0; i < obj.missing.size(); ++i) {
        if (obj.missing[i]) lost.push_back(i);
      }
      e.list(lost, [](wire::Encoder& enc, std::uint64_t i) { enc.u64(i); });
    }
  }
}

void read(wire::Decoder& d, StorageDirectory& v) {
  const std::size_t n_nodes = d.count(21);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const NodeId id = d.u32();
    const std::uint64_t capacity = d.u64();
    const std::uint32_t chunk_size = d.u32();
    if (chunk_size == 0) throw wire::DecodeError("zero chunk size");
    StorageNode node(id, capacity, chunk_size);
    node.set_online(d.boolean());
    const std::size_t n_objects = d.count(44);
    for (std::size_t j = 0; j < n_objects; ++j) {
      const Digest addr = d.digest();
      const std::uint32_t refs = d.u32();
      StoredObject obj(d.bytes(), chunk_size);
      obj.refs = refs;
      auto lost = d.list<std::uint64_t>([](wire::Decoder& dec) { return dec.u64(); }, 8);
      for (auto li : lost) {
        if (li >= obj.missing.size()) throw wire::DecodeError("lost chunk index out of range");
        obj.missing[li] = true;
      }
      node.restore(addr, std::move(obj));
    }
    v.add(std::move(node));
  }
}

}  // namespace cstore::storage
