#include "cstore/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string_view>
#include <tuple>

#include "cstore/merkle.hpp"

namespace cstore::consensus {

using crypto::Nonce;

namespace {

constexpr std::size_t kWrappedKeySize = 12 + 32 + crypto::kAeadTagSize;

Rejection reject(RejectReason r, std::string detail) { return Rejection{r, std::move(detail)}; }

bool same_psnr(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::fabs(a - b) <= 1e-9;
}

std::uint64_t gop_pixels(const codec::Gop& gop) {
  std::uint64_t n = 0;
  for (const auto& f : gop.frames) n += f.pixel_count();
  return n;
}

Bytes encode_object(const std::vector<Bytes>& frames) {
  wire::Encoder e;
  e.list(frames, [](wire::Encoder& enc, const Bytes& b) { enc.bytes(b); });
  return e.take();
}

std::optional<std::vector<Bytes>> decode_object(ByteView obj) {
  try {
    wire::Decoder d(obj);
    auto frames = d.list<Bytes>([](wire::Decoder& dec) { return dec.bytes(); }, 4);
    d.expect_end();
    return frames;
  } catch (const wire::DecodeError&) {
    return std::nullopt;
  }
}

Nonce wrap_nonce(const crypto::SymmetricKey& k) {
  return Nonce::from_digest(crypto::Hasher().update(as_bytes("cstore/wrap")).update(k.bytes).finish());
}

}  // namespace

std::optional<crypto::SymmetricKey> unwrap_content_key(ByteView access, const crypto::SymmetricKey& access_key) {
  if (access.size() != kWrappedKeySize) return std::nullopt;
  Nonce n;
  std::copy_n(access.begin(), n.bytes.size(), n.bytes.begin());
  auto k = crypto::decrypt(access_key, n, access.subspan(n.bytes.size()));
  if (!k || k->size() != 32) return std::nullopt;
  crypto::SymmetricKey out;
  std::copy(k->begin(), k->end(), out.bytes.begin());
  return out;
}

namespace {

LinkState link_of(const ContentState& s, std::uint64_t video) {
  auto it = s.find(video);
  return it == s.end() ? LinkState{} : it->second;
}

}  // namespace

Digest raw_gop_digest(const codec::Gop& gop) { return crypto::hash(wire::to_bytes(gop)); }

GopTransaction GopTransaction::create(codec::Gop gop, std::uint64_t video_id, Bytes sensor_metadata,
                                      const crypto::KeyPair& initiator) {
  gop.validate();
  GopTransaction tx;
  tx.video_id = video_id;
  tx.gop_index = gop.index;
  tx.timestamp_ms = gop.timestamp_ms;
  tx.sensor_metadata = std::move(sensor_metadata);
  tx.raw_digest = raw_gop_digest(gop);
  tx.gop = std::move(gop);
  tx.initiator_pubkey = initiator.public_key;
  tx.signature = crypto::sign(
      initiator.secret_key, ledger::initiator_signing_payload(tx.video_id, tx.gop_index, tx.timestamp_ms,
                                                              tx.sensor_metadata, tx.raw_digest));
  return tx;
}

bool GopTransaction::authentic() const {
  if (gop.index != gop_index || gop.timestamp_ms != timestamp_ms) return false;
  try {
    gop.validate();
  } catch (const codec::CodecError&) {
    return false;
  }
  if (raw_gop_digest(gop) != raw_digest) return false;
  return crypto::verify_ok(
      initiator_pubkey,
      ledger::initiator_signing_payload(video_id, gop_index, timestamp_ms, sensor_metadata, raw_digest),
      signature);
}

void write(wire::Encoder& e, const GopTransaction& v) {
  write(e, v.gop);
  e.u64(v.video_id);
  e.u64(v.gop_index);
  e.u64(v.timestamp_ms);
  e.bytes(v.sensor_metadata);
  e.digest(v.raw_digest);
  e.bytes(v.initiator_pubkey.bytes);
  e.bytes(v.signature.bytes);
}

void read(wire::Decoder& d, GopTransaction& v) {
  read(d, v.gop);
  v.video_id = d.u64();
  v.gop_index = d.u64();
  v.timestamp_ms = d.u64();
  v.sensor_metadata = d.bytes();
  v.raw_digest = d.digest();
  v.initiator_pubkey.bytes = d.bytes();
  v.signature.bytes = d.bytes();
}

std::pair<Digest, Digest> chain_link_digests(const codec::CompressedGop* prev) {
  if (prev == nullptr) return {Digest::zero(), Digest::zero()};
  return {crypto::hash(prev->i_payload), crypto::hash(prev->last_payload())};
}

QuantizerChoice search_quantizer(const codec::Gop& gop, const std::vector<std::uint32_t>& ladder,
                                 double threshold_db) {
  if (!std::isfinite(threshold_db)) throw ConsensusError("quality threshold must be finite");
  if (ladder.empty()) throw ConsensusError("empty quantizer ladder");
  QuantizerChoice choice;
  for (std::uint32_t q : ladder) {
    auto enc = codec::encode_gop_detailed(gop, q, Digest::zero(), Digest::zero());
    auto rep = codec::quality_of_frames(gop.frames, enc.reconstruction, threshold_db);
    ++choice.steps;
    if (rep.meets_threshold) {
      choice.quantizer = q;
      choice.mean_psnr_db = rep.mean_psnr_db;
      return choice;
    }
  }
  throw ConsensusError("no quantizer on the ladder meets " + std::to_string(threshold_db) + " dB");
}

Bytes encrypt_object(const codec::CompressedGop& c, const crypto::SymmetricKey& content_key) {
  std::vector<Bytes> frames;
  const auto payloads = c.frame_payloads();
  frames.reserve(payloads.size());
  for (std::size_t i = 0; i < payloads.size(); ++i)
    frames.push_back(crypto::encrypt(content_key, Nonce::from_counter(i), payloads[i]));
  return encode_object(frames);
}

Miner Miner::create(NodeId id, const Digest& seed) {
  Miner m;
  m.id = id;
  m.keys = crypto::KeyPair::from_seed(seed);
  m.key_seed = crypto::Hasher().update(as_bytes("cstore/miner-key-seed")).update(seed).finish();
  return m;
}

SealedGop seal_gop(const GopTransaction& tx, const codec::CompressedGop& compressed,
                   const ledger::QualityClaim& claim, Miner& miner, Network& net,
                   const MiningParams& params) {
  const std::uint64_t counter = miner.seal_counter++;
  const Digest kd = crypto::Hasher()
                        .update(as_bytes("cstore/content-key"))
                        .update(miner.key_seed)
                        .update_u64(tx.video_id)
                        .update_u64(tx.gop_index)
                        .update_u64(counter)
                        .finish();
  crypto::SymmetricKey content_key;
  content_key.bytes = kd.bytes;

  Bytes object = encrypt_object(compressed, content_key);
  const auto frames = decode_object(object);
  std::vector<ByteView> views(frames->begin(), frames->end());
  const Digest gop_root = merkle::MerkleTree::from_payloads(views).root();

  const std::uint64_t size = object.size();
  const storage::ContentAddress address = storage::ContentAddress::of(object);

  // Placement order is a per-object shuffle so load spreads across nodes.
  std::vector<std::pair<Digest, storage::StorageNode*>> candidates;
  for (auto& [id, node] : net.storage.nodes()) {
    if (!node.online()) continue;
    if (!node.has(address) && node.available() < size) continue;
    Digest rank = crypto::Hasher()
                      .update(address.digest)
                      .update_u64(miner.id)
                      .update_u64(id)
                      .finish();
    candidates.emplace_back(rank, &node);
  }
  if (candidates.empty()) throw ConsensusError("no storage node accepts " + std::to_string(size) + " bytes");
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  storage::StorageNode& node = *candidates.front().second;

  if (!net.credits.spend(miner.id, size))
    throw ConsensusError("miner " + std::to_string(miner.id) + " lacks credits for " +
                         std::to_string(size) + " bytes");
  node.store(std::move(object));
  const storage::StoredObject* stored = node.object(address);

  ledger::StoragePointer pointer{address.digest, node.id(), stored->tree.root(), size, stored->chunk_size};
  const std::size_t k = std::min<std::uint64_t>(params.challenge_k, stored->chunks());
  const std::uint64_t seed =
      crypto::Hasher().update(as_bytes("cstore/placement")).update(address.digest).update_u64(counter).finish().prefix64();
  auto challenge = storage::make_challenge(address, seed, k, size, stored->chunk_size);
  auto proof = node.respond(challenge);
  if (!storage::verify_storage_proof(pointer.chunk_root, challenge, proof))
    throw ConsensusError("placement proof failed at node " + std::to_string(node.id()));

  const Nonce wn = wrap_nonce(content_key);
  Bytes access(wn.bytes.begin(), wn.bytes.end());
  append(access, crypto::encrypt(net.access_key, wn, content_key.bytes));

  SubBlock draft;
  draft.gop_timestamp_ms = tx.timestamp_ms;
  draft.gop_merkle_root = gop_root;
  draft.access_privileges = std::move(access);
  draft.storage = pointer;
  draft.codec = {std::string(codec::kAlgorithmId), compressed.quantizer, compressed.width,
                 compressed.height, compressed.frame_count};
  draft.quality = claim;
  draft.sensor_metadata = tx.sensor_metadata;
  draft.video_id = tx.video_id;
  draft.gop_index = tx.gop_index;
  draft.raw_gop_digest = tx.raw_digest;
  draft.chain_prev_i = compressed.chain_prev_i;
  draft.chain_prev_last_p = compressed.chain_prev_last_p;
  draft.initiator_pubkey = tx.initiator_pubkey;
  draft.initiator_signature = tx.signature;

  SealedGop out;
  try {
    out.subblock = ledger::make_subblock(std::move(draft), ledger::ChainParams{params.b_max});
  } catch (const ledger::LedgerError& e) {
    throw ConsensusError(e.what());
  }
  out.proof_ref = {address.digest, challenge.nonce, crypto::hash(wire::to_bytes(proof))};
  out.compressed = compressed;
  out.ciphertext_size = size;
  auto [li, lp] = chain_link_digests(&compressed);
  out.link_after = {li, lp, tx.gop_index + 1};
  return out;
}

MiningResult mine(const std::vector<GopTransaction>& pending, const MiningParams& params,
                  Miner& miner, Network& net, const ParentView& parent, std::uint64_t timestamp_ms,
                  SearchCache* cache) {
  if (params.b_max == 0) throw ConsensusError("b_max must be positive");
  MiningResult result;
  result.content_after = parent.content != nullptr ? *parent.content : ContentState{};
  ContentState& state = result.content_after;

  std::vector<std::size_t> order(pending.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = pending[a];
    const auto& y = pending[b];
    return std::tie(x.timestamp_ms, x.video_id, x.gop_index) <
           std::tie(y.timestamp_ms, y.video_id, y.gop_index);
  });

  std::vector<SubBlock> subblocks;
  std::vector<ledger::StorageProofRef> refs;
  for (std::size_t i : order) {
    if (result.sealed.size() >= params.b_max) break;
    const GopTransaction& tx = pending[i];
    if (!tx.authentic()) {
      result.skipped.push_back({tx.video_id, tx.gop_index, "not authentic"});
      continue;
    }
    const LinkState link = link_of(state, tx.video_id);
    if (tx.gop_index != link.next_gop_index) {
      result.skipped.push_back({tx.video_id, tx.gop_index, "does not extend the video's content chain"});
      continue;
    }

    QuantizerChoice choice;
    const auto key = std::make_pair(tx.video_id, tx.gop_index);
    if (cache != nullptr && cache->count(key) != 0) {
      choice = cache->at(key);
    } else {
      choice = search_quantizer(tx.gop, params.quantizer_ladder, params.threshold_db);
      if (cache != nullptr) (*cache)[key] = choice;
    }
    result.work_steps += choice.steps;
    result.pixels += gop_pixels(tx.gop);

    auto enc = codec::encode_gop_detailed(tx.gop, choice.quantizer, link.prev_i, link.prev_last_p);
    auto rep = codec::quality_of_frames(tx.gop.frames, enc.reconstruction, params.threshold_db);
    try {
      SealedGop sealed = seal_gop(tx, enc.compressed, {rep.mean_psnr_db, params.threshold_db}, miner,
                                  net, params);
      state[tx.video_id] = sealed.link_after;
      subblocks.push_back(sealed.subblock);
      refs.push_back(sealed.proof_ref);
      result.sealed.push_back(std::move(sealed));
    } catch (const ConsensusError& e) {
      result.skipped.push_back({tx.video_id, tx.gop_index, e.what()});
    } catch (const storage::StorageError& e) {
      result.skipped.push_back({tx.video_id, tx.gop_index, e.what()});
    }
  }
  if (subblocks.empty()) throw ConsensusError("nothing to mine");
  result.block = ledger::assemble_block(std::move(subblocks), parent.hash, parent.height, miner.id,
                                        miner.keys, timestamp_ms, std::move(refs),
                                        ledger::ChainParams{params.b_max});
  return result;
}

void VerifierCache::insert(const GopTransaction& tx) {
  insert(tx.video_id, tx.gop_index, std::make_shared<const codec::Gop>(tx.gop), raw_gop_digest(tx.gop));
}

void VerifierCache::insert(std::uint64_t video_id, std::uint64_t gop_index,
                           std::shared_ptr<const codec::Gop> gop, const Digest& digest) {
  const auto key = std::make_pair(video_id, gop_index);
  if (entries_.count(key) != 0) return;
  bytes_ += gop->raw_size();
  entries_.emplace(key, Entry{std::move(gop), digest});
}

const codec::Gop* VerifierCache::find(std::uint64_t video_id, std::uint64_t gop_index,
                                      const Digest& expected) const {
  auto it = entries_.find({video_id, gop_index});
  if (it == entries_.end() || it->second.digest != expected) return nullptr;
  return it->second.gop.get();
}

bool VerifierCache::contains(std::uint64_t video_id, std::uint64_t gop_index) const {
  return entries_.count({video_id, gop_index}) != 0;
}

void VerifierCache::evict(std::uint64_t video_id, std::uint64_t gop_index) {
  auto it = entries_.find({video_id, gop_index});
  if (it == entries_.end()) return;
  bytes_ -= it->second.gop->raw_size();
  entries_.erase(it);
}

std::optional<codec::CompressedGop> open_subblock(const SubBlock& sb,
                                                  const storage::StorageDirectory& storage,
                                                  const crypto::SymmetricKey& access_key) {
  const storage::StorageNode* node = storage.find(sb.storage.storage_node);
  if (node == nullptr) return std::nullopt;
  Bytes obj;
  try {
    obj = node->retrieve({sb.storage.address});
  } catch (const storage::StorageError&) {
    return std::nullopt;
  }
  auto frames = decode_object(obj);
  if (!frames || frames->empty()) return std::nullopt;
  auto key = unwrap_content_key(sb.access_privileges, access_key);
  if (!key) return std::nullopt;
  codec::CompressedGop c;
  for (std::size_t i = 0; i < frames->size(); ++i) {
    auto pt = crypto::decrypt(*key, Nonce::from_counter(i), (*frames)[i]);
    if (!pt) return std::nullopt;
    if (i == 0)
      c.i_payload = std::move(*pt);
    else
      c.p_payloads.push_back(std::move(*pt));
  }
  if (c.i_payload.size() < codec::kChainHeaderSize) return std::nullopt;
  std::tie(c.chain_prev_i, c.chain_prev_last_p) = codec::read_chain_header(c.i_payload);
  c.quantizer = sb.codec.quantizer;
  c.width = sb.codec.width;
  c.height = sb.codec.height;
  c.frame_count = static_cast<std::uint32_t>(frames->size());
  return c;
}

ContentCheck check_subblock(const SubBlock& sb, const codec::Gop* raw, const VerifyContext& ctx,
                            std::uint64_t challenge_seed) {
  ContentCheck out;
  auto fail = [&](RejectReason r, std::string why) {
    out.rejection = reject(r, std::move(why));
    return out;
  };
  if (raw == nullptr) return fail(RejectReason::raw_missing, "raw GOP not available");
  const ledger::StoragePointer& p = sb.storage;

  // (a) the named node still holds what the pointer promises
  if (p.chunk_size == 0) return fail(RejectReason::storage_fail, "zero chunk size");
  std::string why;
  if (!ctx.storage.challenge(p, challenge_seed, ctx.challenge_k, &why))
    return fail(RejectReason::storage_fail, why);
  const storage::StorageNode* node = ctx.storage.find(p.storage_node);
  Bytes obj;
  try {
    obj = node->retrieve({p.address});
  } catch (const storage::StorageError& e) {
    return fail(RejectReason::storage_fail, e.what());
  }
  if (obj.size() != p.object_size) return fail(RejectReason::storage_fail, "object size differs from pointer");
  if (storage::chunk_tree(obj, p.chunk_size).root() != p.chunk_root)
    return fail(RejectReason::storage_fail, "chunk root differs from pointer");

  // (b) commitments
  if (crypto::hash(obj) != p.address) return fail(RejectReason::merkle_fail, "object hash differs from address");
  auto frames = decode_object(obj);
  if (!frames || frames->empty()) return fail(RejectReason::merkle_fail, "object is not a frame list");
  std::vector<ByteView> views(frames->begin(), frames->end());
  if (merkle::MerkleTree::from_payloads(views).root() != sb.gop_merkle_root)
    return fail(RejectReason::merkle_fail, "GOP Merkle root mismatch");

  // (c) proof of compression
  if (sb.codec.algorithm_id != codec::kAlgorithmId)
    return fail(RejectReason::quality_fail, "unknown codec " + sb.codec.algorithm_id);
  if (sb.codec.quantizer < 1 || sb.codec.quantizer > 255)
    return fail(RejectReason::quality_fail, "quantizer out of range");
  if (sb.codec.width != raw->width() || sb.codec.height != raw->height() ||
      sb.codec.frame_count != raw->frames.size() || frames->size() != raw->frames.size())
    return fail(RejectReason::quality_fail, "codec parameters do not match the raw GOP");
  if (sb.quality.threshold_db != ctx.threshold_db)
    return fail(RejectReason::quality_fail, "claimed threshold differs from the network threshold");
  auto opened = open_subblock(sb, ctx.storage, ctx.access_key);
  if (!opened) return fail(RejectReason::quality_fail, "payloads do not decrypt");
  out.content = *opened;
  std::vector<codec::Frame> decoded;
  try {
    decoded = codec::decode_gop(*opened);
  } catch (const codec::CodecError& e) {
    return fail(RejectReason::quality_fail, std::string("decode: ") + e.what());
  }
  auto rep = codec::quality_of_frames(raw->frames, decoded, ctx.threshold_db);
  if (!same_psnr(rep.mean_psnr_db, sb.quality.mean_psnr_db))
    return fail(RejectReason::quality_fail, "reported PSNR " + std::to_string(sb.quality.mean_psnr_db) +
                                                " but measured " + std::to_string(rep.mean_psnr_db));
  if (!rep.meets_threshold) return fail(RejectReason::quality_fail, "below quality threshold");

  if (opened->chain_prev_i != sb.chain_prev_i || opened->chain_prev_last_p != sb.chain_prev_last_p)
    return fail(RejectReason::chain_link_fail, "embedded chain header differs from subblock");
  return out;
}

VerifyOutcome verify_block(const Block& block, const VerifierCache& cache, const ParentView& parent,
                           const VerifyContext& ctx) {
  VerifyOutcome out;
  if (block.prev_block_hash != parent.hash) {
    out.rejection = reject(RejectReason::structural, "parent mismatch");
    return out;
  }
  if (auto r = ledger::check_structure(block, parent.height, ctx.chain_params)) {
    out.rejection = std::move(r);
    return out;
  }
  out.content_after = parent.content != nullptr ? *parent.content : ContentState{};
  for (std::size_t i = 0; i < block.subblocks.size(); ++i) {
    const SubBlock& sb = block.subblocks[i];
    const auto where = "subblock " + std::to_string(i) + ": ";
    if (block.storage_proofs[i].address != sb.storage.address) {
      out.rejection = reject(RejectReason::structural, where + "storage proof reference mismatch");
      return out;
    }
    const codec::Gop* raw = cache.find(sb.video_id, sb.gop_index, sb.raw_gop_digest);
    if (raw == nullptr) {
      out.rejection = reject(RejectReason::raw_missing, where + "raw GOP not available");
      return out;
    }
    const std::uint64_t seed = crypto::Hasher()
                                   .update_u64(ctx.challenge_seed)
                                   .update(sb.storage.address)
                                   .update_u64(i)
                                   .finish()
                                   .prefix64();
    auto check = check_subblock(sb, raw, ctx, seed);
    if (check.rejection) {
      out.rejection = reject(check.rejection->reason, where + check.rejection->detail);
      return out;
    }
    const LinkState link = link_of(out.content_after, sb.video_id);
    if (sb.gop_index != link.next_gop_index) {
      out.rejection = reject(RejectReason::chain_link_fail,
                             where + "expected GOP " + std::to_string(link.next_gop_index) + " of video " +
                                 std::to_string(sb.video_id) + ", got " + std::to_string(sb.gop_index));
      return out;
    }
    if (sb.chain_prev_i != link.prev_i || sb.chain_prev_last_p != link.prev_last_p) {
      out.rejection = reject(RejectReason::chain_link_fail, where + "does not link to the previous GOP");
      return out;
    }
    auto [li, lp] = chain_link_digests(&*check.content);
    out.content_after[sb.video_id] = {li, lp, sb.gop_index + 1};
  }
  return out;
}

bool reward(NodeId miner_id, const Block& block, storage::CreditLedger& credits) {
  std::uint64_t amount = 0;
  for (const auto& sb : block.subblocks)
    amount += static_cast<std::uint64_t>(sb.codec.width) * sb.codec.height * sb.codec.frame_count;
  return credits.grant_once(ledger::block_hash(block), miner_id, amount);
}

void accrue_holding(const std::vector<const Block*>& chain, storage::CreditLedger& credits) {
  for (const Block* b : chain)
    for (const auto& sb : b->subblocks)
      credits.accrue_pending(sb.storage.storage_node, sb.storage.address,
                             (sb.storage.object_size + 1023) / 1024);
}

ChainState::ChainState(ledger::ChainParams params) : chain_(params) {
  content_.emplace(chain_.genesis_hash(), ContentState{});
}

const ContentState* ChainState::content_at(const Digest& block_hash) const {
  auto it = content_.find(block_hash);
  return it == content_.end() ? nullptr : &it->second;
}

std::optional<ParentView> ChainState::parent_view(const Digest& block_hash) const {
  auto h = chain_.height_of(block_hash);
  const ContentState* c = content_at(block_hash);
  if (!h || c == nullptr) return std::nullopt;
  return ParentView{block_hash, *h, c};
}

ledger::AppendResult ChainState::append_verified(const Block& block, ContentState content_after) {
  auto r = chain_.validate_and_append(block);
  if (r.status == ledger::AppendStatus::appended) content_.emplace(r.hash, std::move(content_after));
  return r;
}

}  // namespace cstore::consensus
