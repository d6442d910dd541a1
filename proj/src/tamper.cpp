#include "cstore/tamper.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

#include "cstore/consensus.hpp"

namespace cstore::netsim {

using ledger::RejectReason;

nlohmann::json DetectionReport::to_json() const {
  nlohmann::json j;
  j["blocks_checked"] = blocks_checked;
  j["subblocks_checked"] = subblocks_checked;
  j["clean"] = clean();
  j["flags"] = nlohmann::json::array();
  for (const auto& f : flags) {
    nlohmann::json e;
    e["height"] = f.height;
    e["subblock"] = f.subblock ? nlohmann::json(*f.subblock) : nlohmann::json(nullptr);
    if (f.subblock) {
      e["video_id"] = f.video_id;
      e["gop_index"] = f.gop_index;
    }
    e["reason"] = std::string(ledger::to_string(f.reason));
    e["inherited"] = f.inherited;
    e["detail"] = f.detail;
    j["flags"].push_back(std::move(e));
  }
  return j;
}

std::string DetectionReport::to_text() const {
  std::ostringstream o;
  o << "checked " << blocks_checked << " blocks, " << subblocks_checked << " subblocks\n";
  if (clean()) {
    o << "clean\n";
    return o.str();
  }
  for (const auto& f : flags) {
    o << "height " << f.height;
    if (f.subblock) o << " subblock " << *f.subblock << " video " << f.video_id << " gop " << f.gop_index;
    else o << " block";
    o << ' ' << ledger::to_string(f.reason) << (f.inherited ? " inherited" : "") << ": " << f.detail << '\n';
  }
  return o.str();
}

namespace {

struct VideoTrack {
  std::optional<std::pair<crypto::Digest, crypto::Digest>> actual_link;
  bool tainted = false;
};

}  // namespace

DetectionReport detect_tampering(const RunData& run) {
  DetectionReport report;
  const Scenario& s = run.scenario;
  const ledger::ChainParams params{s.b_max};
  crypto::Digest prev_hash = ledger::block_hash(ledger::genesis_block());
  std::uint64_t prev_height = 0;
  std::optional<std::pair<std::uint64_t, RejectReason>> broken;
  std::map<std::uint64_t, VideoTrack> videos;

  consensus::VerifyContext ctx{run.storage, run.access_key, s.threshold_db,
                               std::numeric_limits<std::size_t>::max(), 0, params};

  for (const ledger::Block& b : run.blocks) {
    ++report.blocks_checked;
    if (broken) {
      report.flags.push_back({b.height, std::nullopt, 0, 0, broken->second, true,
                              "descends from the block at height " + std::to_string(broken->first)});
    } else {
      std::optional<ledger::Rejection> r;
      if (b.prev_block_hash != prev_hash)
        r = ledger::Rejection{RejectReason::structural, "previous block hash mismatch"};
      else
        r = ledger::check_structure(b, prev_height, params);
      if (r) {
        report.flags.push_back({b.height, std::nullopt, 0, 0, r->reason, false, r->detail});
        broken = std::make_pair(b.height, r->reason);
      }
    }
    prev_hash = ledger::block_hash(b);
    prev_height = b.height;

    for (std::size_t i = 0; i < b.subblocks.size(); ++i) {
      const ledger::SubBlock& sb = b.subblocks[i];
      ++report.subblocks_checked;
      std::optional<codec::Gop> raw;
      if (sb.video_id < s.initiators) {
        raw = scenario_gop(s, static_cast<std::uint32_t>(sb.video_id), sb.gop_index);
        if (consensus::raw_gop_digest(*raw) != sb.raw_gop_digest) raw.reset();
      }
      VideoTrack& track = videos[sb.video_id];
      auto opened = consensus::open_subblock(sb, run.storage, run.access_key);

      std::optional<ledger::Rejection> r;
      bool breaks_content_chain = false;
      if (!ledger::initiator_signature_ok(sb)) {
        r = ledger::Rejection{RejectReason::signature_fail, "initiator signature invalid"};
      } else {
        const std::uint64_t seed = crypto::Hasher().update(sb.storage.address).update_u64(i).finish().prefix64();
        r = consensus::check_subblock(sb, raw ? &*raw : nullptr, ctx, seed).rejection;
      }
      if (!r && track.actual_link && opened &&
          (opened->chain_prev_i != track.actual_link->first ||
           opened->chain_prev_last_p != track.actual_link->second)) {
        r = ledger::Rejection{RejectReason::chain_link_fail, "content does not chain to the previous GOP"};
        breaks_content_chain = true;
      }

      if (r) {
        report.flags.push_back({b.height, i, sb.video_id, sb.gop_index, r->reason, false, r->detail});
        if (breaks_content_chain) track.tainted = true;
      } else if (track.tainted) {
        report.flags.push_back({b.height, i, sb.video_id, sb.gop_index, RejectReason::chain_link_fail, true,
                                "descends from a GOP whose content chain is broken"});
      }
      track.actual_link.reset();
      if (opened) track.actual_link = consensus::chain_link_digests(&*opened);
    }
  }
  return report;
}

void flip_stored_byte(RunData& run, const crypto::Digest& address, std::uint64_t offset, std::uint8_t mask) {
  if (mask == 0) throw TamperError("flip mask is zero");
  for (auto& [id, node] : run.storage.nodes()) {
    const storage::StoredObject* obj = node.object({address});
    if (obj == nullptr) continue;
    if (offset >= obj->data.size())
      throw TamperError("offset " + std::to_string(offset) + " is past the end of a " +
                        std::to_string(obj->data.size()) + "-byte object");
    node.flip_byte({address}, offset, mask);
    return;
  }
  throw TamperError("no storage node holds " + address.hex());
}

void replace_gop(RunData& run, std::uint64_t video_id, std::uint64_t gop_index) {
  const ledger::SubBlock* target = nullptr;
  for (const auto& b : run.blocks)
    for (const auto& sb : b.subblocks)
      if (sb.video_id == video_id && sb.gop_index == gop_index) target = &sb;
  if (target == nullptr)
    throw TamperError("GOP " + std::to_string(gop_index) + " of video " + std::to_string(video_id) +
                      " is not on the chain");
  if (video_id >= run.scenario.initiators) throw TamperError("unknown video " + std::to_string(video_id));
  auto key = consensus::unwrap_content_key(target->access_privileges, run.access_key);
  auto opened = consensus::open_subblock(*target, run.storage, run.access_key);
  if (!key || !opened) throw TamperError("target GOP cannot be opened");

  codec::Gop altered = scenario_gop(run.scenario, static_cast<std::uint32_t>(video_id), gop_index);
  for (auto& f : altered.frames)
    for (auto& v : f.samples) v = static_cast<std::uint8_t>(255 - v);
  auto variant = codec::encode_gop(altered, target->codec.quantizer, opened->chain_prev_i, opened->chain_prev_last_p);
  storage::StorageNode* node = run.storage.find(target->storage.storage_node);
  if (node == nullptr || !node->has({target->storage.address})) throw TamperError("target object is not stored");
  node->replace_object({target->storage.address}, consensus::encrypt_object(variant, *key));
}

const std::vector<std::string_view>& subblock_fields() {
  static const std::vector<std::string_view> fields{
      "gop_timestamp_ms",   "gop_merkle_root",    "access_privileges", "storage.address",
      "storage.node",       "storage.chunk_root", "storage.object_size", "storage.chunk_size",
      "codec.algorithm_id", "codec.quantizer",    "codec.width",       "codec.height",
      "codec.frame_count",  "quality.mean_psnr_db", "quality.threshold_db", "sensor_metadata",
      "video_id",           "gop_index",          "raw_gop_digest",    "chain_prev_i",
      "chain_prev_last_p",  "initiator_pubkey",   "initiator_signature"};
  return fields;
}

namespace {

void flip_digest(crypto::Digest& d, std::uint64_t variant) { d.bytes[variant % d.bytes.size()] ^= 0x01; }

void flip_bytes(Bytes& b, std::uint64_t variant) {
  if (b.empty()) b.push_back(0x01);
  else b[variant % b.size()] ^= 0x01;
}

}  // namespace

void mutate_field(ledger::SubBlock& sb, std::string_view field, std::uint64_t variant) {
  const std::uint32_t delta = static_cast<std::uint32_t>(variant % 3) + 1;
  if (field == "gop_timestamp_ms") sb.gop_timestamp_ms += delta;
  else if (field == "gop_merkle_root") flip_digest(sb.gop_merkle_root, variant);
  else if (field == "access_privileges") flip_bytes(sb.access_privileges, variant);
  else if (field == "storage.address") flip_digest(sb.storage.address, variant);
  else if (field == "storage.node") sb.storage.storage_node += delta;
  else if (field == "storage.chunk_root") flip_digest(sb.storage.chunk_root, variant);
  else if (field == "storage.object_size") sb.storage.object_size += delta;
  else if (field == "storage.chunk_size") sb.storage.chunk_size = sb.storage.chunk_size / 2 + delta;
  else if (field == "codec.algorithm_id") sb.codec.algorithm_id += "x";
  else if (field == "codec.quantizer") sb.codec.quantizer += delta;
  else if (field == "codec.width") sb.codec.width += delta;
  else if (field == "codec.height") sb.codec.height += delta;
  else if (field == "codec.frame_count") sb.codec.frame_count += delta;
  else if (field == "quality.mean_psnr_db") sb.quality.mean_psnr_db += 0.5 * delta;
  else if (field == "quality.threshold_db") sb.quality.threshold_db -= delta;
  else if (field == "sensor_metadata") flip_bytes(sb.sensor_metadata, variant);
  else if (field == "video_id") sb.video_id += delta;
  else if (field == "gop_index") sb.gop_index += delta;
  else if (field == "raw_gop_digest") flip_digest(sb.raw_gop_digest, variant);
  else if (field == "chain_prev_i") flip_digest(sb.chain_prev_i, variant);
  else if (field == "chain_prev_last_p") flip_digest(sb.chain_prev_last_p, variant);
  else if (field == "initiator_pubkey") flip_bytes(sb.initiator_pubkey.bytes, variant);
  else if (field == "initiator_signature") flip_bytes(sb.initiator_signature.bytes, variant);
  else throw TamperError("unknown subblock field \"" + std::string(field) + "\"");
}

void tamper_field(RunData& run, std::uint64_t height, std::size_t subblock, std::string_view field) {
  for (auto& b : run.blocks) {
    if (b.height != height) continue;
    if (subblock >= b.subblocks.size())
      throw TamperError("block " + std::to_string(height) + " has " + std::to_string(b.subblocks.size()) +
                        " subblocks");
    mutate_field(b.subblocks[subblock], field);
    return;
  }
  throw TamperError("no block at height " + std::to_string(height));
}

}  // namespace cstore::netsim
