#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cstore/codec.hpp"
#include "cstore/consensus.hpp"
#include "cstore/ledger.hpp"
#include "cstore/merkle.hpp"
#include "cstore/storage.hpp"

namespace fixture {

using namespace cstore;

struct WorldOptions {
  std::uint32_t width = 16;
  std::uint32_t height = 16;
  std::uint32_t frames = 4;
  std::uint32_t storage_nodes = 2;
  std::uint32_t chunk_size = 256;
  double threshold_db = 30.0;
  std::uint64_t seed = 1;
  std::size_t b_max = 5;
};

// One miner, one initiator and a few storage nodes sharing a chain.
struct World {
  WorldOptions opt;
  storage::StorageDirectory storage;
  storage::CreditLedger credits;
  crypto::SymmetricKey access_key;
  consensus::Miner miner;
  crypto::KeyPair initiator;
  consensus::MiningParams params;
  consensus::VerifierCache cache;
  consensus::ChainState chain;

  explicit World(WorldOptions o = {})
      : opt(o), chain(ledger::ChainParams{o.b_max}) {
    for (std::uint32_t i = 0; i < o.storage_nodes; ++i)
      storage.add(storage::StorageNode(100 + i, std::uint64_t{1} << 32, o.chunk_size));
    access_key.bytes = crypto::hash(as_bytes("test access key " + std::to_string(o.seed))).bytes;
    miner = consensus::Miner::create(7, crypto::hash(as_bytes("miner " + std::to_string(o.seed))));
    initiator = crypto::KeyPair::from_seed(crypto::hash(as_bytes("initiator " + std::to_string(o.seed))));
    credits.grant(miner.id, std::uint64_t{1} << 40);
    params.b_max = o.b_max;
    params.threshold_db = o.threshold_db;
  }

  consensus::Network net() { return {storage, credits, access_key}; }

  consensus::VerifyContext ctx(std::uint64_t challenge_seed = 1) const {
    return {storage, access_key, opt.threshold_db, storage::kDefaultChallengeCount, challenge_seed,
            ledger::ChainParams{opt.b_max}};
  }

  codec::Gop gop(std::uint64_t video, std::uint64_t index) const {
    codec::SyntheticVideoParams p;
    p.width = opt.width;
    p.height = opt.height;
    p.gop_size = opt.frames;
    p.seed = opt.seed * 1000 + video;
    return codec::SyntheticVideo(p).gop(index);
  }

  consensus::GopTransaction tx(std::uint64_t video, std::uint64_t index) const {
    return consensus::GopTransaction::create(gop(video, index), video, as_bytes_copy("cam"), initiator);
  }

  std::vector<consensus::GopTransaction> txs(std::uint64_t video, std::uint64_t first, std::size_t count) {
    std::vector<consensus::GopTransaction> out;
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(tx(video, first + i));
      cache.insert(out.back());
    }
    return out;
  }

  consensus::ParentView tip() const { return *chain.parent_view(chain.chain().tip()); }

  // Mines on the current tip without appending.
  consensus::MiningResult mine(const std::vector<consensus::GopTransaction>& pending, std::uint64_t ts = 1000) {
    auto n = net();
    return consensus::mine(pending, params, miner, n, tip(), ts);
  }

  // Mines, verifies and appends.
  consensus::MiningResult extend(const std::vector<consensus::GopTransaction>& pending, std::uint64_t ts = 1000) {
    auto res = mine(pending, ts);
    auto out = consensus::verify_block(res.block, cache, tip(), ctx());
    if (!out.accepted()) throw std::runtime_error("honest block rejected: " + out.rejection->detail);
    chain.append_verified(res.block, out.content_after);
    return res;
  }

 private:
  static Bytes as_bytes_copy(std::string_view s) { return Bytes(s.begin(), s.end()); }
};

inline void resign(ledger::Block& b, const consensus::Miner& miner) {
  b.miner_signature = crypto::sign(miner.keys.secret_key, ledger::block_signing_payload(b));
}

inline void recompute_root(ledger::Block& b) {
  std::vector<crypto::Digest> roots;
  for (const auto& sb : b.subblocks) roots.push_back(sb.gop_merkle_root);
  b.block_merkle_root = merkle::block_root(roots);
}

}  // namespace fixture
