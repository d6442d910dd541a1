#include "cstore/merkle.hpp"

namespace cstore::merkle {

MerkleTree::MerkleTree(std::vector<Digest> leaves) {
  if (leaves.empty()) throw MerkleError("Merkle tree needs at least one leaf");
  levels_.push_back(std::move(leaves));
  while (levels_.back().size() > 1) {
    const auto& below = levels_.back();
    std::vector<Digest> up;
    up.reserve((below.size() + 1) / 2);
    for (std::size_t i = 0; i < below.size(); i += 2) {
      const Digest& left = below[i];
      const Digest& right = i + 1 < below.size() ? below[i + 1] : below[i];
      up.push_back(crypto::hash_pair(left, right));
    }
    levels_.push_back(std::move(up));
  }
}

MerkleTree MerkleTree::from_payloads(const std::vector<ByteView>& payloads) {
  std::vector<Digest> leaves;
  leaves.reserve(payloads.size());
  for (auto p : payloads) leaves.push_back(crypto::hash(p));
  return MerkleTree(std::move(leaves));
}

MerkleProof MerkleTree::prove(std::size_t leaf_index) const {
  if (leaf_index >= leaf_count()) {
    throw MerkleError("leaf index " + std::to_string(leaf_index) + " out of range");
  }
  MerkleProof proof;
  proof.leaf_index = leaf_index;
  std::size_t idx = leaf_index;
  for (std::size_t level = 0; level + 1 < levels_.size(); ++level) {
    const auto& nodes = levels_[level];
    if (idx % 2 == 0) {
      const Digest& sib = idx + 1 < nodes.size() ? nodes[idx + 1] : nodes[idx];
      proof.siblings.push_back({sib, Side::right});
    } else {
      proof.siblings.push_back({nodes[idx - 1], Side::left});
    }
    idx /= 2;
  }
  return proof;
}

std::size_t tree_height(std::size_t leaf_count) {
  std::size_t h = 0;
  while (leaf_count > 1) {
    leaf_count = (leaf_count + 1) / 2;
    ++h;
  }
  return h;
}

bool verify_proof(const Digest& root, const Digest& leaf, const MerkleProof& proof) {
  Digest acc = leaf;
  std::uint64_t idx = proof.leaf_index;
  for (const auto& step : proof.siblings) {
    const Side expected = idx % 2 == 0 ? Side::right : Side::left;
    if (step.side != expected) return false;
    acc = step.side == Side::right ? crypto::hash_pair(acc, step.sibling)
                                   : crypto::hash_pair(step.sibling, acc);
    idx /= 2;
  }
  return idx == 0 && acc == root;
}

bool verify_proof(const Digest& root, const Digest& leaf, const MerkleProof& proof,
                  std::size_t leaf_count) {
  if (proof.leaf_index >= leaf_count) return false;
  if (proof.siblings.size() != tree_height(leaf_count)) return false;
  return verify_proof(root, leaf, proof);
}

MerkleTree frame_tree(const codec::CompressedGop& c) {
  return MerkleTree::from_payloads(c.frame_payloads());
}

Digest block_root(const std::vector<Digest>& gop_roots) {
  if (gop_roots.empty()) throw MerkleError("block_root of an empty list");
  return MerkleTree(gop_roots).root();
}

void write(wire::Encoder& e, const MerkleProof& p) {
  e.u64(p.leaf_index);
  e.list(p.siblings, [](wire::Encoder& enc, const ProofStep& s) {
    enc.digest(s.sibling);
    enc.u8(static_cast<std::uint8_t>(s.side));
  });
}

void read(wire::Decoder& d, MerkleProof& p) {
  p.leaf_index = d.u64();
  p.siblings = d.list<ProofStep>(
      [](wire::Decoder& dec) {
        ProofStep s;
        s.sibling = dec.digest();
        std::uint8_t side = dec.u8();
        if (side > 1) throw wire::DecodeError("invalid proof side");
        s.side = static_cast<Side>(side);
        return s;
      },
      33);
}

}  // namespace cstore::merkle
