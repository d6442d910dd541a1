#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cstore/codec.hpp"
#include "cstore/crypto.hpp"
#include "cstore/encoding.hpp"

// Binary Merkle trees. Parent = hash(left || right); an odd node at the end of a
// level is paired with a copy of itself; a one-leaf tree has the leaf as root.
namespace cstore::merkle {

using crypto::Digest;

class MerkleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Side : std::uint8_t { left = 0, right = 1 };

struct ProofStep {
  Digest sibling;
  Side side = Side::right;  // where the sibling sits relative to the running hash
  bool operator==(const ProofStep&) const = default;
};

struct MerkleProof {
  std::uint64_t leaf_index = 0;
  std::vector<ProofStep> siblings;
  bool operator==(const MerkleProof&) const = default;
};

class MerkleTree {
 public:
  // Throws MerkleError on an empty leaf list.
  explicit MerkleTree(std::vector<Digest> leaves);

  static MerkleTree from_payloads(const std::vector<ByteView>& payloads);

  const Digest& root() const { return levels_.back().front(); }
  const std::vector<Digest>& leaves() const { return levels_.front(); }
  const std::vector<std::vector<Digest>>& levels() const { return levels_; }
  std::size_t leaf_count() const { return levels_.front().size(); }
  std::size_t height() const { return levels_.size() - 1; }

  // Throws MerkleError for an out-of-range index.
  MerkleProof prove(std::size_t leaf_index) const;

  bool operator==(const MerkleTree&) const = default;

 private:
  std::vector<std::vector<Digest>> levels_;
};

// Number of parent levels above leaf_count leaves.
std::size_t tree_height(std::size_t leaf_count);

bool verify_proof(const Digest& root, const Digest& leaf, const MerkleProof& proof);

// Also checks the proof has the height of a leaf_count-leaf tree and that the
// sibling sides agree with the leaf index.
bool verify_proof(const Digest& root, const Digest& leaf, const MerkleProof& proof,
                  std::size_t leaf_count);

// Leaves are hash(i_payload), hash(p_1), ... in frame order.
MerkleTree frame_tree(const codec::CompressedGop& c);

// Root across GOPs; throws MerkleError for an empty list.
Digest block_root(const std::vector<Digest>& gop_roots);

void write(wire::Encoder& e, const MerkleProof& p);
void read(wire::Decoder& d, MerkleProof& p);

}  // namespace cstore::merkle
