#include <doctest.h>

#include "cstore/codec.hpp"
#include "cstore/merkle.hpp"
#include "cstore/rng.hpp"
#include "oracles/merkle_ref.hpp"

using namespace cstore;

namespace {

std::vector<crypto::Digest> leaves(std::size_t n, std::uint64_t seed = 1) {
  std::vector<crypto::Digest> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(crypto::hash(as_bytes("leaf " + std::to_string(seed) + "/" + std::to_string(i))));
  }
  return out;
}

std::vector<oracle::Hash> raw(const std::vector<crypto::Digest>& ds) {
  std::vector<oracle::Hash> out;
  for (const auto& d : ds) out.push_back(d.bytes);
  return out;
}

}  // namespace

TEST_CASE("roots and proofs match the reference builder for 1 to 33 leaves") {
  for (std::size_t n = 1; n <= 33; ++n) {
    CAPTURE(n);
    auto ls = leaves(n);
    merkle::MerkleTree tree(ls);
    auto ref = raw(ls);
    REQUIRE(tree.root().bytes == oracle::merkle_root(ref));
    CHECK(tree.height() == merkle::tree_height(n));
    for (std::size_t i = 0; i < n; ++i) {
      auto proof = tree.prove(i);
      auto path = oracle::merkle_path(ref, i);
      REQUIRE(proof.siblings.size() == path.size());
      for (std::size_t s = 0; s < path.size(); ++s) {
        CHECK(proof.siblings[s].sibling.bytes == path[s].sibling);
        CHECK((proof.siblings[s].side == merkle::Side::left) == path[s].sibling_on_left);
      }
      CHECK(merkle::verify_proof(tree.root(), ls[i], proof));
      CHECK(merkle::verify_proof(tree.root(), ls[i], proof, n));
    }
  }
}

TEST_CASE("small trees by hand") {
  auto ls = leaves(3);
  merkle::MerkleTree tree(ls);
  auto ab = crypto::hash_pair(ls[0], ls[1]);
  auto cc = crypto::hash_pair(ls[2], ls[2]);
  CHECK(tree.root() == crypto::hash_pair(ab, cc));
  CHECK(merkle::MerkleTree({ls[0]}).root() == ls[0]);
  CHECK(merkle::tree_height(1) == 0);
  CHECK(merkle::tree_height(2) == 1);
  CHECK(merkle::tree_height(5) == 3);
}

TEST_CASE("proofs fail for wrong leaves, roots, siblings and indices") {
  auto ls = leaves(9, 4);
  merkle::MerkleTree tree(ls);
  auto proof = tree.prove(5);
  CHECK_FALSE(merkle::verify_proof(tree.root(), ls[4], proof));
  auto bad_root = tree.root();
  bad_root.bytes[0] ^= 1;
  CHECK_FALSE(merkle::verify_proof(bad_root, ls[5], proof));
  for (std::size_t s = 0; s < proof.siblings.size(); ++s) {
    auto bad = proof;
    bad.siblings[s].sibling.bytes[7] ^= 1;
    CHECK_FALSE(merkle::verify_proof(tree.root(), ls[5], bad));
    bad = proof;
    bad.siblings[s].side = bad.siblings[s].side == merkle::Side::left ? merkle::Side::right : merkle::Side::left;
    CHECK_FALSE(merkle::verify_proof(tree.root(), ls[5], bad));
  }
  auto shorter = proof;
  shorter.siblings.pop_back();
  CHECK_FALSE(merkle::verify_proof(tree.root(), ls[5], shorter, 9));
  auto moved = proof;
  moved.leaf_index = 4;
  CHECK_FALSE(merkle::verify_proof(tree.root(), ls[5], moved, 9));
}

TEST_CASE("errors on empty input and out-of-range proofs") {
  CHECK_THROWS_AS(merkle::MerkleTree({}), merkle::MerkleError);
  CHECK_THROWS_AS(merkle::block_root({}), merkle::MerkleError);
  merkle::MerkleTree tree(leaves(4));
  CHECK_THROWS_AS(tree.prove(4), merkle::MerkleError);
}

TEST_CASE("any single-leaf change moves the root") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng.below(40);
    auto ls = leaves(n, trial);
    auto root = merkle::MerkleTree(ls).root();
    auto changed = ls;
    changed[rng.below(n)].bytes[rng.below(32)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    CHECK(merkle::MerkleTree(changed).root() != root);
  }
}

TEST_CASE("proof encoding round trips") {
  merkle::MerkleTree tree(leaves(13));
  auto proof = tree.prove(12);
  CHECK(wire::from_bytes<merkle::MerkleProof>(wire::to_bytes(proof)) == proof);
}

TEST_CASE("frame tree leaves are payload hashes in frame order") {
  codec::SyntheticVideoParams p;
  p.width = 16;
  p.height = 16;
  p.gop_size = 5;
  auto c = codec::encode_gop(codec::SyntheticVideo(p).gop(0), 4, crypto::Digest{}, crypto::Digest{});
  auto tree = merkle::frame_tree(c);
  REQUIRE(tree.leaf_count() == 5);
  CHECK(tree.leaves()[0] == crypto::hash(c.i_payload));
  for (std::size_t i = 0; i < 4; ++i) CHECK(tree.leaves()[i + 1] == crypto::hash(c.p_payloads[i]));
  std::vector<crypto::Digest> roots{tree.root(), tree.root(), tree.root()};
  CHECK(merkle::block_root(roots) == merkle::MerkleTree(roots).root());
}
