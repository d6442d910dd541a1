#include <doctest.h>

#include <set>

#include "cstore/rng.hpp"
#include "cstore/storage.hpp"
#include "oracles/probability.hpp"
#include "support/fixtures.hpp"

using namespace cstore;
using storage::ContentAddress;
using storage::StorageNode;

namespace {

Bytes object_bytes(std::size_t n, std::uint64_t seed) {
  Bytes b(n);
  Rng(seed).fill(b);
  return b;
}

bool challenge_passes(const StorageNode& node, const ContentAddress& addr, const crypto::Digest& root,
                      std::uint64_t seed, std::size_t k, std::uint64_t size, std::uint32_t chunk) {
  auto ch = storage::make_challenge(addr, seed, k, size, chunk);
  return storage::verify_storage_proof(root, ch, node.respond(ch));
}

}  // namespace

TEST_CASE("chunking") {
  CHECK(storage::chunk_count(0, 4096) == 1);
  CHECK(storage::chunk_count(1, 4096) == 1);
  CHECK(storage::chunk_count(4096, 4096) == 1);
  CHECK(storage::chunk_count(4097, 4096) == 2);
  CHECK_THROWS_AS(storage::chunk_count(10, 0), storage::StorageError);
  auto data = object_bytes(10000, 1);
  auto tree = storage::chunk_tree(data, 4096);
  REQUIRE(tree.leaf_count() == 3);
  CHECK(tree.leaves()[2] == crypto::hash(ByteView(data).subspan(8192)));
}

TEST_CASE("honest nodes always pass") {
  StorageNode node(1, 1 << 24);
  for (std::size_t size : {1, 100, 4096, 4097, 50000, 300000}) {
    auto data = object_bytes(size, size);
    auto root = storage::chunk_tree(data, 4096).root();
    auto addr = node.store(data);
    CHECK(addr.digest == crypto::hash(data));
    const auto n = storage::chunk_count(size, 4096);
    for (std::uint64_t s = 0; s < 20; ++s) {
      CHECK(challenge_passes(node, addr, root, s, std::min<std::uint64_t>(16, n), size, 4096));
    }
    CHECK(node.retrieve(addr) == data);
  }
}

TEST_CASE("challenges are deterministic, distinct and sorted") {
  ContentAddress addr{crypto::hash(as_bytes("x"))};
  auto a = storage::make_challenge(addr, 5, 16, 100 * 4096);
  auto b = storage::make_challenge(addr, 5, 16, 100 * 4096);
  auto c = storage::make_challenge(addr, 6, 16, 100 * 4096);
  CHECK(a.chunk_indices == b.chunk_indices);
  CHECK(a.nonce == b.nonce);
  CHECK(a.nonce != c.nonce);
  CHECK(std::set<std::uint64_t>(a.chunk_indices.begin(), a.chunk_indices.end()).size() == 16);
  CHECK(std::is_sorted(a.chunk_indices.begin(), a.chunk_indices.end()));
  CHECK_THROWS_AS(storage::make_challenge(addr, 1, 0, 4096), storage::StorageError);
  CHECK_THROWS_AS(storage::make_challenge(addr, 1, 3, 2 * 4096), storage::StorageError);
}

TEST_CASE("monte carlo pass rate for n=10, m=2, k=3 matches 7/15") {
  auto [num, den] = oracle::pass_fraction(10, 2, 3);
  CHECK(num == 7);
  CHECK(den == 15);

  const std::uint32_t chunk = 64;
  StorageNode node(1, 1 << 20, chunk);
  auto data = object_bytes(10 * chunk, 3);
  auto root = storage::chunk_tree(data, chunk).root();
  auto addr = node.store(data);
  node.drop_chunks(addr, {2, 7});

  const int trials = 100000;
  int passes = 0;
  for (int t = 0; t < trials; ++t) {
    passes += challenge_passes(node, addr, root, static_cast<std::uint64_t>(t), 3, data.size(), chunk);
  }
  const double rate = static_cast<double>(passes) / trials;
  CHECK(std::abs(rate - 7.0 / 15.0) <= 0.02);
}

TEST_CASE("k=16 detects at least 55 percent when 5 percent of chunks are gone") {
  const double bound = oracle::worst_detection(64, 4096, 0.05, 16);
  CHECK(bound >= 0.55);
  CHECK(oracle::detection_probability(64, 4, 16) >= 0.55);

  const std::uint32_t chunk = 32;
  StorageNode node(1, 1 << 20, chunk);
  auto data = object_bytes(64 * chunk, 4);
  auto root = storage::chunk_tree(data, chunk).root();
  auto addr = node.store(data);
  node.drop_chunks(addr, {0, 21, 42, 63});
  int detected = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    detected += !challenge_passes(node, addr, root, static_cast<std::uint64_t>(t), 16, data.size(), chunk);
  }
  const double rate = static_cast<double>(detected) / trials;
  CHECK(std::abs(rate - oracle::detection_probability(64, 4, 16)) <= 0.02);
  CHECK(rate >= 0.55);
}

TEST_CASE("responses bound to the nonce cannot be replayed") {
  StorageNode node(1, 1 << 20, 64);
  auto data = object_bytes(640, 5);
  auto root = storage::chunk_tree(data, 64).root();
  auto addr = node.store(data);
  auto ch1 = storage::make_challenge(addr, 1, 10, data.size(), 64);
  auto ch2 = storage::make_challenge(addr, 2, 10, data.size(), 64);
  REQUIRE(ch1.chunk_indices == ch2.chunk_indices);
  auto proof1 = node.respond(ch1);
  CHECK(storage::verify_storage_proof(root, ch1, proof1));
  CHECK_FALSE(storage::verify_storage_proof(root, ch2, proof1));
  auto forged = proof1;
  forged.nonce = ch2.nonce;
  CHECK_FALSE(storage::verify_storage_proof(root, ch2, forged));
}

TEST_CASE("corrupted or lying responses fail") {
  StorageNode node(1, 1 << 20, 64);
  auto data = object_bytes(640, 6);
  auto root = storage::chunk_tree(data, 64).root();
  auto addr = node.store(data);
  auto ch = storage::make_challenge(addr, 9, 4, data.size(), 64);
  auto good = node.respond(ch);
  REQUIRE(storage::verify_storage_proof(root, ch, good));

  auto p = good;
  p.responses[0].chunk[0] ^= 1;
  CHECK_FALSE(storage::verify_storage_proof(root, ch, p));
  p = good;
  p.responses.pop_back();
  CHECK_FALSE(storage::verify_storage_proof(root, ch, p));
  p = good;
  p.responses[1].binding.bytes[0] ^= 1;
  CHECK_FALSE(storage::verify_storage_proof(root, ch, p));
  p = good;
  p.responses[2].present = false;
  CHECK_FALSE(storage::verify_storage_proof(root, ch, p));
  p = good;
  p.responses[3].proof.siblings[0].sibling.bytes[0] ^= 1;
  CHECK_FALSE(storage::verify_storage_proof(root, ch, p));
  auto bad_root = root;
  bad_root.bytes[0] ^= 1;
  CHECK_FALSE(storage::verify_storage_proof(bad_root, ch, good));

  node.flip_byte(addr, ch.chunk_indices[0] * 64 + 5);
  CHECK_FALSE(storage::verify_storage_proof(root, ch, node.respond(ch)));
  CHECK_THROWS_AS(node.respond(storage::make_challenge({crypto::hash(as_bytes("nope"))}, 1, 1, 64, 64)),
                  storage::StorageError);
}

TEST_CASE("storage is content addressed with dedup and capacity limits") {
  StorageNode node(1, 1000, 64);
  auto data = object_bytes(600, 7);
  auto a1 = node.store(data);
  auto a2 = node.store(data);
  CHECK(a1 == a2);
  CHECK(node.used() == 600);
  CHECK(node.object(a1)->refs == 2);
  CHECK_THROWS_AS(node.store(object_bytes(600, 8)), storage::StorageError);
  CHECK(node.drop_object(a1));
  CHECK(node.used() == 0);
  CHECK_FALSE(node.has(a1));
  CHECK_THROWS_AS(node.retrieve(a1), storage::StorageError);
}

TEST_CASE("directory challenges go to the named node") {
  storage::StorageDirectory dir;
  dir.add(StorageNode(1, 1 << 20, 64));
  dir.add(StorageNode(2, 1 << 20, 64));
  CHECK_THROWS_AS(dir.add(StorageNode(1, 10)), storage::StorageError);
  auto data = object_bytes(1000, 9);
  auto addr = dir.at(2).store(data);
  ledger::StoragePointer ptr{addr.digest, 2, storage::chunk_tree(data, 64).root(), data.size(), 64};
  CHECK(dir.challenge(ptr, 1, 16));
  auto wrong = ptr;
  wrong.storage_node = 1;
  std::string why;
  CHECK_FALSE(dir.challenge(wrong, 1, 16, &why));
  CHECK_FALSE(why.empty());
  wrong.storage_node = 3;
  CHECK_FALSE(dir.challenge(wrong, 1, 16));
  dir.at(2).set_online(false);
  CHECK_FALSE(dir.challenge(ptr, 1, 16));
}

TEST_CASE("credit ledger conserves balances") {
  storage::CreditLedger c;
  c.grant(1, 100);
  CHECK(c.spend(1, 40));
  CHECK_FALSE(c.spend(1, 61));
  CHECK_FALSE(c.spend(2, 1));
  CHECK(c.spend(2, 0));
  CHECK(c.balance(1) == 60);
  auto key = crypto::hash(as_bytes("block"));
  CHECK(c.grant_once(key, 2, 10));
  CHECK_FALSE(c.grant_once(key, 2, 10));
  CHECK(c.balance(2) == 10);

  auto obj = crypto::hash(as_bytes("obj"));
  auto obj2 = crypto::hash(as_bytes("obj2"));
  c.accrue_pending(3, obj, 5);
  c.accrue_pending(3, obj2, 7);
  CHECK(c.pending(3) == 12);
  CHECK(c.forfeit(3, obj) == 5);
  CHECK(c.forfeit(3, obj) == 0);
  CHECK(c.settle_all() == 7);
  CHECK(c.balance(3) == 7);
  CHECK(c.total_forfeited() == 5);

  std::uint64_t sum = 0;
  for (const auto& [id, b] : c.balances()) sum += b;
  CHECK(sum == c.total_granted() - c.total_spent());
}

TEST_CASE("random credit operations never break conservation") {
  Rng rng(12);
  storage::CreditLedger c;
  for (int i = 0; i < 5000; ++i) {
    auto node = static_cast<ledger::NodeId>(rng.below(5));
    switch (rng.below(4)) {
      case 0: c.grant(node, rng.below(1000)); break;
      case 1: c.spend(node, rng.below(1000)); break;
      case 2: c.accrue_pending(node, crypto::hash(as_bytes(std::to_string(rng.below(10)))), rng.below(50)); break;
      case 3: c.settle(node); break;
    }
    std::uint64_t sum = 0;
    for (const auto& [id, b] : c.balances()) sum += b;
    REQUIRE(sum == c.total_granted() - c.total_spent());
  }
}

TEST_CASE("auditor samples committed objects and flags failing nodes") {
  fixture::World w;
  w.extend(w.txs(0, 0, 5));
  w.extend(w.txs(0, 5, 5));
  auto chain = w.chain.chain().canonical();
  chain.erase(chain.begin());

  storage::Auditor auditor{42, 4, 16, 0};
  auto clean = storage::audit_round(auditor, chain, w.storage);
  CHECK(clean.samples.size() == 4);
  CHECK(clean.failures == 0);
  CHECK(auditor.round == 1);

  for (const auto* b : chain)
    for (const auto& sb : b->subblocks) w.credits.accrue_pending(sb.storage.storage_node, sb.storage.address, 3);
  for (auto& [id, node] : w.storage.nodes()) node.set_online(false);
  storage::Auditor all{42, 100, 16, 0};
  auto report = storage::audit_round(all, chain, w.storage, &w.credits);
  CHECK(report.samples.size() == 10);
  CHECK(report.failures == 10);
  CHECK(report.forfeited == 30);
  CHECK_FALSE(report.flagged_nodes.empty());

  storage::Auditor a1{7, 3, 16, 0}, a2{7, 3, 16, 0};
  auto r1 = storage::audit_round(a1, chain, w.storage);
  auto r2 = storage::audit_round(a2, chain, w.storage);
  for (std::size_t i = 0; i < r1.samples.size(); ++i) CHECK(r1.samples[i].address == r2.samples[i].address);
}

TEST_CASE("directory snapshots round trip including lost chunks") {
  storage::StorageDirectory dir;
  dir.add(StorageNode(4, 1 << 20, 64));
  auto addr = dir.at(4).store(object_bytes(500, 1));
  dir.at(4).drop_chunks(addr, {3});
  auto enc = wire::to_bytes(dir);
  auto back = wire::from_bytes<storage::StorageDirectory>(enc);
  CHECK(wire::to_bytes(back) == enc);
  CHECK(back.at(4).object(addr)->missing[3]);
}
