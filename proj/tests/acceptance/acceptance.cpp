// One PASS/FAIL line per acceptance criterion; exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "cstore/codec.hpp"
#include "cstore/consensus.hpp"
#include "cstore/merkle.hpp"
#include "cstore/netsim.hpp"
#include "cstore/rng.hpp"
#include "cstore/run_io.hpp"
#include "cstore/tamper.hpp"
#include "golden/codec_golden.hpp"
#include "oracles/merkle_ref.hpp"
#include "oracles/probability.hpp"
#include "support/mutation_suite.hpp"

using namespace cstore;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

netsim::Scenario short_scenario(std::uint64_t seed) {
  netsim::Scenario s;
  s.seed = seed;
  s.duration_s = 60;
  s.warmup_s = 10;
  s.width = 16;
  s.height = 16;
  s.gop_size = 5;
  s.chunk_size = 256;
  s.work.jitter = 0.2;
  s.work.speed_spread = 0.2;
  return s;
}

Outcome throughput_anchor() {
  Outcome o;
  const double pps = netsim::theoretical_pps(25, 5, 10);
  o.require(pps == 12.5, "pps 25 5 10 = " + fmt("%.17g", pps));

  netsim::Scenario s;  // 64x64, 25-frame GOPs, B_max 5, 10 s interval, 4 miners
  s.duration_s = 600;
  s.warmup_s = 60;
  const auto t0 = std::chrono::steady_clock::now();
  auto r = netsim::run(s);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double measured = r.metrics.committed_pps;
  o.require(measured >= 11.25 && measured <= 13.75, "committed_pps " + fmt("%.4f", measured) + " outside [11.25, 13.75]");
  o.require(wall < 60.0, "wall clock " + fmt("%.1f", wall) + " s");
  o.detail = (o.pass ? "" : o.detail + " | ") + "pps=12.5 measured=" + fmt("%.4f", measured) + " wall=" + fmt("%.1f", wall) + "s";
  return o;
}

Outcome completeness_and_soundness() {
  Outcome o;
  std::uint64_t rejected = 0, blocks = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto r = netsim::run(short_scenario(seed));
    rejected += r.metrics.rejected_blocks;
    blocks += r.metrics.blocks_mined;
  }
  o.require(rejected == 0, std::to_string(rejected) + " honest blocks rejected");

  std::size_t total = 0, correct = 0;
  std::map<std::string, std::size_t> by_reason;
  std::string first_miss;
  for (std::uint64_t seed : {1, 2}) {
    fixture::MutationSuite suite(seed);
    for (const auto& m : suite.run()) {
      ++total;
      ++by_reason[std::string(ledger::to_string(m.expected))];
      if (m.ok()) {
        ++correct;
      } else if (first_miss.empty()) {
        first_miss = m.name + " -> " + (m.actual ? std::string(ledger::to_string(*m.actual)) : "accepted");
      }
    }
  }
  o.require(total >= 200, "only " + std::to_string(total) + " mutations");
  o.require(correct == total, std::to_string(total - correct) + " mutations misclassified, first: " + first_miss);
  std::string reasons;
  for (const auto& [r, n] : by_reason) reasons += " " + r + ":" + std::to_string(n);
  o.detail = (o.pass ? "" : o.detail + " | ") + "100 runs, " + std::to_string(blocks) + " blocks, 0 rejected; " +
             std::to_string(correct) + "/" + std::to_string(total) + " mutations rejected correctly;" + reasons;
  if (!o.pass) o.detail = "rejected=" + std::to_string(rejected) + " " + o.detail;
  return o;
}

Outcome storage_detection() {
  Outcome o;
  const std::uint32_t chunk = 64;
  storage::StorageNode node(1, 1 << 20, chunk);
  Bytes data(10 * chunk);
  Rng(77).fill(data);
  const auto root = storage::chunk_tree(data, chunk).root();
  const auto addr = node.store(data);
  node.drop_chunks(addr, {1, 6});
  const int trials = 100000;
  int passes = 0;
  for (int t = 0; t < trials; ++t) {
    auto ch = storage::make_challenge(addr, static_cast<std::uint64_t>(t) + 1000000, 3, data.size(), chunk);
    passes += storage::verify_storage_proof(root, ch, node.respond(ch));
  }
  const double rate = static_cast<double>(passes) / trials;
  auto [num, den] = oracle::pass_fraction(10, 2, 3);
  const double exact = static_cast<double>(num) / static_cast<double>(den);
  o.require(num == 7 && den == 15, "oracle fraction " + std::to_string(num) + "/" + std::to_string(den));
  o.require(std::abs(rate - exact) <= 0.02, "pass rate " + fmt("%.4f", rate));

  const double bound = oracle::worst_detection(64, 8192, 0.05, 16);
  o.require(bound >= 0.55, "worst-case detection " + fmt("%.4f", bound));
  o.detail = (o.pass ? "" : o.detail + " | ") + "pass rate " + fmt("%.4f", rate) + " vs 7/15=" + fmt("%.4f", exact) +
             "; min detection k=16 n in [64,8192] m/n>=0.05: " + fmt("%.4f", bound);
  return o;
}

netsim::RunData tamper_run(std::uint64_t seed) {
  netsim::Scenario s = short_scenario(seed);
  s.initiators = 2;
  s.duration_s = 90;
  auto dir = fs::temp_directory_path() / ("cstore_acceptance_tamper_" + std::to_string(seed));
  fs::remove_all(dir);
  netsim::write_run(dir, s, netsim::run(s));
  auto data = netsim::load_run(dir);
  fs::remove_all(dir);
  return data;
}

Outcome tamper_propagation() {
  Outcome o;
  std::size_t flips = 0, replaces = 0, clean_runs = 0;
  for (std::uint64_t seed : {11, 12, 13}) {
    const auto base = tamper_run(seed);
    auto clean = netsim::detect_tampering(base);
    o.require(clean.clean(), "false flags on untampered run seed " + std::to_string(seed));
    ++clean_runs;

    Rng rng(seed);
    for (std::size_t h = 0; h < base.blocks.size(); ++h) {
      for (std::size_t i = 0; i < base.blocks[h].subblocks.size(); ++i) {
        const auto& sb = base.blocks[h].subblocks[i];
        auto run = base;
        netsim::flip_stored_byte(run, sb.storage.address, rng.below(sb.storage.object_size),
                                 static_cast<std::uint8_t>(1 + rng.below(255)));
        auto report = netsim::detect_tampering(run);
        std::size_t direct = 0;
        bool hit = false;
        for (const auto& f : report.flags) {
          if (f.inherited) continue;
          ++direct;
          hit = hit || (f.height == h + 1 && f.subblock == i);
        }
        o.require(hit && direct == 1, "flip at height " + std::to_string(h + 1) + " subblock " + std::to_string(i));
        ++flips;
      }
    }

    std::map<std::uint64_t, std::uint64_t> last;
    for (const auto& b : base.blocks)
      for (const auto& sb : b.subblocks) last[sb.video_id] = std::max(last[sb.video_id], sb.gop_index);
    for (const auto& [video, top] : last) {
      for (std::uint64_t gop = 0; gop < top; gop += 3) {
        auto run = base;
        netsim::replace_gop(run, video, gop);
        auto report = netsim::detect_tampering(run);
        std::set<std::uint64_t> flagged;
        bool foreign = false;
        for (const auto& f : report.flags) {
          if (!f.subblock) continue;
          if (f.video_id != video) foreign = true;
          flagged.insert(f.gop_index);
        }
        bool all_later = true;
        for (std::uint64_t g = gop; g <= top; ++g) all_later = all_later && flagged.count(g);
        bool none_earlier = flagged.empty() || *flagged.begin() >= gop;
        o.require(all_later && none_earlier && !foreign,
                  "replace video " + std::to_string(video) + " gop " + std::to_string(gop));
        ++replaces;
      }
    }
  }
  o.detail = (o.pass ? "" : o.detail + " | ") + std::to_string(flips) + " byte flips, " + std::to_string(replaces) +
             " GOP replacements, " + std::to_string(clean_runs) + " clean runs";
  return o;
}

Outcome codec_properties() {
  Outcome o;
  Rng rng(5150);
  std::size_t exact = 0;
  for (int i = 0; i < 1000; ++i) {
    codec::SyntheticVideoParams p;
    p.width = static_cast<std::uint32_t>(8 + rng.below(57));
    p.height = static_cast<std::uint32_t>(8 + rng.below(57));
    p.gop_size = static_cast<std::uint32_t>(2 + rng.below(24));
    p.seed = rng.next();
    p.motion = rng.uniform(0.0, 3.0);
    p.noise = static_cast<std::uint32_t>(rng.below(16));
    auto gop = codec::SyntheticVideo(p).gop(rng.below(100));
    exact += codec::decode_gop(codec::encode_gop(gop, 1, {}, {})) == gop.frames;
  }
  o.require(exact == 1000, std::to_string(1000 - exact) + " lossy round trips at quantizer 1");

  const auto gop = codec::SyntheticVideo(codec::SyntheticVideoParams{}).gop(0);
  const auto c = codec::encode_gop(gop, 8, {}, {});
  const double psnr = codec::quality_of(gop, c, 30.0).mean_psnr_db;
  const double ratio = static_cast<double>(gop.raw_size()) / static_cast<double>(c.payload_size());
  o.require(psnr >= 30.0, "golden PSNR " + fmt("%.3f", psnr));
  o.require(ratio > 1.0, "golden ratio " + fmt("%.3f", ratio));
  const auto& row = golden::kSweep[2];
  o.require(row.quantizer == 8 && c.payload_size() == row.payload_bytes &&
                std::abs(psnr - row.mean_psnr_db) <= 1e-9 * row.mean_psnr_db,
            "golden q8 values drifted from the frozen sweep");
  o.require(consensus::raw_gop_digest(gop).hex() == golden::kRawDigest, "golden raw GOP digest drifted");
  o.detail = (o.pass ? "" : o.detail + " | ") + "1000/1000 exact at q=1; golden q=8 PSNR " + fmt("%.3f", psnr) +
             " dB, ratio " + fmt("%.3f", ratio);
  return o;
}

Outcome merkle_equivalence() {
  Outcome o;
  std::size_t proofs = 0;
  for (std::size_t n = 1; n <= 33; ++n) {
    std::vector<crypto::Digest> leaves;
    std::vector<oracle::Hash> ref;
    for (std::size_t i = 0; i < n; ++i) {
      leaves.push_back(crypto::hash(as_bytes("acceptance leaf " + std::to_string(n) + ":" + std::to_string(i))));
      ref.push_back(leaves.back().bytes);
    }
    merkle::MerkleTree tree(leaves);
    o.require(tree.root().bytes == oracle::merkle_root(ref), "root differs at n=" + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
      auto proof = tree.prove(i);
      auto path = oracle::merkle_path(ref, i);
      bool same = proof.siblings.size() == path.size();
      for (std::size_t s = 0; same && s < path.size(); ++s) {
        same = proof.siblings[s].sibling.bytes == path[s].sibling &&
               (proof.siblings[s].side == merkle::Side::left) == path[s].sibling_on_left;
      }
      same = same && merkle::verify_proof(tree.root(), leaves[i], proof, n);
      o.require(same, "proof differs at n=" + std::to_string(n) + " i=" + std::to_string(i));
      ++proofs;
    }
  }
  o.detail = (o.pass ? "" : o.detail + " | ") + "33 roots and " + std::to_string(proofs) + " proofs identical";
  return o;
}

Outcome determinism() {
  Outcome o;
  const char* files[] = {"manifest.json", "metrics.json", "metrics.csv", "blocks.csv", "chain.bin", "storage.bin"};
  std::size_t compared = 0;
  for (std::uint64_t seed : {1, 7, 42}) {
    for (auto mode : {netsim::Mode::public_pows, netsim::Mode::private_trusted, netsim::Mode::sharded}) {
      auto s = short_scenario(seed);
      s.mode = mode;
      auto base = fs::temp_directory_path() / "cstore_acceptance_det";
      fs::remove_all(base);
      netsim::write_run(base / "a", s, netsim::run(s));
      netsim::write_run(base / "b", s, netsim::run(s));
      for (const char* f : files) {
        o.require(netsim::read_file(base / "a" / f) == netsim::read_file(base / "b" / f),
                  std::string(f) + " differs for seed " + std::to_string(seed) + " mode " +
                      std::string(netsim::to_string(mode)));
        ++compared;
      }
      fs::remove_all(base);
    }
  }
  o.detail = (o.pass ? "" : o.detail + " | ") + std::to_string(compared) + " output files byte-identical across reruns";
  return o;
}

Outcome fork_trend() {
  Outcome o;
  const double jitters[] = {0.05, 0.2, 0.4, 0.6};
  const int runs = 30;
  std::vector<double> means;
  for (double j : jitters) {
    double sum = 0;
    for (int seed = 1; seed <= runs; ++seed) {
      auto s = short_scenario(static_cast<std::uint64_t>(1000 + seed));
      s.duration_s = 200;
      s.warmup_s = 20;
      s.work.speed_spread = 0.0;
      s.work.jitter = j;
      sum += static_cast<double>(netsim::run(s).metrics.fork_count);
    }
    means.push_back(sum / runs);
  }
  std::string series;
  for (std::size_t i = 0; i < means.size(); ++i) {
    series += " jitter " + fmt("%.2f", jitters[i]) + ":" + fmt("%.2f", means[i]);
    if (i > 0) o.require(means[i] <= means[i - 1], "mean forks rose at jitter " + fmt("%.2f", jitters[i]));
  }
  o.detail = (o.pass ? "" : o.detail + " | ") + std::to_string(runs) + " runs per level, mean forks" + series;
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const Criterion criteria[] = {
      {"throughput anchor", throughput_anchor},
      {"mining completeness and soundness", completeness_and_soundness},
      {"storage proof detection", storage_detection},
      {"tamper propagation", tamper_propagation},
      {"codec properties", codec_properties},
      {"merkle oracle equivalence", merkle_equivalence},
      {"determinism", determinism},
      {"fork trend under work-time variance", fork_trend},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    failed += !out.pass;
    std::printf("%s %d %s: %s\n", out.pass ? "PASS" : "FAIL", index, c.name, out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
