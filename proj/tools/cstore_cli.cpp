#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cstore/codec.hpp"
#include "cstore/consensus.hpp"
#include "cstore/netsim.hpp"
#include "cstore/run_io.hpp"
#include "cstore/scenario.hpp"
#include "cstore/storage.hpp"
#include "cstore/tamper.hpp"

namespace fs = std::filesystem;
using namespace cstore;

namespace {

constexpr int kExitScenario = 2;
constexpr int kExitProtocol = 3;

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string default_out_dir() {
  if (const char* env = std::getenv("CSTORE_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "cstore-out";
}

// "a:b" with both parts unsigned integers.
std::pair<std::uint64_t, std::uint64_t> parse_pair(const std::string& s, const char* what) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw CLI::ValidationError(what, "expected <a>:<b>");
  try {
    return {std::stoull(s.substr(0, colon)), std::stoull(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw CLI::ValidationError(what, "expected unsigned integers in \"" + s + "\"");
  }
}

struct GenVideoOpts {
  std::uint32_t width = 64, height = 64, gop_size = 25, gops = 4;
  std::uint64_t seed = 1;
  double motion = 1.0;
  std::uint32_t noise = 2;
  std::optional<std::uint32_t> quantizer;
  std::string out;
};

int gen_video(const GenVideoOpts& o) {
  codec::SyntheticVideoParams p;
  p.width = o.width;
  p.height = o.height;
  p.gop_size = o.gop_size;
  p.seed = o.seed;
  p.motion = o.motion;
  p.noise = o.noise;
  auto gops = codec::generate_synthetic_video(p, o.gops);
  nlohmann::json j;
  j["width"] = o.width;
  j["height"] = o.height;
  j["gop_size"] = o.gop_size;
  j["seed"] = o.seed;
  j["gops"] = nlohmann::json::array();
  std::uint64_t raw = 0;
  for (const auto& g : gops) {
    nlohmann::json e;
    e["index"] = g.index;
    e["timestamp_ms"] = g.timestamp_ms;
    e["raw_bytes"] = g.raw_size();
    e["digest"] = consensus::raw_gop_digest(g).hex();
    if (o.quantizer) {
      auto c = codec::encode_gop(g, *o.quantizer, crypto::Digest::zero(), crypto::Digest::zero());
      auto q = codec::quality_of(g, c, 0.0);
      e["quantizer"] = *o.quantizer;
      e["compressed_bytes"] = c.payload_size();
      e["mean_psnr_db"] = q.mean_psnr_db;
    }
    raw += g.raw_size();
    j["gops"].push_back(std::move(e));
  }
  j["raw_bytes"] = raw;
  if (!o.out.empty()) {
    wire::Encoder e;
    e.list(gops, [](wire::Encoder& enc, const codec::Gop& g) { write(enc, g); });
    netsim::write_file(o.out, e.buffer());
    j["written"] = o.out;
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct RunOpts {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out;
};

int run_cmd(const RunOpts& o) {
  netsim::Scenario s;
  try {
    s = netsim::load_scenario(o.scenario);
    if (o.seed) s.seed = *o.seed;
    if (o.duration) s.duration_s = *o.duration;
    netsim::validate(s);
  } catch (const netsim::ScenarioError& e) {
    std::cerr << "bad scenario: " << e.what() << '\n';
    return kExitScenario;
  }
  const fs::path out = o.out.empty() ? fs::path(default_out_dir()) : fs::path(o.out);
  auto result = netsim::run(s);
  netsim::write_run(out, s, result);
  const auto& m = result.metrics;
  std::cout << "mode " << m.mode << " seed " << m.seed << '\n'
            << "committed_pps " << shortest(m.committed_pps) << '\n'
            << "canonical_height " << m.canonical_height << '\n'
            << "fork_count " << m.fork_count << '\n'
            << "rejected_blocks " << m.rejected_blocks << '\n'
            << "compression_ratio " << shortest(m.compression_ratio) << '\n'
            << "output " << out.string() << '\n';
  for (const auto& w : m.warnings) std::cout << "warning: " << w << '\n';
  return 0;
}

struct InspectOpts {
  std::string run;
  std::optional<std::uint64_t> height;
  bool json = false;
};

nlohmann::json subblock_json(const ledger::SubBlock& sb) {
  return {{"video_id", sb.video_id},
          {"gop_index", sb.gop_index},
          {"gop_timestamp_ms", sb.gop_timestamp_ms},
          {"gop_merkle_root", sb.gop_merkle_root.hex()},
          {"storage", {{"address", sb.storage.address.hex()},
                       {"node", sb.storage.storage_node},
                       {"chunk_root", sb.storage.chunk_root.hex()},
                       {"object_size", sb.storage.object_size},
                       {"chunk_size", sb.storage.chunk_size}}},
          {"codec", {{"algorithm_id", sb.codec.algorithm_id},
                     {"quantizer", sb.codec.quantizer},
                     {"width", sb.codec.width},
                     {"height", sb.codec.height},
                     {"frame_count", sb.codec.frame_count}}},
          {"quality", {{"mean_psnr_db", sb.quality.mean_psnr_db}, {"threshold_db", sb.quality.threshold_db}}},
          {"raw_gop_digest", sb.raw_gop_digest.hex()},
          {"chain_prev_i", sb.chain_prev_i.hex()},
          {"chain_prev_last_p", sb.chain_prev_last_p.hex()}};
}

int inspect_chain(const InspectOpts& o) {
  auto data = netsim::load_run(o.run);
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : data.blocks) {
    if (o.height && b.height != *o.height) continue;
    nlohmann::json j{{"height", b.height},
                     {"hash", ledger::block_hash(b).hex()},
                     {"prev", b.prev_block_hash.hex()},
                     {"timestamp_ms", b.timestamp_ms},
                     {"miner", b.miner_id},
                     {"block_merkle_root", b.block_merkle_root.hex()}};
    j["subblocks"] = nlohmann::json::array();
    for (const auto& sb : b.subblocks) j["subblocks"].push_back(subblock_json(sb));
    blocks.push_back(std::move(j));
  }
  if (o.height && blocks.empty()) {
    std::cerr << "no block at height " << *o.height << '\n';
    return 1;
  }
  if (o.json || o.height) {
    std::cout << blocks.dump(2) << '\n';
    return 0;
  }
  std::cout << "height  miner  gops  hash\n";
  for (const auto& b : blocks) {
    std::cout << b["height"].get<std::uint64_t>() << "  " << b["miner"].get<std::uint32_t>() << "  "
              << b["subblocks"].size() << "  " << b["hash"].get<std::string>() << '\n';
    for (const auto& sb : b["subblocks"])
      std::cout << "    video " << sb["video_id"].get<std::uint64_t>() << " gop " << sb["gop_index"].get<std::uint64_t>()
                << " q " << sb["codec"]["quantizer"].get<std::uint32_t>() << " "
                << sb["storage"]["object_size"].get<std::uint64_t>() << "B at "
                << sb["storage"]["address"].get<std::string>() << '\n';
  }
  return 0;
}

struct TamperOpts {
  std::string run;
  std::vector<std::string> flips;
  std::vector<std::string> replaces;
  std::vector<std::string> fields;
  bool json = false;
};

int tamper_cmd(const TamperOpts& o) {
  auto data = netsim::load_run(o.run);
  for (const auto& f : o.flips) {
    const auto colon = f.rfind(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--flip-byte", "expected <address>:<offset>");
    const auto address = crypto::Digest::from_hex(f.substr(0, colon));
    netsim::flip_stored_byte(data, address, std::stoull(f.substr(colon + 1)));
  }
  for (const auto& r : o.replaces) {
    auto [video, gop] = parse_pair(r, "--replace-gop");
    netsim::replace_gop(data, video, gop);
  }
  for (const auto& f : o.fields) {
    const auto c1 = f.find(':');
    const auto c2 = c1 == std::string::npos ? c1 : f.find(':', c1 + 1);
    if (c2 == std::string::npos) throw CLI::ValidationError("--field", "expected <height>:<subblock>:<name>");
    netsim::tamper_field(data, std::stoull(f.substr(0, c1)), std::stoull(f.substr(c1 + 1, c2 - c1 - 1)),
                         f.substr(c2 + 1));
  }
  auto report = netsim::detect_tampering(data);
  if (o.json) std::cout << report.to_json().dump(2) << '\n';
  else std::cout << report.to_text();
  return 0;
}

struct AuditOpts {
  std::string run;
  std::uint64_t seed = 1;
  std::size_t rounds = 1;
  std::size_t samples = 4;
  std::size_t k = storage::kDefaultChallengeCount;
  bool json = false;
};

int audit_cmd(const AuditOpts& o) {
  auto data = netsim::load_run(o.run);
  std::vector<const ledger::Block*> chain{&ledger::genesis_block()};
  for (const auto& b : data.blocks) chain.push_back(&b);
  storage::Auditor auditor{o.seed, o.samples, o.k, 0};
  nlohmann::json out = nlohmann::json::array();
  std::size_t failures = 0;
  for (std::size_t r = 0; r < o.rounds; ++r) {
    auto report = storage::audit_round(auditor, chain, data.storage);
    failures += report.failures;
    nlohmann::json j{{"round", report.round}, {"failures", report.failures}, {"flagged_nodes", report.flagged_nodes}};
    j["samples"] = nlohmann::json::array();
    for (const auto& s : report.samples)
      j["samples"].push_back({{"height", s.height},
                              {"subblock", s.subblock_index},
                              {"video_id", s.video_id},
                              {"gop_index", s.gop_index},
                              {"node", s.node},
                              {"passed", s.passed},
                              {"detail", s.detail}});
    out.push_back(std::move(j));
  }
  if (o.json) {
    std::cout << out.dump(2) << '\n';
  } else {
    for (const auto& r : out) {
      std::cout << "round " << r["round"].get<std::uint64_t>() << ": " << r["samples"].size() << " samples, "
                << r["failures"].get<std::size_t>() << " failures\n";
      for (const auto& s : r["samples"])
        if (!s["passed"].get<bool>())
          std::cout << "  height " << s["height"].get<std::uint64_t>() << " subblock "
                    << s["subblock"].get<std::size_t>() << " node " << s["node"].get<std::uint32_t>() << ": "
                    << s["detail"].get<std::string>() << '\n';
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video blockchain with compression and storage based consensus"};
  app.require_subcommand(1);

  GenVideoOpts gv;
  auto* gen = app.add_subcommand("gen-video", "Generate a synthetic video and summarize its GOPs");
  gen->add_option("--width", gv.width)->check(CLI::PositiveNumber);
  gen->add_option("--height", gv.height)->check(CLI::PositiveNumber);
  gen->add_option("--gop-size", gv.gop_size)->check(CLI::PositiveNumber);
  gen->add_option("--gops", gv.gops)->check(CLI::PositiveNumber);
  gen->add_option("--seed", gv.seed);
  gen->add_option("--motion", gv.motion)->check(CLI::NonNegativeNumber);
  gen->add_option("--noise", gv.noise);
  gen->add_option("--quantizer", gv.quantizer, "Also encode each GOP at this quantizer")->check(CLI::Range(1, 255));
  gen->add_option("--out", gv.out, "Write the canonical GOP list here");

  RunOpts ro;
  auto* run = app.add_subcommand("run", "Run a simulation scenario");
  run->add_option("--scenario", ro.scenario)->required();
  run->add_option("--seed", ro.seed);
  run->add_option("--duration", ro.duration);
  run->add_option("--out", ro.out, "Output directory (default $CSTORE_OUT_DIR or ./cstore-out)");

  InspectOpts io;
  auto* inspect = app.add_subcommand("inspect-chain", "Print the canonical chain of a run");
  inspect->add_option("--run", io.run)->required();
  inspect->add_option("--height", io.height);
  inspect->add_flag("--json", io.json);

  TamperOpts to;
  auto* tamper = app.add_subcommand("tamper", "Tamper with a run in memory and re-verify it");
  tamper->add_option("--run", to.run)->required();
  tamper->add_option("--flip-byte", to.flips, "<address>:<offset> of a stored object");
  tamper->add_option("--replace-gop", to.replaces, "<video>:<gop> to re-encode");
  tamper->add_option("--field", to.fields, "<height>:<subblock>:<field> to corrupt");
  tamper->add_flag("--json", to.json);

  AuditOpts ao;
  auto* audit = app.add_subcommand("audit", "Run traveling-auditor rounds against a run's storage");
  audit->add_option("--run", ao.run)->required();
  audit->add_option("--seed", ao.seed);
  audit->add_option("--rounds", ao.rounds)->check(CLI::PositiveNumber);
  audit->add_option("--samples", ao.samples)->check(CLI::PositiveNumber);
  audit->add_option("--k", ao.k)->check(CLI::PositiveNumber);
  audit->add_flag("--json", ao.json);

  std::vector<double> pps_pos;
  std::optional<double> pps_gop, pps_per_block, pps_interval;
  auto* pps = app.add_subcommand("pps", "Theoretical committed pictures per second");
  pps->add_option("values", pps_pos, "<gop_size> <gops_per_block> <interval_s>")->expected(0, 3);
  pps->add_option("--gop", pps_gop);
  pps->add_option("--gops-per-block", pps_per_block);
  pps->add_option("--interval", pps_interval);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_video(gv);
    if (*run) return run_cmd(ro);
    if (*inspect) return inspect_chain(io);
    if (*tamper) return tamper_cmd(to);
    if (*audit) return audit_cmd(ao);
    if (*pps) {
      double v[3];
      const std::optional<double>* flags[3] = {&pps_gop, &pps_per_block, &pps_interval};
      for (int i = 0; i < 3; ++i) {
        if (*flags[i]) v[i] = **flags[i];
        else if (static_cast<std::size_t>(i) < pps_pos.size()) v[i] = pps_pos[i];
        else throw CLI::ValidationError("pps", "needs gop size, GOPs per block and interval");
      }
      std::cout << shortest(netsim::theoretical_pps(v[0], v[1], v[2])) << '\n';
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const netsim::ScenarioError& e) {
    std::cerr << "bad scenario: " << e.what() << '\n';
    return kExitScenario;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const netsim::TamperError& e) {
    std::cerr << "tamper: " << e.what() << '\n';
    return 1;
  } catch (const netsim::RunIoError& e) {
    std::cerr << "run: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "protocol violation: " << e.what() << '\n';
    return kExitProtocol;
  }
  return 0;
}
