#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cstore/ledger.hpp"
#include "cstore/scenario.hpp"
#include "cstore/storage.hpp"

// Deterministic discrete-event simulation of initiators, miners, storage nodes
// and verifiers on a full-mesh network with uniform per-message latency.
namespace cstore::netsim {

inline constexpr int kMetricsSchemaVersion = 1;

// gop_size * gops_per_block / block_interval_s. Throws std::invalid_argument
// unless all three are positive and finite.
double theoretical_pps(double gop_size, double gops_per_block, double block_interval_s);

struct BlockRecord {
  std::uint64_t height = 0;
  double accept_time_s = 0.0;  // when the observer accepted it
  ledger::NodeId miner = 0;
  std::size_t subblocks = 0;
  std::uint64_t frames = 0;
  std::string hash;
};

struct Metrics {
  std::string mode;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  double warmup_s = 0.0;

  std::uint64_t committed_frames = 0;  // canonical frames accepted inside [warmup, duration]
  double committed_pps = 0.0;
  std::uint64_t committed_gops = 0;    // whole canonical chain
  std::uint64_t canonical_height = 0;
  double mean_block_interval_s = 0.0;
  std::uint64_t gops_emitted = 0;
  std::uint64_t blocks_mined = 0;

  std::uint64_t fork_count = 0;       // heights where the observer saw competing blocks
  std::uint64_t orphaned_blocks = 0;  // observer-accepted blocks off the canonical chain
  std::uint64_t rejected_blocks = 0;  // summed over nodes
  std::map<std::string, std::uint64_t> rejections_by_reason;

  std::uint64_t messages_sent = 0;
  std::uint64_t bytes_broadcast = 0;
  std::uint64_t bytes_delivered = 0;
  std::uint64_t bytes_in_flight = 0;
  std::uint64_t bytes_storage = 0;   // placement uploads and verifier fetches
  std::uint64_t bytes_download = 0;  // raw GOP downloads and refetches

  std::uint64_t raw_bytes = 0;                // canonical GOPs
  std::uint64_t stored_ciphertext_bytes = 0;  // canonical objects
  double compression_ratio = 0.0;

  std::uint64_t audit_rounds = 0;
  std::uint64_t audit_samples = 0;
  std::uint64_t audit_failures = 0;

  std::map<ledger::NodeId, std::uint64_t> credits;
  std::uint64_t credits_granted = 0;
  std::uint64_t credits_spent = 0;
  std::uint64_t credits_forfeited = 0;

  double alpha_s_per_pixel = 0.0;
  std::uint64_t events_processed = 0;
  std::vector<std::string> warnings;

  std::vector<BlockRecord> blocks;  // canonical, genesis excluded

  nlohmann::json to_json() const;
  // Flat key,value rows.
  std::string to_csv() const;
  // One row per canonical block.
  std::string blocks_csv() const;
};

struct NodeSummary {
  ledger::NodeId id = 0;
  std::string role;
  crypto::Digest tip;
  std::uint64_t height = 0;
  std::uint64_t rejected = 0;
  std::vector<crypto::Digest> canonical;  // genesis first
};

struct RunResult {
  Metrics metrics;
  std::vector<ledger::Block> canonical;  // observer's canonical chain, genesis excluded
  std::vector<NodeSummary> nodes;        // nodes that keep a chain
  storage::StorageDirectory storage;
  storage::CreditLedger credits;
};

// Throws ScenarioError for an invalid scenario.
RunResult run(const Scenario& scenario);

}  // namespace cstore::netsim
