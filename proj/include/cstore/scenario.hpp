#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cstore/codec.hpp"
#include "cstore/consensus.hpp"
#include "cstore/crypto.hpp"

// Simulation scenarios and the identities and inputs derived from their seed.
// Everything a run consumes is reproducible from the scenario alone.
namespace cstore::netsim {

inline constexpr int kScenarioSchemaVersion = 1;

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { public_pows, private_trusted, sharded };

std::string_view to_string(Mode m);

struct LatencyModel {
  double min_ms = 20.0;
  double max_ms = 120.0;
};

// Per-GOP mining time = alpha * pixels + beta * quantizer search steps, scaled
// by a per-miner speed factor in [1 - speed_spread, 1 + speed_spread] and a
// per-job factor in [1 - jitter, 1 + jitter]. A missing alpha is calibrated so
// a full block takes block_interval_s at unit speed.
struct WorkModel {
  std::optional<double> alpha_s_per_pixel;
  double beta_s_per_step = 0.0;
  double speed_spread = 0.0;
  double jitter = 0.0;
};

struct AuditConfig {
  double interval_s = 30.0;
  std::size_t samples = 4;
  std::size_t challenge_k = storage::kDefaultChallengeCount;
};

struct Scenario {
  Mode mode = Mode::public_pows;
  std::uint64_t seed = 1;
  double duration_s = 600.0;
  double warmup_s = 60.0;

  std::uint32_t initiators = 1;
  std::uint32_t miners = 4;
  std::uint32_t storage_nodes = 3;
  std::uint32_t verifiers = 2;

  LatencyModel latency;
  double block_interval_s = 10.0;  // public/sharded work target
  std::size_t b_max = ledger::kDefaultBMax;

  std::uint32_t gop_size = 25;
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  double threshold_db = 30.0;
  double feed_rate_gops_per_s = 1.0;  // per initiator
  double video_motion = 1.0;
  std::uint32_t video_noise = 2;

  WorkModel work;
  AuditConfig audit;

  std::uint64_t storage_capacity_bytes = std::uint64_t{1} << 30;
  std::uint32_t chunk_size = storage::kDefaultChunkSize;
  std::uint64_t initial_credits = std::uint64_t{1} << 26;
  std::size_t challenge_k = storage::kDefaultChallengeCount;

  // Initiators broadcast only location and hash; receivers download the raw GOP.
  bool location_and_hash = false;

  double trusted_interval_s = 2.0;  // private_trusted block timer
  double epoch_s = 60.0;            // sharded assignment epoch
  double seal_time_s = 0.1;         // sharded encrypt+store+sign time
};

// Throws ScenarioError naming the offending key; unknown keys are rejected.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);

// Throws ScenarioError on contradictory or out-of-range values.
void validate(const Scenario& s);

// Node ids: initiators, then miners, storage nodes, verifiers.
struct Layout {
  std::uint32_t initiators, miners, storage, verifiers;

  explicit Layout(const Scenario& s)
      : initiators(s.initiators), miners(s.miners), storage(s.storage_nodes), verifiers(s.verifiers) {}

  ledger::NodeId initiator(std::uint32_t i) const { return i; }
  ledger::NodeId miner(std::uint32_t i) const { return initiators + i; }
  ledger::NodeId storage_node(std::uint32_t i) const { return initiators + miners + i; }
  ledger::NodeId verifier(std::uint32_t i) const { return initiators + miners + storage + i; }
  std::uint32_t total() const { return initiators + miners + storage + verifiers; }
};

crypto::SymmetricKey access_key(const Scenario& s);
crypto::KeyPair initiator_keys(const Scenario& s, std::uint32_t initiator);
consensus::Miner miner_identity(const Scenario& s, ledger::NodeId id);

// GOP j of initiator i completes at emit_time_us; its timestamp is that time in ms.
std::uint64_t emit_time_us(const Scenario& s, std::uint32_t initiator, std::uint64_t gop_index);
codec::Gop scenario_gop(const Scenario& s, std::uint32_t initiator, std::uint64_t gop_index);
consensus::GopTransaction scenario_tx(const Scenario& s, std::uint32_t initiator,
                                      std::uint64_t gop_index);

consensus::MiningParams mining_params(const Scenario& s);

}  // namespace cstore::netsim
