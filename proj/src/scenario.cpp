#include "cstore/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cstore/rng.hpp"

namespace cstore::netsim {

using nlohmann::json;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::public_pows: return "public_pows";
    case Mode::private_trusted: return "private_trusted";
    case Mode::sharded: return "sharded";
  }
  return "?";
}

namespace {

Mode mode_from(const std::string& s) {
  if (s == "public_pows") return Mode::public_pows;
  if (s == "private_trusted") return Mode::private_trusted;
  if (s == "sharded") return Mode::sharded;
  throw ScenarioError("mode: unknown value \"" + s + "\"");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ScenarioError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (allowed.count(k) == 0) throw ScenarioError(where + ": unknown key \"" + k + "\"");
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ScenarioError(where + key + ": " + e.what());
  }
}

crypto::Digest derive_digest(const Scenario& s, std::string_view label, std::uint64_t index) {
  return crypto::Hasher().update(as_bytes(label)).update_u64(s.seed).update_u64(index).finish();
}

}  // namespace

Scenario scenario_from_json(const json& j) {
  reject_unknown(j,
                 {"schema_version", "mode", "seed", "duration_s", "warmup_s", "nodes", "latency_ms",
                  "block_interval_s", "b_max", "gop_size", "width", "height", "threshold_db",
                  "feed_rate_gops_per_s", "video_motion", "video_noise", "work", "audit",
                  "storage_capacity_bytes", "chunk_size", "initial_credits", "challenge_k",
                  "location_and_hash", "trusted_interval_s", "epoch_s", "seal_time_s"},
                 "scenario");
  Scenario s;
  int version = kScenarioSchemaVersion;
  get(j, "schema_version", version, "");
  if (version != kScenarioSchemaVersion)
    throw ScenarioError("schema_version: unsupported " + std::to_string(version));
  std::string mode = std::string(to_string(s.mode));
  get(j, "mode", mode, "");
  s.mode = mode_from(mode);
  get(j, "seed", s.seed, "");
  get(j, "duration_s", s.duration_s, "");
  get(j, "warmup_s", s.warmup_s, "");
  if (auto it = j.find("nodes"); it != j.end()) {
    reject_unknown(*it, {"initiators", "miners", "storage", "verifiers"}, "nodes");
    get(*it, "initiators", s.initiators, "nodes.");
    get(*it, "miners", s.miners, "nodes.");
    get(*it, "storage", s.storage_nodes, "nodes.");
    get(*it, "verifiers", s.verifiers, "nodes.");
  }
  if (auto it = j.find("latency_ms"); it != j.end()) {
    reject_unknown(*it, {"min", "max"}, "latency_ms");
    get(*it, "min", s.latency.min_ms, "latency_ms.");
    get(*it, "max", s.latency.max_ms, "latency_ms.");
  }
  get(j, "block_interval_s", s.block_interval_s, "");
  get(j, "b_max", s.b_max, "");
  get(j, "gop_size", s.gop_size, "");
  get(j, "width", s.width, "");
  get(j, "height", s.height, "");
  get(j, "threshold_db", s.threshold_db, "");
  get(j, "feed_rate_gops_per_s", s.feed_rate_gops_per_s, "");
  get(j, "video_motion", s.video_motion, "");
  get(j, "video_noise", s.video_noise, "");
  if (auto it = j.find("work"); it != j.end()) {
    reject_unknown(*it, {"alpha_s_per_pixel", "beta_s_per_step", "speed_spread", "jitter"}, "work");
    if (auto a = it->find("alpha_s_per_pixel"); a != it->end() && !a->is_null()) {
      double alpha = 0;
      get(*it, "alpha_s_per_pixel", alpha, "work.");
      s.work.alpha_s_per_pixel = alpha;
    }
    get(*it, "beta_s_per_step", s.work.beta_s_per_step, "work.");
    get(*it, "speed_spread", s.work.speed_spread, "work.");
    get(*it, "jitter", s.work.jitter, "work.");
  }
  if (auto it = j.find("audit"); it != j.end()) {
    reject_unknown(*it, {"interval_s", "samples", "challenge_k"}, "audit");
    get(*it, "interval_s", s.audit.interval_s, "audit.");
    get(*it, "samples", s.audit.samples, "audit.");
    get(*it, "challenge_k", s.audit.challenge_k, "audit.");
  }
  get(j, "storage_capacity_bytes", s.storage_capacity_bytes, "");
  get(j, "chunk_size", s.chunk_size, "");
  get(j, "initial_credits", s.initial_credits, "");
  get(j, "challenge_k", s.challenge_k, "");
  get(j, "location_and_hash", s.location_and_hash, "");
  get(j, "trusted_interval_s", s.trusted_interval_s, "");
  get(j, "epoch_s", s.epoch_s, "");
  get(j, "seal_time_s", s.seal_time_s, "");
  validate(s);
  return s;
}

json to_json(const Scenario& s) {
  json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["mode"] = std::string(to_string(s.mode));
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["warmup_s"] = s.warmup_s;
  j["nodes"] = {{"initiators", s.initiators},
                {"miners", s.miners},
                {"storage", s.storage_nodes},
                {"verifiers", s.verifiers}};
  j["latency_ms"] = {{"min", s.latency.min_ms}, {"max", s.latency.max_ms}};
  j["block_interval_s"] = s.block_interval_s;
  j["b_max"] = s.b_max;
  j["gop_size"] = s.gop_size;
  j["width"] = s.width;
  j["height"] = s.height;
  j["threshold_db"] = s.threshold_db;
  j["feed_rate_gops_per_s"] = s.feed_rate_gops_per_s;
  j["video_motion"] = s.video_motion;
  j["video_noise"] = s.video_noise;
  j["work"] = {{"alpha_s_per_pixel", s.work.alpha_s_per_pixel ? json(*s.work.alpha_s_per_pixel) : json(nullptr)},
               {"beta_s_per_step", s.work.beta_s_per_step},
               {"speed_spread", s.work.speed_spread},
               {"jitter", s.work.jitter}};
  j["audit"] = {{"interval_s", s.audit.interval_s},
                {"samples", s.audit.samples},
                {"challenge_k", s.audit.challenge_k}};
  j["storage_capacity_bytes"] = s.storage_capacity_bytes;
  j["chunk_size"] = s.chunk_size;
  j["initial_credits"] = s.initial_credits;
  j["challenge_k"] = s.challenge_k;
  j["location_and_hash"] = s.location_and_hash;
  j["trusted_interval_s"] = s.trusted_interval_s;
  j["epoch_s"] = s.epoch_s;
  j["seal_time_s"] = s.seal_time_s;
  return j;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

void validate(const Scenario& s) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ScenarioError(what);
  };
  auto positive = [&](double v, const char* name) {
    need(std::isfinite(v) && v > 0, std::string(name) + " must be positive");
  };
  need(s.initiators >= 1 && s.miners >= 1 && s.storage_nodes >= 1 && s.verifiers >= 1,
       "nodes: every role needs at least one node");
  positive(s.duration_s, "duration_s");
  need(std::isfinite(s.warmup_s) && s.warmup_s >= 0 && s.warmup_s < s.duration_s,
       "warmup_s must be in [0, duration_s)");
  need(std::isfinite(s.latency.min_ms) && s.latency.min_ms >= 0 && s.latency.max_ms >= s.latency.min_ms &&
           std::isfinite(s.latency.max_ms),
       "latency_ms: need 0 <= min <= max");
  positive(s.block_interval_s, "block_interval_s");
  need(s.b_max >= 1, "b_max must be at least 1");
  need(s.gop_size >= 2, "gop_size must be at least 2");
  need(s.width >= 8 && s.height >= 8, "width and height must be at least 8");
  need(std::isfinite(s.threshold_db), "threshold_db must be finite");
  positive(s.feed_rate_gops_per_s, "feed_rate_gops_per_s");
  need(std::isfinite(s.video_motion) && s.video_motion >= 0, "video_motion must be non-negative");
  if (s.work.alpha_s_per_pixel)
    need(std::isfinite(*s.work.alpha_s_per_pixel) && *s.work.alpha_s_per_pixel >= 0,
         "work.alpha_s_per_pixel must be non-negative");
  need(std::isfinite(s.work.beta_s_per_step) && s.work.beta_s_per_step >= 0,
       "work.beta_s_per_step must be non-negative");
  need(s.work.speed_spread >= 0 && s.work.speed_spread < 1, "work.speed_spread must be in [0, 1)");
  need(s.work.jitter >= 0 && s.work.jitter < 1, "work.jitter must be in [0, 1)");
  positive(s.audit.interval_s, "audit.interval_s");
  need(s.audit.challenge_k >= 1 && s.challenge_k >= 1, "challenge_k must be at least 1");
  need(s.chunk_size >= 1, "chunk_size must be at least 1");
  positive(s.trusted_interval_s, "trusted_interval_s");
  positive(s.epoch_s, "epoch_s");
  need(std::isfinite(s.seal_time_s) && s.seal_time_s >= 0, "seal_time_s must be non-negative");
}

crypto::SymmetricKey access_key(const Scenario& s) {
  crypto::SymmetricKey k;
  k.bytes = derive_digest(s, "cstore/sim/access-key", 0).bytes;
  return k;
}

crypto::KeyPair initiator_keys(const Scenario& s, std::uint32_t initiator) {
  return crypto::KeyPair::from_seed(derive_digest(s, "cstore/sim/initiator", initiator));
}

consensus::Miner miner_identity(const Scenario& s, ledger::NodeId id) {
  return consensus::Miner::create(id, derive_digest(s, "cstore/sim/miner", id));
}

std::uint64_t emit_time_us(const Scenario& s, std::uint32_t initiator, std::uint64_t gop_index) {
  const double t = static_cast<double>(gop_index + 1) / s.feed_rate_gops_per_s;
  return static_cast<std::uint64_t>(std::llround(t * 1e6)) + std::uint64_t{initiator} * 1000;
}

codec::Gop scenario_gop(const Scenario& s, std::uint32_t initiator, std::uint64_t gop_index) {
  codec::SyntheticVideoParams p;
  p.width = s.width;
  p.height = s.height;
  p.gop_size = s.gop_size;
  p.seed = Rng::derive(s.seed, "video", initiator).next();
  p.motion = s.video_motion;
  p.noise = s.video_noise;
  codec::Gop g = codec::SyntheticVideo(p).gop(gop_index);
  g.timestamp_ms = emit_time_us(s, initiator, gop_index) / 1000;
  return g;
}

consensus::GopTransaction scenario_tx(const Scenario& s, std::uint32_t initiator,
                                      std::uint64_t gop_index) {
  std::ostringstream meta;
  meta << "camera=" << initiator << ";gop=" << gop_index << ";" << s.width << "x" << s.height;
  const std::string m = meta.str();
  return consensus::GopTransaction::create(scenario_gop(s, initiator, gop_index), initiator,
                                           Bytes(m.begin(), m.end()), initiator_keys(s, initiator));
}

consensus::MiningParams mining_params(const Scenario& s) {
  consensus::MiningParams p;
  p.b_max = s.b_max;
  p.threshold_db = s.threshold_db;
  p.chunk_size = s.chunk_size;
  p.challenge_k = s.challenge_k;
  return p;
}

}  // namespace cstore::netsim
