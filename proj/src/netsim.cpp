#include "cstore/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cstore/consensus.hpp"
#include "cstore/rng.hpp"

namespace cstore::netsim {

double theoretical_pps(double gop_size, double gops_per_block, double block_interval_s) {
  for (double v : {gop_size, gops_per_block, block_interval_s})
    if (!std::isfinite(v) || v <= 0) throw std::invalid_argument("theoretical_pps: arguments must be positive");
  return gop_size * gops_per_block / block_interval_s;
}

namespace {

using consensus::GopTransaction;
using crypto::Digest;
using ledger::Block;
using ledger::NodeId;
using Time = std::uint64_t;  // microseconds
using TxKey = std::pair<std::uint64_t, std::uint64_t>;  // (video, gop index)

Time to_us(double s) { return static_cast<Time>(std::llround(s * 1e6)); }
double to_s(Time t) { return static_cast<double>(t) / 1e6; }

enum class Role { initiator, miner, storage, verifier };

std::string_view role_name(Role r) {
  switch (r) {
    case Role::initiator: return "initiator";
    case Role::miner: return "miner";
    case Role::storage: return "storage";
    case Role::verifier: return "verifier";
  }
  return "?";
}

enum class Kind { emit_gop, deliver_tx, deliver_block, job_done, private_tick, audit_tick, compress_done, seal_done };

struct Event {
  Time t = 0;
  std::uint64_t seq = 0;
  Kind kind = Kind::emit_gop;
  NodeId node = 0;
  std::uint64_t arg = 0;
  TxKey key{};
  std::shared_ptr<const Block> block;
  std::uint64_t size = 0;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.t, a.seq) > std::tie(b.t, b.seq);
  }
};

struct Node {
  NodeId id = 0;
  Role role = Role::verifier;
  bool keeps_chain = false;
  consensus::ChainState state;
  consensus::VerifierCache cache;
  std::set<TxKey> known;
  Digest last_tip;
  std::uint64_t rejected = 0;

  std::optional<consensus::Miner> miner;
  double speed = 1.0;
  std::optional<Rng> jitter_rng;

  // public mining job
  bool busy = false;
  std::uint64_t job_id = 0;
  Digest job_parent;
  std::vector<TxKey> job_keys;

  // sharded pipeline
  std::deque<TxKey> compress_queue;
  std::set<TxKey> queued;
  std::set<TxKey> ready;
  bool compressing = false;
  bool sealing = false;
  std::uint64_t seal_id = 0;
  Digest seal_parent;
  TxKey seal_group{};

  explicit Node(ledger::ChainParams p) : state(p) {}
};

class Simulator {
 public:
  explicit Simulator(const Scenario& s)
      : s_(s),
        layout_(s),
        access_key_(access_key(s)),
        params_(mining_params(s)),
        latency_rng_(Rng::derive(s.seed, "latency")),
        net_{storage_, credits_, access_key_},
        auditor_{Rng::derive(s.seed, "auditor").next(), s.audit.samples, s.audit.challenge_k, 0} {
    validate(s_);
    chain_params_ = ledger::ChainParams{s_.b_max};
    end_ = to_us(s_.duration_s);
    build_nodes();
    calibrate();
    check_capacity();
  }

  RunResult run() {
    for (std::uint32_t i = 0; i < s_.initiators; ++i) schedule_emit(i, 0);
    if (s_.mode == Mode::private_trusted) push(to_us(s_.trusted_interval_s), Kind::private_tick, sequencer_id());
    push(to_us(s_.audit.interval_s), Kind::audit_tick, 0);

    while (!queue_.empty()) {
      Event ev = queue_.top();
      if (ev.t > end_) break;
      queue_.pop();
      now_ = ev.t;
      ++m_.events_processed;
      dispatch(ev);
    }
    while (!queue_.empty()) {
      const Event& ev = queue_.top();
      if (ev.kind == Kind::deliver_tx || ev.kind == Kind::deliver_block) m_.bytes_in_flight += ev.size;
      queue_.pop();
    }
    return finish();
  }

 private:
  // ---- setup

  void build_nodes() {
    for (std::uint32_t i = 0; i < layout_.total(); ++i) nodes_.emplace_back(chain_params_);
    Rng speed_rng = Rng::derive(s_.seed, "speed");
    for (std::uint32_t i = 0; i < layout_.total(); ++i) {
      Node& n = nodes_[i];
      n.id = i;
      if (i < layout_.miner(0)) {
        n.role = Role::initiator;
      } else if (i < layout_.storage_node(0)) {
        n.role = Role::miner;
        n.keeps_chain = true;
        n.miner = miner_identity(s_, i);
        n.speed = speed_rng.uniform(1.0 - s_.work.speed_spread, 1.0 + s_.work.speed_spread);
        n.jitter_rng = Rng::derive(s_.seed, "jitter", i);
        credits_.grant(i, s_.initial_credits);
      } else if (i < layout_.verifier(0)) {
        n.role = Role::storage;
        storage_.add(storage::StorageNode(i, s_.storage_capacity_bytes, s_.chunk_size));
      } else {
        n.role = Role::verifier;
        n.keeps_chain = true;
      }
      n.last_tip = n.state.chain().tip();
    }
    if (s_.mode == Mode::private_trusted) {
      Node& seq = nodes_[sequencer_id()];
      seq.keeps_chain = true;
      seq.miner = miner_identity(s_, seq.id);
      credits_.grant(seq.id, s_.initial_credits);
    }
    for (const Node& n : nodes_)
      if (n.keeps_chain) chain_nodes_.push_back(n.id);
  }

  void calibrate() {
    if (s_.work.alpha_s_per_pixel) {
      alpha_ = *s_.work.alpha_s_per_pixel;
      return;
    }
    const double pixels = static_cast<double>(s_.width) * s_.height * s_.gop_size;
    const auto probe = consensus::search_quantizer(scenario_gop(s_, 0, 0), params_.quantizer_ladder,
                                                   s_.threshold_db);
    const double per_gop = s_.block_interval_s / static_cast<double>(s_.b_max);
    const double rest = per_gop - s_.work.beta_s_per_step * static_cast<double>(probe.steps);
    if (rest < 0) m_.warnings.push_back("beta alone exceeds the block interval target; alpha set to 0");
    alpha_ = std::max(0.0, rest / pixels);
  }

  void check_capacity() {
    const double feed_pps = s_.feed_rate_gops_per_s * s_.initiators * s_.gop_size;
    double capacity = 0;
    switch (s_.mode) {
      case Mode::public_pows: capacity = theoretical_pps(s_.gop_size, s_.b_max, s_.block_interval_s); break;
      case Mode::private_trusted: capacity = theoretical_pps(s_.gop_size, s_.b_max, s_.trusted_interval_s); break;
      case Mode::sharded:
        capacity = s_.miners * theoretical_pps(s_.gop_size, s_.b_max, s_.block_interval_s);
        break;
    }
    if (feed_pps > 10.0 * capacity) {
      std::ostringstream w;
      w << "feed rate " << feed_pps << " pps exceeds mining capacity " << capacity << " pps by more than 10x";
      m_.warnings.push_back(w.str());
    }
  }

  NodeId sequencer_id() const { return layout_.initiator(0); }
  NodeId observer_id() const { return layout_.verifier(0); }

  // ---- events

  void push(Time t, Kind kind, NodeId node, std::uint64_t arg = 0, TxKey key = {},
            std::shared_ptr<const Block> block = nullptr, std::uint64_t size = 0) {
    queue_.push(Event{t, seq_++, kind, node, arg, key, std::move(block), size});
  }

  Time latency() {
    return static_cast<Time>(std::llround(latency_rng_.uniform(s_.latency.min_ms, s_.latency.max_ms) * 1000.0));
  }

  void send(NodeId to, Kind kind, std::uint64_t size, TxKey key, std::shared_ptr<const Block> block) {
    ++m_.messages_sent;
    m_.bytes_broadcast += size;
    push(now_ + latency(), kind, to, 0, key, std::move(block), size);
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case Kind::emit_gop: on_emit(static_cast<std::uint32_t>(ev.node), ev.arg); break;
      case Kind::deliver_tx:
        m_.bytes_delivered += ev.size;
        on_tx(nodes_[ev.node], ev.key);
        break;
      case Kind::deliver_block:
        m_.bytes_delivered += ev.size;
        receive_block(nodes_[ev.node], *ev.block);
        break;
      case Kind::job_done: on_job_done(nodes_[ev.node], ev.arg); break;
      case Kind::private_tick: on_private_tick(); break;
      case Kind::audit_tick: on_audit(); break;
      case Kind::compress_done: on_compress_done(nodes_[ev.node], ev.key); break;
      case Kind::seal_done: on_seal_done(nodes_[ev.node], ev.arg); break;
    }
  }

  void schedule_emit(std::uint32_t initiator, std::uint64_t j) {
    push(emit_time_us(s_, initiator, j), Kind::emit_gop, layout_.initiator(initiator), j);
  }

  void on_emit(std::uint32_t initiator, std::uint64_t j) {
    auto tx = std::make_shared<const GopTransaction>(scenario_tx(s_, initiator, j));
    const TxKey key{tx->video_id, tx->gop_index};
    archive_[key] = tx;
    ++m_.gops_emitted;

    std::uint64_t size = 0;
    if (s_.location_and_hash) {
      // video, index, timestamp, metadata, digest, pubkey, signature, location digest
      wire::Encoder e;
      e.u64(tx->video_id);
      e.u64(tx->gop_index);
      e.u64(tx->timestamp_ms);
      e.bytes(tx->sensor_metadata);
      e.digest(tx->raw_digest);
      e.bytes(tx->initiator_pubkey.bytes);
      e.bytes(tx->signature.bytes);
      e.digest(tx->raw_digest);
      size = e.buffer().size();
    } else {
      size = wire::to_bytes(*tx).size();
    }
    const NodeId self = layout_.initiator(initiator);
    for (NodeId id : chain_nodes_) {
      if (id == self) {
        on_tx(nodes_[id], key);
        continue;
      }
      send(id, Kind::deliver_tx, size, key, nullptr);
    }
    schedule_emit(initiator, j + 1);
  }

  void on_tx(Node& n, const TxKey& key) {
    if (!n.known.insert(key).second) return;
    const auto& tx = archive_.at(key);
    if (s_.location_and_hash && n.id != tx->video_id) m_.bytes_download += tx->raw_size();
    n.cache.insert(key.first, key.second, std::shared_ptr<const codec::Gop>(tx, &tx->gop), tx->raw_digest);
    if (n.role != Role::miner) return;
    if (s_.mode == Mode::public_pows) try_start_job(n);
    if (s_.mode == Mode::sharded) on_tx_sharded(n, key);
  }

  // ---- chain handling

  consensus::VerifyContext verify_context(const Node& n, const Digest& h) const {
    const std::uint64_t seed =
        crypto::Hasher().update(as_bytes("cstore/sim/verify")).update_u64(s_.seed).update_u64(n.id).update(h).finish().prefix64();
    return consensus::VerifyContext{storage_, access_key_, s_.threshold_db, s_.challenge_k, seed, chain_params_};
  }

  void ensure_raw(Node& n, const Block& b) {
    for (const auto& sb : b.subblocks) {
      if (n.cache.find(sb.video_id, sb.gop_index, sb.raw_gop_digest) != nullptr) continue;
      auto it = archive_.find({sb.video_id, sb.gop_index});
      if (it == archive_.end() || it->second->raw_digest != sb.raw_gop_digest) continue;
      const auto& tx = it->second;
      m_.bytes_download += tx->raw_size();
      n.cache.insert(sb.video_id, sb.gop_index, std::shared_ptr<const codec::Gop>(tx, &tx->gop), tx->raw_digest);
    }
  }

  void receive_block(Node& n, const Block& b) {
    if (!n.keeps_chain) return;
    const Digest h = ledger::block_hash(b);
    if (n.state.chain().contains(h)) return;
    auto parent = n.state.parent_view(b.prev_block_hash);
    if (!parent) {
      n.state.chain().validate_and_append(b);
      return;
    }
    ensure_raw(n, b);
    for (const auto& sb : b.subblocks) m_.bytes_storage += sb.storage.object_size;
    auto outcome = consensus::verify_block(b, n.cache, *parent, verify_context(n, h));
    if (!outcome.accepted()) {
      ++n.rejected;
      ++m_.rejected_blocks;
      ++m_.rejections_by_reason[std::string(ledger::to_string(outcome.rejection->reason))];
      return;
    }
    accept(n, b, h, std::move(outcome.content_after));
  }

  void accept(Node& n, const Block& b, const Digest& h, consensus::ContentState content) {
    auto r = n.state.append_verified(b, std::move(content));
    if (r.status != ledger::AppendStatus::appended) return;
    for (const auto& sb : b.subblocks) n.cache.evict(sb.video_id, sb.gop_index);
    if (n.id == observer_id()) {
      observed_[h] = {b.height, now_};
      consensus::reward(b.miner_id, b, credits_);
    }
    for (const Block& child : n.state.chain().take_orphans_of(h)) receive_block(n, child);
    tip_changed(n);
  }

  void broadcast_block(const Node& from, const Block& b) {
    auto shared = std::make_shared<const Block>(b);
    const std::uint64_t size = wire::to_bytes(b).size();
    for (NodeId id : chain_nodes_)
      if (id != from.id) send(id, Kind::deliver_block, size, {}, shared);
  }

  void tip_changed(Node& n) {
    const Digest tip = n.state.chain().tip();
    if (tip == n.last_tip) return;
    n.last_tip = tip;
    if (n.role != Role::miner) return;
    if (s_.mode == Mode::public_pows) {
      if (n.busy && n.job_parent != tip) n.busy = false;
      try_start_job(n);
    } else if (s_.mode == Mode::sharded) {
      if (n.sealing && n.seal_parent != tip) n.sealing = false;
      try_seal(n);
    }
  }

  const consensus::ContentState& tip_content(const Node& n) const {
    return *n.state.content_at(n.state.chain().tip());
  }

  // Contiguous uncovered GOPs per video, merged in capture order.
  std::vector<TxKey> eligible(const Node& n, std::size_t limit) const {
    const auto& content = tip_content(n);
    std::vector<std::pair<std::uint64_t, TxKey>> candidates;
    auto it = n.known.begin();
    while (it != n.known.end()) {
      const std::uint64_t video = it->first;
      auto c = content.find(video);
      std::uint64_t next = c == content.end() ? 0 : c->second.next_gop_index;
      auto pos = n.known.lower_bound({video, next});
      while (pos != n.known.end() && pos->first == video && pos->second == next && candidates.size() < 4 * limit + 64) {
        candidates.push_back({archive_.at(*pos)->timestamp_ms, *pos});
        ++next;
        ++pos;
      }
      it = n.known.lower_bound({video + 1, 0});
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
      return std::tie(a.first, a.second.first, a.second.second) < std::tie(b.first, b.second.first, b.second.second);
    });
    std::vector<TxKey> out;
    for (std::size_t i = 0; i < candidates.size() && out.size() < limit; ++i) out.push_back(candidates[i].second);
    return out;
  }

  std::vector<GopTransaction> transactions(const std::vector<TxKey>& keys) const {
    std::vector<GopTransaction> txs;
    txs.reserve(keys.size());
    for (const auto& k : keys) txs.push_back(*archive_.at(k));
    return txs;
  }

  double work_seconds(Node& n, const std::vector<TxKey>& keys) {
    double total = 0;
    for (const auto& k : keys) {
      auto it = search_memo_.find(k);
      if (it == search_memo_.end()) {
        it = search_memo_
                 .emplace(k, consensus::search_quantizer(archive_.at(k)->gop, params_.quantizer_ladder,
                                                         params_.threshold_db))
                 .first;
      }
      const double pixels = static_cast<double>(archive_.at(k)->gop.frames.size()) * s_.width * s_.height;
      total += alpha_ * pixels + s_.work.beta_s_per_step * static_cast<double>(it->second.steps);
    }
    const double j = n.jitter_rng->uniform(1.0 - s_.work.jitter, 1.0 + s_.work.jitter);
    return total * n.speed * j;
  }

  std::optional<consensus::MiningResult> mine_now(Node& n, const std::vector<TxKey>& keys, const Digest& parent_hash) {
    auto parent = n.state.parent_view(parent_hash);
    if (!parent) return std::nullopt;
    try {
      auto res = consensus::mine(transactions(keys), params_, *n.miner, net_, *parent, now_ / 1000, &search_memo_);
      for (const auto& sealed : res.sealed) m_.bytes_storage += sealed.ciphertext_size;
      ++m_.blocks_mined;
      return res;
    } catch (const consensus::ConsensusError& e) {
      note_warning(std::string("mining failed at node ") + std::to_string(n.id) + ": " + e.what());
      return std::nullopt;
    }
  }

  void publish(Node& n, consensus::MiningResult res) {
    const Digest h = ledger::block_hash(res.block);
    const Block block = res.block;
    broadcast_block(n, block);
    accept(n, block, h, std::move(res.content_after));
  }

  // ---- public PoWS

  void try_start_job(Node& n) {
    if (n.busy) return;
    auto keys = eligible(n, s_.b_max);
    if (keys.size() < s_.b_max) return;
    n.busy = true;
    n.job_keys = std::move(keys);
    n.job_parent = n.state.chain().tip();
    const double w = work_seconds(n, n.job_keys);
    push(now_ + std::max<Time>(1, to_us(w)), Kind::job_done, n.id, ++n.job_id);
  }

  void on_job_done(Node& n, std::uint64_t job) {
    if (!n.busy || job != n.job_id) return;
    n.busy = false;
    auto res = mine_now(n, n.job_keys, n.job_parent);
    if (res) publish(n, std::move(*res));
    else try_start_job(n);
  }

  // ---- private trusted

  void on_private_tick() {
    Node& n = nodes_[sequencer_id()];
    auto keys = eligible(n, s_.b_max);
    if (!keys.empty()) {
      auto res = mine_now(n, keys, n.state.chain().tip());
      if (res) publish(n, std::move(*res));
    }
    push(now_ + to_us(s_.trusted_interval_s), Kind::private_tick, n.id);
  }

  // ---- sharded

  NodeId group_owner(const TxKey& group) const {
    const std::uint64_t epoch =
        emit_time_us(s_, static_cast<std::uint32_t>(group.first), group.second) / to_us(s_.epoch_s);
    NodeId best = layout_.miner(0);
    Digest best_score;
    for (std::uint32_t i = 0; i < s_.miners; ++i) {
      const NodeId id = layout_.miner(i);
      const Digest score = crypto::Hasher()
                               .update(as_bytes("cstore/sim/shard"))
                               .update_u64(id)
                               .update_u64(epoch)
                               .update_u64(group.first)
                               .update_u64(group.second)
                               .finish();
      if (i == 0 || score > best_score) {
        best = id;
        best_score = score;
      }
    }
    return best;
  }

  std::vector<TxKey> group_keys(const TxKey& group) const {
    std::vector<TxKey> keys;
    for (std::uint64_t j = 0; j < s_.b_max; ++j) keys.push_back({group.first, group.second + j});
    return keys;
  }

  void on_tx_sharded(Node& n, const TxKey& key) {
    const TxKey group{key.first, key.second / s_.b_max * s_.b_max};
    if (n.queued.count(group) != 0 || group_owner(group) != n.id) return;
    for (const auto& k : group_keys(group))
      if (n.known.count(k) == 0) return;
    n.queued.insert(group);
    n.compress_queue.push_back(group);
    start_compress(n);
  }

  void start_compress(Node& n) {
    if (n.compressing || n.compress_queue.empty()) return;
    n.compressing = true;
    const TxKey group = n.compress_queue.front();
    const double w = work_seconds(n, group_keys(group));
    push(now_ + std::max<Time>(1, to_us(w)), Kind::compress_done, n.id, 0, group);
  }

  void on_compress_done(Node& n, const TxKey& group) {
    n.compress_queue.pop_front();
    n.compressing = false;
    n.ready.insert(group);
    start_compress(n);
    try_seal(n);
  }

  void try_seal(Node& n) {
    if (n.sealing) return;
    const auto& content = tip_content(n);
    for (auto it = n.ready.begin(); it != n.ready.end();) {
      auto c = content.find(it->first);
      const std::uint64_t next = c == content.end() ? 0 : c->second.next_gop_index;
      if (next > it->second) {
        it = n.ready.erase(it);
        continue;
      }
      if (next == it->second) {
        n.sealing = true;
        n.seal_group = *it;
        n.seal_parent = n.state.chain().tip();
        push(now_ + std::max<Time>(1, to_us(s_.seal_time_s)), Kind::seal_done, n.id, ++n.seal_id);
        return;
      }
      ++it;
    }
  }

  void on_seal_done(Node& n, std::uint64_t id) {
    if (!n.sealing || id != n.seal_id) return;
    n.sealing = false;
    auto res = mine_now(n, group_keys(n.seal_group), n.seal_parent);
    if (res) {
      n.ready.erase(n.seal_group);
      publish(n, std::move(*res));
    }
    try_seal(n);
  }

  // ---- auditing

  void on_audit() {
    const auto chain = nodes_[observer_id()].state.chain().canonical();
    consensus::accrue_holding(chain, credits_);
    auto report = storage::audit_round(auditor_, chain, storage_, &credits_);
    ++m_.audit_rounds;
    m_.audit_samples += report.samples.size();
    m_.audit_failures += report.failures;
    credits_.settle_all();
    push(now_ + to_us(s_.audit.interval_s), Kind::audit_tick, 0);
  }

  void note_warning(std::string w) {
    if (m_.warnings.size() < 32) m_.warnings.push_back(std::move(w));
  }

  // ---- results

  RunResult finish() {
    m_.mode = std::string(to_string(s_.mode));
    m_.seed = s_.seed;
    m_.duration_s = s_.duration_s;
    m_.warmup_s = s_.warmup_s;
    m_.alpha_s_per_pixel = alpha_;

    RunResult out;
    const Node& obs = nodes_[observer_id()];
    const auto canonical = obs.state.chain().canonical();
    const Time warm = to_us(s_.warmup_s);
    std::set<Digest> on_chain;
    std::vector<double> window_times;
    for (const Block* b : canonical) {
      const Digest h = ledger::block_hash(*b);
      on_chain.insert(h);
      if (b->height == 0) continue;
      out.canonical.push_back(*b);
      const Time t = observed_.at(h).second;
      BlockRecord rec{b->height, to_s(t), b->miner_id, b->subblocks.size(), 0, h.hex()};
      for (const auto& sb : b->subblocks) {
        rec.frames += sb.codec.frame_count;
        m_.raw_bytes += std::uint64_t{sb.codec.width} * sb.codec.height * sb.codec.frame_count;
        m_.stored_ciphertext_bytes += sb.storage.object_size;
        ++m_.committed_gops;
      }
      if (t >= warm && t <= end_) {
        m_.committed_frames += rec.frames;
        window_times.push_back(to_s(t));
      }
      m_.blocks.push_back(std::move(rec));
    }
    m_.canonical_height = obs.state.chain().tip_height();
    m_.committed_pps = static_cast<double>(m_.committed_frames) / (s_.duration_s - s_.warmup_s);
    if (window_times.size() >= 2)
      m_.mean_block_interval_s = (window_times.back() - window_times.front()) / static_cast<double>(window_times.size() - 1);
    if (m_.stored_ciphertext_bytes > 0)
      m_.compression_ratio = static_cast<double>(m_.raw_bytes) / static_cast<double>(m_.stored_ciphertext_bytes);

    std::map<std::uint64_t, std::size_t> per_height;
    for (const auto& [h, rec] : observed_) {
      ++per_height[rec.first];
      if (on_chain.count(h) == 0) ++m_.orphaned_blocks;
    }
    for (const auto& [height, count] : per_height)
      if (count > 1) ++m_.fork_count;

    for (const auto& [node, bal] : credits_.balances()) m_.credits[node] = bal;
    m_.credits_granted = credits_.total_granted();
    m_.credits_spent = credits_.total_spent();
    m_.credits_forfeited = credits_.total_forfeited();

    for (NodeId id : chain_nodes_) {
      const Node& n = nodes_[id];
      NodeSummary ns;
      ns.id = id;
      ns.role = std::string(role_name(n.role));
      ns.tip = n.state.chain().tip();
      ns.height = n.state.chain().tip_height();
      ns.rejected = n.rejected;
      for (const Block* b : n.state.chain().canonical()) ns.canonical.push_back(ledger::block_hash(*b));
      out.nodes.push_back(std::move(ns));
    }
    out.metrics = m_;
    out.storage = storage_;
    out.credits = credits_;
    return out;
  }

  Scenario s_;
  Layout layout_;
  crypto::SymmetricKey access_key_;
  consensus::MiningParams params_;
  ledger::ChainParams chain_params_;
  Rng latency_rng_;
  storage::StorageDirectory storage_;
  storage::CreditLedger credits_;
  consensus::Network net_;
  storage::Auditor auditor_;

  std::vector<Node> nodes_;
  std::vector<NodeId> chain_nodes_;
  std::map<TxKey, std::shared_ptr<const GopTransaction>> archive_;
  consensus::SearchCache search_memo_;
  std::map<Digest, std::pair<std::uint64_t, Time>> observed_;  // observer: hash -> (height, accept time)

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  Time now_ = 0;
  Time end_ = 0;
  double alpha_ = 0.0;
  Metrics m_;
};

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

}  // namespace

nlohmann::json Metrics::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["mode"] = mode;
  j["seed"] = seed;
  j["duration_s"] = duration_s;
  j["warmup_s"] = warmup_s;
  j["committed_frames"] = committed_frames;
  j["committed_pps"] = committed_pps;
  j["committed_gops"] = committed_gops;
  j["canonical_height"] = canonical_height;
  j["mean_block_interval_s"] = mean_block_interval_s;
  j["gops_emitted"] = gops_emitted;
  j["blocks_mined"] = blocks_mined;
  j["fork_count"] = fork_count;
  j["orphaned_blocks"] = orphaned_blocks;
  j["rejected_blocks"] = rejected_blocks;
  j["rejections_by_reason"] = rejections_by_reason;
  j["messages_sent"] = messages_sent;
  j["bytes_broadcast"] = bytes_broadcast;
  j["bytes_delivered"] = bytes_delivered;
  j["bytes_in_flight"] = bytes_in_flight;
  j["bytes_storage"] = bytes_storage;
  j["bytes_download"] = bytes_download;
  j["raw_bytes"] = raw_bytes;
  j["stored_ciphertext_bytes"] = stored_ciphertext_bytes;
  j["compression_ratio"] = compression_ratio;
  j["audit_rounds"] = audit_rounds;
  j["audit_samples"] = audit_samples;
  j["audit_failures"] = audit_failures;
  nlohmann::json c = nlohmann::json::object();
  for (const auto& [node, bal] : credits) c[std::to_string(node)] = bal;
  j["credits"] = c;
  j["credits_granted"] = credits_granted;
  j["credits_spent"] = credits_spent;
  j["credits_forfeited"] = credits_forfeited;
  j["alpha_s_per_pixel"] = alpha_s_per_pixel;
  j["events_processed"] = events_processed;
  j["warnings"] = warnings;
  return j;
}

std::string Metrics::to_csv() const {
  std::ostringstream o;
  o << "key,value\n";
  auto row = [&](const std::string& k, const std::string& v) { o << k << ',' << v << '\n'; };
  row("schema_version", std::to_string(kMetricsSchemaVersion));
  row("mode", mode);
  row("seed", std::to_string(seed));
  row("duration_s", fmt(duration_s));
  row("warmup_s", fmt(warmup_s));
  row("committed_frames", std::to_string(committed_frames));
  row("committed_pps", fmt(committed_pps));
  row("committed_gops", std::to_string(committed_gops));
  row("canonical_height", std::to_string(canonical_height));
  row("mean_block_interval_s", fmt(mean_block_interval_s));
  row("gops_emitted", std::to_string(gops_emitted));
  row("blocks_mined", std::to_string(blocks_mined));
  row("fork_count", std::to_string(fork_count));
  row("orphaned_blocks", std::to_string(orphaned_blocks));
  row("rejected_blocks", std::to_string(rejected_blocks));
  for (const auto& [r, n] : rejections_by_reason) row("rejected." + r, std::to_string(n));
  row("messages_sent", std::to_string(messages_sent));
  row("bytes_broadcast", std::to_string(bytes_broadcast));
  row("bytes_delivered", std::to_string(bytes_delivered));
  row("bytes_in_flight", std::to_string(bytes_in_flight));
  row("bytes_storage", std::to_string(bytes_storage));
  row("bytes_download", std::to_string(bytes_download));
  row("raw_bytes", std::to_string(raw_bytes));
  row("stored_ciphertext_bytes", std::to_string(stored_ciphertext_bytes));
  row("compression_ratio", fmt(compression_ratio));
  row("audit_rounds", std::to_string(audit_rounds));
  row("audit_samples", std::to_string(audit_samples));
  row("audit_failures", std::to_string(audit_failures));
  for (const auto& [node, bal] : credits) row("credits." + std::to_string(node), std::to_string(bal));
  row("credits_granted", std::to_string(credits_granted));
  row("credits_spent", std::to_string(credits_spent));
  row("credits_forfeited", std::to_string(credits_forfeited));
  row("alpha_s_per_pixel", fmt(alpha_s_per_pixel));
  row("events_processed", std::to_string(events_processed));
  row("warnings", std::to_string(warnings.size()));
  return o.str();
}

std::string Metrics::blocks_csv() const {
  std::ostringstream o;
  o << "height,accept_time_s,miner,subblocks,frames,hash\n";
  for (const auto& b : blocks)
    o << b.height << ',' << fmt(b.accept_time_s) << ',' << b.miner << ',' << b.subblocks << ',' << b.frames
      << ',' << b.hash << '\n';
  return o.str();
}

RunResult run(const Scenario& scenario) { return Simulator(scenario).run(); }

}  // namespace cstore::netsim
