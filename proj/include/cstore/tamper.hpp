#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cstore/ledger.hpp"
#include "cstore/run_io.hpp"

// Tampering with a finished run and the re-verification pass that finds it.
namespace cstore::netsim {

class TamperError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flag {
  std::uint64_t height = 0;
  std::optional<std::size_t> subblock;  // empty for a block-level flag
  std::uint64_t video_id = 0;
  std::uint64_t gop_index = 0;
  ledger::RejectReason reason = ledger::RejectReason::structural;
  bool inherited = false;  // flagged only because an ancestor was
  std::string detail;
};

struct DetectionReport {
  std::size_t blocks_checked = 0;
  std::size_t subblocks_checked = 0;
  std::vector<Flag> flags;

  bool clean() const { return flags.empty(); }
  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Walks the chain from genesis. Every subblock is re-checked against storage,
// its commitments and the regenerated raw GOP with every chunk challenged.
// Once a block fails, later blocks are flagged as inherited; once a GOP's
// content stops chaining to its predecessor, later GOPs of that video are.
DetectionReport detect_tampering(const RunData& run);

// Flips bits of one byte of a stored object. Throws TamperError when no node
// holds the address or the offset is past its end.
void flip_stored_byte(RunData& run, const crypto::Digest& address, std::uint64_t offset,
                      std::uint8_t mask = 0x01);

// Swaps the stored object of (video, gop) for a re-encoded variant of altered
// content, sealed under the original content key with the original chain header.
void replace_gop(RunData& run, std::uint64_t video_id, std::uint64_t gop_index);

// Names accepted by mutate_field.
const std::vector<std::string_view>& subblock_fields();

// Deterministic single-field corruption; variant selects among alternatives.
void mutate_field(ledger::SubBlock& sb, std::string_view field, std::uint64_t variant = 0);

// Mutates a committed subblock in place without re-signing.
void tamper_field(RunData& run, std::uint64_t height, std::size_t subblock, std::string_view field);

}  // namespace cstore::netsim
