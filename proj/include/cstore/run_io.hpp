#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "cstore/crypto.hpp"
#include "cstore/ledger.hpp"
#include "cstore/netsim.hpp"
#include "cstore/scenario.hpp"
#include "cstore/storage.hpp"

// Run directories: manifest.json, metrics.json, metrics.csv, blocks.csv,
// chain.bin (observer's canonical chain) and storage.bin (every storage node).
// Raw GOPs are not written; they are regenerated from the scenario.
namespace cstore::netsim {

inline constexpr int kRunSchemaVersion = 1;

class RunIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunData {
  Scenario scenario;
  std::vector<ledger::Block> blocks;  // canonical, genesis excluded
  storage::StorageDirectory storage;
  crypto::SymmetricKey access_key;
};

void write_run(const std::filesystem::path& dir, const Scenario& scenario, const RunResult& result);
RunData load_run(const std::filesystem::path& dir);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView data);

}  // namespace cstore::netsim
