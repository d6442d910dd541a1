#include "cstore/run_io.hpp"

#include <fstream>
#include <iterator>

namespace cstore::netsim {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunIoError(path.string() + ": cannot open");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RunIoError(path.string() + ": cannot write");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw RunIoError(path.string() + ": write failed");
}

namespace {

void write_text(const fs::path& path, const std::string& text) { write_file(path, as_bytes(text)); }

}  // namespace

void write_run(const fs::path& dir, const Scenario& scenario, const RunResult& result) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["schema_version"] = kRunSchemaVersion;
  manifest["scenario"] = to_json(scenario);
  manifest["access_key"] = to_hex(access_key(scenario).bytes);
  manifest["canonical_height"] = result.metrics.canonical_height;
  manifest["tip"] = result.canonical.empty() ? ledger::block_hash(ledger::genesis_block()).hex()
                                             : ledger::block_hash(result.canonical.back()).hex();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "metrics.json", result.metrics.to_json().dump(2) + "\n");
  write_text(dir / "metrics.csv", result.metrics.to_csv());
  write_text(dir / "blocks.csv", result.metrics.blocks_csv());

  std::vector<const ledger::Block*> blocks;
  for (const auto& b : result.canonical) blocks.push_back(&b);
  write_file(dir / "chain.bin", ledger::dump_blocks(blocks));
  write_file(dir / "storage.bin", wire::to_bytes(result.storage));
}

RunData load_run(const fs::path& dir) {
  RunData out;
  nlohmann::json manifest;
  try {
    const Bytes text = read_file(dir / "manifest.json");
    manifest = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw RunIoError((dir / "manifest.json").string() + ": " + e.what());
  }
  if (manifest.value("schema_version", 0) != kRunSchemaVersion)
    throw RunIoError("unsupported run schema version");
  try {
    out.scenario = scenario_from_json(manifest.at("scenario"));
    const Bytes key = from_hex(manifest.at("access_key").get<std::string>());
    if (key.size() != out.access_key.bytes.size()) throw RunIoError("access_key has the wrong length");
    std::copy(key.begin(), key.end(), out.access_key.bytes.begin());
  } catch (const nlohmann::json::exception& e) {
    throw RunIoError(std::string("manifest: ") + e.what());
  }
  try {
    out.blocks = ledger::load_blocks(read_file(dir / "chain.bin"));
    out.storage = wire::from_bytes<storage::StorageDirectory>(read_file(dir / "storage.bin"));
  } catch (const wire::DecodeError& e) {
    throw RunIoError(std::string("run data: ") + e.what());
  }
  return out;
}

}  // namespace cstore::netsim
