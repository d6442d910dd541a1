#include "oracles/merkle_ref.hpp"

#include <stdexcept>

namespace oracle {

Hash node_hash(const Hash& left, const Hash& right) {
  std::vector<std::uint8_t> buf(left.begin(), left.end());
  buf.insert(buf.end(), right.begin(), right.end());
  return sha256(buf);
}

namespace {

std::vector<Hash> parents(const std::vector<Hash>& level) {
  std::vector<Hash> up;
  for (std::size_t i = 0; i < level.size(); i += 2) {
    const Hash& right = i + 1 < level.size() ? level[i + 1] : level[i];
    up.push_back(node_hash(level[i], right));
  }
  return up;
}

}  // namespace

Hash merkle_root(const std::vector<Hash>& leaves) {
  if (leaves.empty()) throw std::invalid_argument("no leaves");
  if (leaves.size() == 1) return leaves[0];
  return merkle_root(parents(leaves));
}

std::vector<PathStep> merkle_path(const std::vector<Hash>& leaves, std::size_t index) {
  if (index >= leaves.size()) throw std::out_of_range("index");
  if (leaves.size() == 1) return {};
  PathStep step;
  if (index % 2 == 1) {
    step.sibling = leaves[index - 1];
    step.sibling_on_left = true;
  } else {
    step.sibling = index + 1 < leaves.size() ? leaves[index + 1] : leaves[index];
  }
  auto rest = merkle_path(parents(leaves), index / 2);
  rest.insert(rest.begin(), step);
  return rest;
}

}  // namespace oracle
