#pragma once

// Brute-force Merkle reference: builds every level recursively from scratch and
// derives paths by walking the recursion, sharing no code with the library.

#include <cstddef>
#include <vector>

#include "oracles/sodium_ref.hpp"

namespace oracle {

struct PathStep {
  Hash sibling;
  bool sibling_on_left = false;
};

Hash node_hash(const Hash& left, const Hash& right);
Hash merkle_root(const std::vector<Hash>& leaves);
std::vector<PathStep> merkle_path(const std::vector<Hash>& leaves, std::size_t index);

}  // namespace oracle
