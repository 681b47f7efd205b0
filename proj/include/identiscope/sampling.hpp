#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "identiscope/expr.hpp"
#include "identiscope/modular.hpp"

namespace identiscope {

/// Stable identity of a symbol for keyed sampling.
std::uint64_t symbol_key(const Symbol& s) noexcept;

/// Uniform residue in [1, p-1] determined by the key tuple.
inline Residue draw_residue(std::initializer_list<std::uint64_t> key, std::uint64_t p) {
  std::vector<std::uint64_t> k(key);
  return keyed_residue(k, p);
}

}  // namespace identiscope
