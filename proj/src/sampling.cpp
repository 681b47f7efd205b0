#include "identiscope/sampling.hpp"

namespace identiscope {

std::uint64_t symbol_key(const Symbol& s) noexcept {
  std::uint64_t h = fnv1a(s.name);
  h ^= (static_cast<std::uint64_t>(s.kind) + 1) * 0x9e3779b97f4a7c15ULL;
  h ^= (static_cast<std::uint64_t>(s.order) + 1) * 0xc2b2ae3d27d4eb4fULL;
  return h;
}

}  // namespace identiscope
