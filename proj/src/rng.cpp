#include "zsq/rng.hpp"

namespace zsq {

std::uint64_t hash64(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t w : words) {
    h = mix64(h ^ mix64(w));
  }
  return h;
}

}  // namespace zsq
