#include "attnforge/hashing.hpp"

namespace attnforge {

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k) {
    out[static_cast<std::size_t>(k)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace attnforge
