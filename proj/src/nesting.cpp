#include "attnforge/nesting.hpp"

namespace attnforge {

std::size_t nesting_depth_of(std::string_view text) {
  std::size_t depth = 0;
  for (auto pos = text.find(kNestOpen); pos != std::string_view::npos;
       pos = text.find(kNestOpen, pos + kNestOpen.size())) {
    ++depth;
  }
  return depth;
}

std::string wrap_nested(std::string_view preamble, std::string_view inner,
                        std::string_view postamble) {
  std::string out;
  out.reserve(preamble.size() + inner.size() + postamble.size() + 16);
  out.append(preamble).append("\n").append(kNestOpen).append("\n");
  out.append(inner).append("\n").append(kNestClose);
  if (!postamble.empty()) out.append("\n").append(postamble);
  return out;
}

}  // namespace attnforge
