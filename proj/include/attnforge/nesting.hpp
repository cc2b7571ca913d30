#pragma once

// Textual markup for nested tasks. Every nesting layer wraps its inner task
// between kNestOpen and kNestClose on their own lines, so the depth of a
// composite prompt can be read back from the text alone.

#include <cstddef>
#include <string>
#include <string_view>

namespace attnforge {

inline constexpr std::string_view kNestOpen = "<<<";
inline constexpr std::string_view kNestClose = ">>>";

/// Number of kNestOpen markers in the text.
std::size_t nesting_depth_of(std::string_view text);

/// preamble + "\n<<<\n" + inner + "\n>>>" (+ "\n" + postamble when non-empty).
std::string wrap_nested(std::string_view preamble, std::string_view inner,
                        std::string_view postamble = {});

}  // namespace attnforge
