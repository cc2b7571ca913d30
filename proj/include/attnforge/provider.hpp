#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "attnforge/attention.hpp"

namespace attnforge {

inline constexpr std::size_t kDefaultProbeSteps = 8;

struct ProviderRequest {
  std::string prompt_text;
  std::size_t probe_steps = kDefaultProbeSteps;  // 0 = prefill only
  std::uint64_t seed = 0;                        // synthetic provider only
};

struct ProviderResult {
  TokenizedPrompt prompt;
  AttentionTensor decode;
  PrefillAttentionMatrix prefill;
};

/// Base of every provider failure: transport, protocol, missing fixture.
class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FixtureMissingError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Source of attention for a prompt. provide() must be reentrant: callers may
/// score several prompts concurrently.
class AttentionProvider {
 public:
  virtual ~AttentionProvider() = default;

  /// Tokens, sensitive set, decode tensor and prefill matrix with a common M.
  /// The decode tensor has T = max(probe_steps, 1).
  virtual ProviderResult provide(const ProviderRequest& request) const = 0;

  virtual std::string id() const = 0;
};

/// Whitespace-plus-punctuation tokenizer: each maximal run of word bytes is a
/// token, each other non-space byte is a token of its own, whitespace is
/// dropped.
std::vector<Token> basic_tokenize(std::string_view text);

/// Checks the result's internal consistency (common M, valid tensors at
/// norm_tol, valid prompt). Throws ProviderError describing the violation.
void check_result(const ProviderResult& result, double norm_tol = kDefaultNormTol);

}  // namespace attnforge
