#pragma once

// Client for the attention sidecar, JSON over HTTP:
//
//   POST /tokenize  {text}                                -> {tokens: [[s, start, end], ...]}
//   POST /attention {text, probe_steps, mode: "full"}     -> {dims, decode_values, prefill_rows}
//   POST /attention {text, probe_steps, mode: "stats",
//                    sensitive_indices}                   -> {dims, entropy_sum,
//                                                             sens_mass_sum, prefill_entropy}
//
// A transport failure is retried once, then surfaces as SidecarTransportError.
// There is no fallback to another provider.

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnforge/lexicon.hpp"
#include "attnforge/metrics.hpp"
#include "attnforge/provider.hpp"

namespace attnforge {

inline constexpr const char* kSidecarUrlEnv = "ATTNFORGE_SIDECAR_URL";

class SidecarTransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class SidecarProtocolError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

struct SidecarOptions {
  std::string base_url;  // e.g. http://127.0.0.1:8765
  std::chrono::milliseconds timeout{30000};
  double norm_tol = kDefaultNormTol;
  int attempts = 2;  // first try plus one retry
};

/// Value of ATTNFORGE_SIDECAR_URL, if set and non-empty.
std::optional<std::string> sidecar_url_from_env();

// Response decoding, shared by the client and its tests. All throw
// SidecarProtocolError on schema or invariant violations.
std::vector<Token> parse_tokenize_response(const nlohmann::json& j, std::string_view text);
ProviderResult parse_full_response(const nlohmann::json& j, TokenizedPrompt prompt,
                                   double norm_tol);
AttentionStats parse_stats_response(const nlohmann::json& j);

class SidecarClient final : public AttentionProvider {
 public:
  SidecarClient(std::shared_ptr<const Lexicon> lexicon, SidecarOptions options);
  ~SidecarClient() override;

  std::vector<Token> tokenize(const std::string& text) const;
  ProviderResult provide(const ProviderRequest& request) const override;

  /// Tokenizes, tags the sensitive set and requests sufficient statistics.
  AttentionStats stats(const std::string& text, std::size_t probe_steps) const;

  std::string id() const override { return "sidecar"; }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  struct Transport;
  std::shared_ptr<const Lexicon> lexicon_;
  SidecarOptions options_;
  std::unique_ptr<Transport> transport_;
  mutable std::mutex wire_mutex_;
};

}  // namespace attnforge
