#pragma once

// Recorded attention fixtures. One JSON document per prompt:
//
//   {"text": "...",
//    "tokens": [["tok", start, end], ...],
//    "dims": {"T": .., "L": .., "H": .., "M": ..},
//    "decode_values": [... T*L*H*M numbers in (t, l, h, i) order ...],
//    "prefill_rows": [[...M numbers...], ... M rows ...]}

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnforge/lexicon.hpp"
#include "attnforge/provider.hpp"

namespace attnforge {

struct ReplayFixture {
  std::string text;
  std::vector<Token> tokens;
  AttentionTensor decode;
  PrefillAttentionMatrix prefill;

  bool operator==(const ReplayFixture&) const = default;
};

class FixtureFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::ordered_json to_json(const ReplayFixture& fixture);

/// Parses and validates (structure, normalization at norm_tol, token spans).
/// Throws FixtureFormatError.
ReplayFixture fixture_from_json(const nlohmann::json& j, double norm_tol = kDefaultNormTol);

ReplayFixture load_fixture(const std::filesystem::path& path, double norm_tol = kDefaultNormTol);
void store_fixture(const std::filesystem::path& path, const ReplayFixture& fixture);

/// Fixture capturing a provider result.
ReplayFixture fixture_from_result(const ProviderResult& result);

/// Serves fixtures keyed by exact prompt text. The stored tensors are returned
/// unchanged, whatever probe_steps the request asks for.
class ReplayProvider final : public AttentionProvider {
 public:
  ReplayProvider(std::shared_ptr<const Lexicon> lexicon, std::vector<ReplayFixture> fixtures);

  /// Loads a single fixture file, or every *.json file in a directory.
  static ReplayProvider from_path(std::shared_ptr<const Lexicon> lexicon,
                                  const std::filesystem::path& path);

  ProviderResult provide(const ProviderRequest& request) const override;
  std::string id() const override { return "replay"; }
  std::size_t size() const { return fixtures_.size(); }

 private:
  std::shared_ptr<const Lexicon> lexicon_;
  std::map<std::string, ReplayFixture> fixtures_;
};

}  // namespace attnforge
