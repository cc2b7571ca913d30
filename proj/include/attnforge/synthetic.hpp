#pragma once

// Deterministic synthetic attention.
//
// Each distribution (a decode slice or a causal prefill row) gives the
// sensitive positions a total mass of `focus`, split equally, and spreads the
// rest over the non-sensitive positions with seeded weights u^(1/dispersion),
// u uniform in (0, 1]. Large dispersion flattens the spread towards uniform;
// small dispersion concentrates it on a few positions. The result is
// renormalized to sum to one.
//
// Edge cases: with no sensitive positions the whole mass is residual; with no
// non-sensitive positions the whole mass is split over the sensitive ones.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>

#include "attnforge/attention.hpp"
#include "attnforge/lexicon.hpp"
#include "attnforge/provider.hpp"

namespace attnforge {

struct SyntheticProfile {
  double focus = 0.5;
  double dispersion = 1.0;  // > 0; +infinity gives a uniform residual
  std::uint64_t seed = 0;
};

inline constexpr double kUniformDispersion = std::numeric_limits<double>::infinity();

/// Throws std::invalid_argument unless focus is in [0, 1] and dispersion > 0.
void validate_profile(const SyntheticProfile& profile);

/// One distribution over `positions` entries. `is_sensitive[k]` marks the
/// sensitive ones; `stream` selects an independent PRNG stream.
std::vector<double> synth_distribution(const std::vector<bool>& is_sensitive,
                                       const SyntheticProfile& profile, std::uint64_t stream);

/// dims.tokens must equal prompt.size() (StructuralError otherwise).
AttentionTensor synth_generate(const TokenizedPrompt& prompt, const SyntheticProfile& profile,
                               const AttentionDims& dims);

/// Causal prefill: row i is a synthetic distribution over positions 0..i.
PrefillAttentionMatrix synth_prefill(const TokenizedPrompt& prompt,
                                     const SyntheticProfile& profile);

/// Chooses focus and dispersion for a prompt. The seed field of the returned
/// profile is ignored; the provider derives it from the request.
using ProfileRule = std::function<SyntheticProfile(const TokenizedPrompt&)>;

ProfileRule fixed_profile_rule(double focus, double dispersion);

/// Attention that drifts away from sensitive words as tasks are nested:
/// focus(d) = initial_focus * focus_decay^max(d-1, 0) and
/// dispersion(d) = base_dispersion * dispersion_growth^d, where d is the
/// nesting depth of the prompt text.
struct NestingDecay {
  double initial_focus = 0.6;
  double focus_decay = 0.3;
  double base_dispersion = 0.5;
  double dispersion_growth = 3.0;
};

ProfileRule nesting_decay_rule(NestingDecay decay = {});

struct SyntheticOptions {
  std::size_t layers = 2;
  std::size_t heads = 2;
};

class SyntheticProvider final : public AttentionProvider {
 public:
  SyntheticProvider(std::shared_ptr<const Lexicon> lexicon, ProfileRule rule,
                    SyntheticOptions options = {});

  ProviderResult provide(const ProviderRequest& request) const override;
  std::string id() const override { return "synthetic"; }

  /// Profile actually used for a request, seed included.
  SyntheticProfile profile_for(const TokenizedPrompt& prompt, std::uint64_t request_seed) const;

 private:
  std::shared_ptr<const Lexicon> lexicon_;
  ProfileRule rule_;
  SyntheticOptions options_;
};

/// Tokenizes with basic_tokenize and tags the sensitive set.
TokenizedPrompt tokenize_prompt(std::string_view text, const Lexicon& lexicon);

}  // namespace attnforge
