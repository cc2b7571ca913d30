#pragma once

// Beam search over nested-task candidates.
//
// Selection is two-stage: keep the K candidates with the lowest
// sensitive-word attention, then return the B of those with the highest
// attention entropy. Ties at either stage go to the smaller content hash
// (hex FNV-1a of the prompt text), then the smaller candidate id.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnforge/generator.hpp"
#include "attnforge/provider.hpp"

namespace attnforge {

enum class GateDecision { Accept, Reject };

std::string_view to_string(GateDecision decision);

/// Composite-prompt entropy after each added layer, with the gate verdicts.
struct NestingTrace {
  std::vector<double> entropy_by_layer;
  std::vector<GateDecision> gate_decisions;

  /// Entropy of the most recent accepted layer.
  std::optional<double> last_accepted() const;
  std::vector<double> accepted_entropies() const;
};

/// Accepts iff new_entropy >= the last accepted entropy (an empty trace always
/// accepts). Appends the entropy and the decision to the trace either way.
GateDecision monotonicity_gate(NestingTrace& trace, double new_entropy);

struct BeamCandidate {
  std::uint64_t id = 0;
  std::string prompt_text;
  std::size_t nesting_depth = 0;
  std::optional<double> asw;
  std::optional<double> entropy;
  std::optional<std::uint64_t> parent_id;
  std::string scenario_id;
  NestingTrace trace;

  bool scored() const { return asw.has_value() && entropy.has_value(); }
  std::string content_hash() const;
};

nlohmann::ordered_json to_json(const BeamCandidate& candidate);
nlohmann::ordered_json to_json(const NestingTrace& trace);

struct Expansion {
  std::vector<BeamCandidate> candidates;
  bool exhausted = false;  // the generator produced fewer than requested
};

/// Nested rewrites of `parent`, one layer deeper, in the parent's scenario.
/// Metrics are unset; ids are left at 0 for the caller to assign.
Expansion expand_candidates(const BeamCandidate& parent, const TaskGenerator& generator,
                            std::size_t count, std::uint64_t salt = 0);

struct ScoringOptions {
  std::size_t probe_steps = kDefaultProbeSteps;
  std::uint64_t seed = 0;
  double norm_tol = kDefaultNormTol;
  std::size_t jobs = 1;  // concurrent provider calls
};

struct ScoringResult {
  std::vector<BeamCandidate> scored;  // input order, failures removed
  std::vector<std::string> dropped;   // one message per failed candidate
};

/// Fills asw (decode tensor) and normalized decode entropy for each
/// candidate. A provider failure drops that candidate.
ScoringResult score_candidates(std::vector<BeamCandidate> candidates,
                               const AttentionProvider& provider, const ScoringOptions& options);

/// Two-stage selection over scored candidates. Throws std::invalid_argument
/// for an empty list, unscored candidates, or 1 <= beam_width <= top_k not
/// holding. Returns at most beam_width candidates in stage-two order.
std::vector<BeamCandidate> select_beam(const std::vector<BeamCandidate>& candidates,
                                       std::size_t top_k, std::size_t beam_width);

/// score_candidates + select_beam. Throws ProviderError if every candidate
/// was dropped.
std::vector<BeamCandidate> score_and_select(std::vector<BeamCandidate> candidates,
                                            const AttentionProvider& provider,
                                            const ScoringOptions& options, std::size_t top_k,
                                            std::size_t beam_width);

}  // namespace attnforge
