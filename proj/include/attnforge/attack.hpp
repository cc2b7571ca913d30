#pragma once

// Multi-round attack session.
//
// The outer loop walks the generator's scenarios, never reusing one. Within a
// scenario the inner loop runs up to inner_limit attempts; each attempt
// expands the beam one nesting layer (or regenerates the deepest layer once
// max_nesting_layers is reached), scores the children, drops those failing
// the entropy gate, reselects the beam together with the incumbents and
// submits the best not-yet-submitted beam member to the target.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnforge/beam.hpp"
#include "attnforge/generator.hpp"
#include "attnforge/provider.hpp"
#include "attnforge/target.hpp"

namespace attnforge {

struct AttackConfig {
  std::size_t beam_width = 4;               // B
  std::size_t candidates_per_expansion = 8; // C
  std::size_t filter_top_k = 8;             // K
  std::size_t max_nesting_layers = 3;
  std::size_t inner_limit = 5;
  std::size_t outer_limit = 3;
  std::size_t probe_steps = kDefaultProbeSteps;
  std::uint64_t seed = 0;
  std::size_t scoring_jobs = 1;
  double norm_tol = kDefaultNormTol;

  /// Throws std::invalid_argument unless 1 <= B <= K <= C, layers >= 1 and
  /// both loop limits >= 1.
  void validate() const;
};

struct AttemptRecord {
  std::size_t outer_index = 0;
  std::size_t inner_index = 0;
  std::string scenario_id;
  std::size_t generated = 0;
  std::size_t dropped = 0;   // provider failures during scoring
  std::size_t accepted = 0;  // passed the entropy gate
  std::size_t rejected = 0;
  bool generator_exhausted = false;
  std::optional<BeamCandidate> submitted;
  std::optional<GateDecision> gate;  // verdict on the submitted candidate's last layer
  std::optional<double> best_asw;    // incumbent-inclusive minimum after selection
  std::string response;
  bool success = false;
  bool errored = false;
  std::string error;
  std::vector<std::string> warnings;
};

struct AttackSessionState {
  std::size_t inner_attempts = 0;  // attempts in the current scenario
  std::size_t outer_scenarios = 0;
  std::size_t total_attempts = 0;
  std::size_t queries = 0;         // target submissions
  std::vector<std::string> tried_scenarios;
  std::optional<BeamCandidate> best_candidate;
  std::vector<AttemptRecord> transcript;
};

struct AttackOutcome {
  bool success = false;
  std::string final_prompt;
  std::size_t queries = 0;
  AttackSessionState state;
  std::vector<NestingTrace> traces;  // trace of every submitted candidate
};

AttackOutcome run_attack(const std::string& query, TargetAdapter& target,
                         const SuccessJudge& judge, const AttentionProvider& provider,
                         const TaskGenerator& generator, const AttackConfig& config);

nlohmann::ordered_json to_json(const AttackConfig& config);
nlohmann::ordered_json to_json(const AttemptRecord& record);
/// Outcome summary: success, queries, final prompt and one compact entry per
/// attempt. The full transcript is emitted separately.
nlohmann::ordered_json to_json(const AttackOutcome& outcome);
nlohmann::ordered_json transcript_json(const AttackOutcome& outcome);

}  // namespace attnforge
