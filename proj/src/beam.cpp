#include "attnforge/beam.hpp"

#include <algorithm>
#include <future>

#include "attnforge/hashing.hpp"
#include "attnforge/metrics.hpp"

namespace attnforge {

std::string_view to_string(GateDecision decision) {
  return decision == GateDecision::Accept ? "accept" : "reject";
}

std::optional<double> NestingTrace::last_accepted() const {
  for (std::size_t k = gate_decisions.size(); k-- > 0;) {
    if (gate_decisions[k] == GateDecision::Accept) return entropy_by_layer[k];
  }
  return std::nullopt;
}

std::vector<double> NestingTrace::accepted_entropies() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < gate_decisions.size(); ++k) {
    if (gate_decisions[k] == GateDecision::Accept) out.push_back(entropy_by_layer[k]);
  }
  return out;
}

GateDecision monotonicity_gate(NestingTrace& trace, double new_entropy) {
  const auto last = trace.last_accepted();
  const auto decision =
      (!last || new_entropy >= *last) ? GateDecision::Accept : GateDecision::Reject;
  trace.entropy_by_layer.push_back(new_entropy);
  trace.gate_decisions.push_back(decision);
  return decision;
}

std::string BeamCandidate::content_hash() const { return attnforge::content_hash(prompt_text); }

nlohmann::ordered_json to_json(const NestingTrace& trace) {
  nlohmann::ordered_json j;
  j["entropy_by_layer"] = trace.entropy_by_layer;
  auto decisions = nlohmann::ordered_json::array();
  for (auto d : trace.gate_decisions) decisions.push_back(std::string(to_string(d)));
  j["gate_decisions"] = std::move(decisions);
  return j;
}

nlohmann::ordered_json to_json(const BeamCandidate& c) {
  nlohmann::ordered_json j;
  j["id"] = c.id;
  j["scenario_id"] = c.scenario_id;
  j["nesting_depth"] = c.nesting_depth;
  j["parent_id"] = c.parent_id ? nlohmann::ordered_json(*c.parent_id) : nlohmann::ordered_json();
  j["asw"] = c.asw ? nlohmann::ordered_json(*c.asw) : nlohmann::ordered_json();
  j["entropy"] = c.entropy ? nlohmann::ordered_json(*c.entropy) : nlohmann::ordered_json();
  j["content_hash"] = c.content_hash();
  j["trace"] = to_json(c.trace);
  j["prompt"] = c.prompt_text;
  return j;
}

Expansion expand_candidates(const BeamCandidate& parent, const TaskGenerator& generator,
                            std::size_t count, std::uint64_t salt) {
  GenerationRequest request{parent.prompt_text, parent.scenario_id, parent.nesting_depth + 1,
                            count, salt};
  Expansion out;
  for (auto& text : generator.generate(request)) {
    BeamCandidate c;
    c.prompt_text = std::move(text);
    c.nesting_depth = parent.nesting_depth + 1;
    c.parent_id = parent.id;
    c.scenario_id = parent.scenario_id;
    c.trace = parent.trace;
    out.candidates.push_back(std::move(c));
    if (out.candidates.size() == count) break;
  }
  out.exhausted = out.candidates.size() < count;
  return out;
}

namespace {

struct ScoreOutcome {
  std::optional<double> asw;
  std::optional<double> entropy;
  std::string error;
};

ScoreOutcome score_one(const BeamCandidate& c, const AttentionProvider& provider,
                       const ScoringOptions& options) {
  try {
    auto result = provider.provide({c.prompt_text, options.probe_steps, options.seed});
    MetricConfig config;
    config.entropy_source = EntropySource::Decode;
    config.norm_tol = options.norm_tol;
    return {attn_sens_words(result.decode, result.prompt.sensitive_indices, options.norm_tol),
            attn_entropy(result.decode, config), {}};
  } catch (const std::exception& e) {
    return {std::nullopt, std::nullopt, e.what()};
  }
}

}  // namespace

ScoringResult score_candidates(std::vector<BeamCandidate> candidates,
                               const AttentionProvider& provider, const ScoringOptions& options) {
  std::vector<ScoreOutcome> outcomes(candidates.size());
  const std::size_t jobs = std::max<std::size_t>(options.jobs, 1);
  if (jobs == 1) {
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      outcomes[k] = score_one(candidates[k], provider, options);
    }
  } else {
    for (std::size_t begin = 0; begin < candidates.size(); begin += jobs) {
      std::vector<std::future<ScoreOutcome>> batch;
      const std::size_t end = std::min(begin + jobs, candidates.size());
      for (std::size_t k = begin; k < end; ++k) {
        batch.push_back(std::async(std::launch::async, score_one, std::cref(candidates[k]),
                                   std::cref(provider), std::cref(options)));
      }
      for (std::size_t k = begin; k < end; ++k) outcomes[k] = batch[k - begin].get();
    }
  }

  ScoringResult result;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (!outcomes[k].error.empty()) {
      result.dropped.push_back("candidate " + candidates[k].content_hash() + ": " +
                               outcomes[k].error);
      continue;
    }
    candidates[k].asw = outcomes[k].asw;
    candidates[k].entropy = outcomes[k].entropy;
    result.scored.push_back(std::move(candidates[k]));
  }
  return result;
}

std::vector<BeamCandidate> select_beam(const std::vector<BeamCandidate>& candidates,
                                       std::size_t top_k, std::size_t beam_width) {
  if (candidates.empty()) throw std::invalid_argument("beam selection needs candidates");
  if (beam_width < 1 || beam_width > top_k) {
    throw std::invalid_argument("beam selection needs 1 <= beam_width <= top_k");
  }
  struct Ranked {
    const BeamCandidate* c;
    std::string hash;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (!c.scored()) throw std::invalid_argument("beam selection needs scored candidates");
    ranked.push_back({&c, c.content_hash()});
  }

  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (*a.c->asw != *b.c->asw) return *a.c->asw < *b.c->asw;
    if (a.hash != b.hash) return a.hash < b.hash;
    return a.c->id < b.c->id;
  });
  ranked.resize(std::min(top_k, ranked.size()));

  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (*a.c->entropy != *b.c->entropy) return *a.c->entropy > *b.c->entropy;
    if (a.hash != b.hash) return a.hash < b.hash;
    return a.c->id < b.c->id;
  });
  ranked.resize(std::min(beam_width, ranked.size()));

  std::vector<BeamCandidate> beam;
  beam.reserve(ranked.size());
  for (const auto& r : ranked) beam.push_back(*r.c);
  return beam;
}

std::vector<BeamCandidate> score_and_select(std::vector<BeamCandidate> candidates,
                                            const AttentionProvider& provider,
                                            const ScoringOptions& options, std::size_t top_k,
                                            std::size_t beam_width) {
  if (candidates.empty()) throw std::invalid_argument("beam selection needs candidates");
  auto result = score_candidates(std::move(candidates), provider, options);
  if (result.scored.empty()) {
    throw ProviderError("every candidate was dropped: " + result.dropped.front());
  }
  return select_beam(result.scored, top_k, beam_width);
}

}  // namespace attnforge
