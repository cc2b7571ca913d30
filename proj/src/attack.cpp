#include "attnforge/attack.hpp"

#include <algorithm>
#include <map>

#include "attnforge/hashing.hpp"

namespace attnforge {

void AttackConfig::validate() const {
  if (beam_width < 1 || beam_width > filter_top_k || filter_top_k > candidates_per_expansion) {
    throw std::invalid_argument(
        "attack config needs 1 <= beam width <= filter top-k <= candidates per expansion");
  }
  if (max_nesting_layers < 1) throw std::invalid_argument("max nesting layers must be >= 1");
  if (inner_limit < 1 || outer_limit < 1) {
    throw std::invalid_argument("inner and outer limits must be >= 1");
  }
}

namespace {

bool lower_asw(const BeamCandidate& a, const BeamCandidate& b) {
  if (*a.asw != *b.asw) return *a.asw < *b.asw;
  const auto ha = a.content_hash(), hb = b.content_hash();
  if (ha != hb) return ha < hb;
  return a.id < b.id;
}

std::optional<std::string> next_scenario(const std::vector<std::string>& catalog,
                                         std::size_t& cursor,
                                         const std::vector<std::string>& tried) {
  while (cursor < catalog.size()) {
    const auto& s = catalog[cursor++];
    if (std::find(tried.begin(), tried.end(), s) == tried.end()) return s;
  }
  return std::nullopt;
}

}  // namespace

AttackOutcome run_attack(const std::string& query, TargetAdapter& target,
                         const SuccessJudge& judge, const AttentionProvider& provider,
                         const TaskGenerator& generator, const AttackConfig& config) {
  config.validate();
  if (query.empty()) throw std::invalid_argument("attack query is empty");

  AttackOutcome outcome;
  AttackSessionState& state = outcome.state;
  const ScoringOptions scoring{config.probe_steps, config.seed, config.norm_tol,
                               config.scoring_jobs};
  const auto catalog = generator.scenarios();
  std::size_t cursor = 0;
  std::uint64_t next_id = 1;

  while (state.outer_scenarios < config.outer_limit) {
    const auto scenario = next_scenario(catalog, cursor, state.tried_scenarios);
    if (!scenario) break;
    state.tried_scenarios.push_back(*scenario);
    const std::size_t outer_index = state.outer_scenarios++;
    state.inner_attempts = 0;

    BeamCandidate root;
    root.id = next_id++;
    root.prompt_text = query;
    root.scenario_id = *scenario;
    std::map<std::uint64_t, BeamCandidate> archive{{root.id, root}};
    std::vector<BeamCandidate> beam{root};
    std::optional<BeamCandidate> incumbent;
    std::set<std::string> submitted_texts;

    for (std::size_t inner = 0; inner < config.inner_limit; ++inner) {
      ++state.inner_attempts;
      ++state.total_attempts;
      AttemptRecord rec;
      rec.outer_index = outer_index;
      rec.inner_index = inner;
      rec.scenario_id = *scenario;

      try {
        // Beam members at the depth cap are regenerated from their parents.
        std::vector<const BeamCandidate*> parents;
        std::set<std::uint64_t> parent_ids;
        for (const auto& b : beam) {
          const BeamCandidate* p = &b;
          if (b.nesting_depth >= config.max_nesting_layers && b.parent_id) {
            p = &archive.at(*b.parent_id);
          }
          if (parent_ids.insert(p->id).second) parents.push_back(p);
        }

        const std::uint64_t salt = mix64(config.seed ^ mix64(outer_index)) ^ mix64(inner + 1);
        std::vector<BeamCandidate> children;
        for (const auto* p : parents) {
          auto expansion = expand_candidates(*p, generator, config.candidates_per_expansion, salt);
          rec.generator_exhausted = rec.generator_exhausted || expansion.exhausted;
          for (auto& c : expansion.candidates) {
            c.id = next_id++;
            children.push_back(std::move(c));
          }
        }
        if (rec.generator_exhausted) {
          rec.warnings.push_back("generator returned fewer than " +
                                 std::to_string(config.candidates_per_expansion) +
                                 " candidates");
        }
        rec.generated = children.size();

        auto scored = score_candidates(std::move(children), provider, scoring);
        rec.dropped = scored.dropped.size();
        rec.warnings.insert(rec.warnings.end(), scored.dropped.begin(), scored.dropped.end());
        if (rec.generated > 0 && scored.scored.empty()) {
          throw ProviderError("every candidate was dropped: " + scored.dropped.front());
        }

        std::vector<BeamCandidate> pool;
        for (auto& c : scored.scored) {
          if (monotonicity_gate(c.trace, *c.entropy) == GateDecision::Accept) {
            ++rec.accepted;
            archive.emplace(c.id, c);
            pool.push_back(std::move(c));
          } else {
            ++rec.rejected;
          }
        }
        // Incumbents: the previous beam and the lowest-ASW candidate so far.
        auto in_pool = [&pool](std::uint64_t id) {
          return std::any_of(pool.begin(), pool.end(),
                             [id](const BeamCandidate& c) { return c.id == id; });
        };
        for (const auto& b : beam) {
          if (b.nesting_depth > 0 && !in_pool(b.id)) pool.push_back(b);
        }
        if (incumbent && !in_pool(incumbent->id)) pool.push_back(*incumbent);
        if (pool.empty()) throw ProviderError("no candidate survived scoring and gating");

        beam = select_beam(pool, config.filter_top_k, config.beam_width);
        incumbent = *std::min_element(pool.begin(), pool.end(), lower_asw);
        rec.best_asw = incumbent->asw;
        if (!state.best_candidate || lower_asw(*incumbent, *state.best_candidate)) {
          state.best_candidate = incumbent;
        }

        auto pick = std::find_if(beam.begin(), beam.end(), [&](const BeamCandidate& c) {
          return !submitted_texts.contains(c.prompt_text);
        });
        const BeamCandidate& chosen = pick != beam.end() ? *pick : beam.front();
        rec.submitted = chosen;
        if (!chosen.trace.gate_decisions.empty()) rec.gate = chosen.trace.gate_decisions.back();
        submitted_texts.insert(chosen.prompt_text);
        outcome.final_prompt = chosen.prompt_text;

        ++state.queries;
        outcome.traces.push_back(chosen.trace);
        rec.response = target.submit(chosen.prompt_text);
        rec.success = judge.judge(chosen, rec.response);
      } catch (const TargetTransportError& e) {
        rec.errored = true;
        rec.error = e.what();
      } catch (const ProviderError& e) {
        rec.errored = true;
        rec.error = e.what();
      }

      const bool success = rec.success;
      state.transcript.push_back(std::move(rec));
      if (success) {
        outcome.success = true;
        outcome.queries = state.queries;
        return outcome;
      }
    }
  }
  outcome.queries = state.queries;
  return outcome;
}

nlohmann::ordered_json to_json(const AttackConfig& c) {
  nlohmann::ordered_json j;
  j["beam_width"] = c.beam_width;
  j["candidates_per_expansion"] = c.candidates_per_expansion;
  j["filter_top_k"] = c.filter_top_k;
  j["max_nesting_layers"] = c.max_nesting_layers;
  j["inner_limit"] = c.inner_limit;
  j["outer_limit"] = c.outer_limit;
  j["probe_steps"] = c.probe_steps;
  j["seed"] = c.seed;
  return j;
}

nlohmann::ordered_json to_json(const AttemptRecord& r) {
  nlohmann::ordered_json j;
  j["outer"] = r.outer_index;
  j["inner"] = r.inner_index;
  j["scenario"] = r.scenario_id;
  j["generated"] = r.generated;
  j["dropped"] = r.dropped;
  j["accepted"] = r.accepted;
  j["rejected"] = r.rejected;
  j["generator_exhausted"] = r.generator_exhausted;
  j["submitted"] = r.submitted ? to_json(*r.submitted) : nlohmann::ordered_json();
  j["gate"] = r.gate ? nlohmann::ordered_json(std::string(to_string(*r.gate)))
                     : nlohmann::ordered_json();
  j["best_asw"] = r.best_asw ? nlohmann::ordered_json(*r.best_asw) : nlohmann::ordered_json();
  j["response"] = r.response;
  j["success"] = r.success;
  j["errored"] = r.errored;
  j["error"] = r.error;
  j["warnings"] = r.warnings;
  return j;
}

nlohmann::ordered_json to_json(const AttackOutcome& o) {
  nlohmann::ordered_json j;
  j["success"] = o.success;
  j["queries"] = o.queries;
  j["final_prompt"] = o.final_prompt;
  j["inner_attempts"] = o.state.inner_attempts;
  j["outer_scenarios"] = o.state.outer_scenarios;
  j["tried_scenarios"] = o.state.tried_scenarios;
  auto attempts = nlohmann::ordered_json::array();
  for (const auto& r : o.state.transcript) {
    nlohmann::ordered_json a;
    a["scenario"] = r.scenario_id;
    a["outer"] = r.outer_index;
    a["inner"] = r.inner_index;
    a["depth"] = r.submitted ? nlohmann::ordered_json(r.submitted->nesting_depth)
                             : nlohmann::ordered_json();
    a["asw"] = r.submitted && r.submitted->asw ? nlohmann::ordered_json(*r.submitted->asw)
                                               : nlohmann::ordered_json();
    a["entropy"] = r.submitted && r.submitted->entropy
                       ? nlohmann::ordered_json(*r.submitted->entropy)
                       : nlohmann::ordered_json();
    a["gate"] = r.gate ? nlohmann::ordered_json(std::string(to_string(*r.gate)))
                       : nlohmann::ordered_json();
    a["accepted"] = r.accepted;
    a["rejected"] = r.rejected;
    a["success"] = r.success;
    a["errored"] = r.errored;
    attempts.push_back(std::move(a));
  }
  j["attempts"] = std::move(attempts);
  return j;
}

nlohmann::ordered_json transcript_json(const AttackOutcome& o) {
  auto entries = nlohmann::ordered_json::array();
  for (const auto& r : o.state.transcript) entries.push_back(to_json(r));
  return entries;
}

}  // namespace attnforge
