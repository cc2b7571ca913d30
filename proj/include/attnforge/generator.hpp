#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace attnforge {

struct GenerationRequest {
  std::string parent_text;  // becomes the innermost task
  std::string scenario_id;
  std::size_t depth = 1;    // nesting depth of the produced candidates
  std::size_t count = 8;
  std::uint64_t salt = 0;   // varies the selection between regeneration rounds
};

/// Produces nested rewrites of a task. Implementations must be deterministic
/// for a given request and return distinct texts.
class TaskGenerator {
 public:
  virtual ~TaskGenerator() = default;

  /// Disguise scenario ids, in the order the attack loop should try them.
  virtual std::vector<std::string> scenarios() const = 0;

  /// Up to request.count distinct rewrites, each embedding parent_text as its
  /// innermost task. Fewer are returned when the scenario's pool runs out.
  virtual std::vector<std::string> generate(const GenerationRequest& request) const = 0;

  virtual std::string id() const = 0;
};

/// A disguise scenario: preamble templates with a `{v}` slot filled from the
/// lexical variants. Its pool is templates x variants.
struct Scenario {
  std::string id;
  std::vector<std::string> templates;
  std::vector<std::string> variants;

  std::size_t pool_size() const { return templates.size() * variants.size(); }
};

const std::vector<Scenario>& default_scenarios();

/// Wraps the parent task in scenario preambles with wrap_nested. The pool is
/// visited in a permutation seeded by (seed, scenario, depth, salt).
class TemplateGenerator final : public TaskGenerator {
 public:
  explicit TemplateGenerator(std::vector<Scenario> scenarios = default_scenarios(),
                             std::uint64_t seed = 0);

  std::vector<std::string> scenarios() const override;
  std::vector<std::string> generate(const GenerationRequest& request) const override;
  std::string id() const override { return "template"; }

  const Scenario& scenario(const std::string& id) const;

 private:
  std::vector<Scenario> scenarios_;
  std::uint64_t seed_;
};

}  // namespace attnforge
