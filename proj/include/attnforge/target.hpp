#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "attnforge/beam.hpp"

namespace attnforge {

/// The target model could not be reached or answered malformed data.
class TargetTransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TargetAdapter {
 public:
  virtual ~TargetAdapter() = default;
  virtual std::string submit(const std::string& prompt) = 0;
  virtual std::string id() const = 0;
};

/// Returns the prompt unchanged.
class EchoTarget final : public TargetAdapter {
 public:
  std::string submit(const std::string& prompt) override { return prompt; }
  std::string id() const override { return "mock"; }
};

/// Answers every prompt with the same text.
class FixedResponseTarget final : public TargetAdapter {
 public:
  explicit FixedResponseTarget(std::string response) : response_(std::move(response)) {}
  std::string submit(const std::string&) override { return response_; }
  std::string id() const override { return "mock:fixed"; }

 private:
  std::string response_;
};

/// Response table: the first rule whose `contains` substring occurs in the
/// prompt answers; otherwise the default response.
///
/// File format: {"rules": [{"contains": "...", "response": "..."}], "default": "..."}
class ScriptedTarget final : public TargetAdapter {
 public:
  struct Rule {
    std::string contains;
    std::string response;
  };

  ScriptedTarget(std::vector<Rule> rules, std::string fallback);
  static ScriptedTarget load(const std::filesystem::path& path);

  std::string submit(const std::string& prompt) override;
  std::string id() const override { return "scripted"; }

 private:
  std::vector<Rule> rules_;
  std::string fallback_;
};

/// POSTs {"prompt": ...} to an endpoint. A JSON reply's "response" field is
/// the answer; any other body is taken verbatim.
class HttpTarget final : public TargetAdapter {
 public:
  explicit HttpTarget(std::string url,
                      std::chrono::milliseconds timeout = std::chrono::milliseconds(60000));
  std::string submit(const std::string& prompt) override;
  std::string id() const override { return "http:" + url_; }

 private:
  std::string url_;
  std::string base_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

/// Builds a target from a CLI spec: mock, mock:refuse, scripted:FILE or
/// http:URL. Throws std::invalid_argument for anything else.
std::unique_ptr<TargetAdapter> make_target(const std::string& spec);

class SuccessJudge {
 public:
  virtual ~SuccessJudge() = default;
  virtual bool judge(const BeamCandidate& submitted, std::string_view response) const = 0;
  virtual std::string id() const = 0;
};

const std::vector<std::string>& default_refusal_patterns();

/// One pattern per line; blank lines are skipped. Throws std::runtime_error
/// for a missing file or an empty pattern list.
std::vector<std::string> load_refusal_patterns(const std::filesystem::path& path);

/// Success iff the response is non-empty and contains no refusal pattern,
/// compared case-insensitively. Throws std::invalid_argument when patterns
/// is empty.
bool judge_response(std::string_view response, const std::vector<std::string>& patterns);

class RefusalJudge final : public SuccessJudge {
 public:
  explicit RefusalJudge(std::vector<std::string> patterns = default_refusal_patterns());
  bool judge(const BeamCandidate&, std::string_view response) const override;
  std::string id() const override { return "refusal"; }

 private:
  std::vector<std::string> patterns_;
};

/// Success iff the submitted candidate's ASW is below the threshold. Used for
/// offline fixtures where the target is a mock.
class AswThresholdJudge final : public SuccessJudge {
 public:
  explicit AswThresholdJudge(double threshold) : threshold_(threshold) {}
  bool judge(const BeamCandidate& submitted, std::string_view) const override;
  std::string id() const override { return "asw<" + std::to_string(threshold_); }

 private:
  double threshold_;
};

class NeverJudge final : public SuccessJudge {
 public:
  bool judge(const BeamCandidate&, std::string_view) const override { return false; }
  std::string id() const override { return "never"; }
};

/// refusal, refusal:FILE, asw:THRESHOLD or never.
std::unique_ptr<SuccessJudge> make_judge(const std::string& spec);

}  // namespace attnforge
