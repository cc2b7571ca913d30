#pragma once

#include <cstddef>
#include <future>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnforge/corpus.hpp"
#include "attnforge/lexicon.hpp"
#include "attnforge/provider.hpp"

namespace attnforge::cli {

/// Failure carrying its exit code.
class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& message) : std::runtime_error(message), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

CliError input_error(const std::string& message);

/// Provenance block embedded in every JSON output.
struct Manifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  std::string provider;
  nlohmann::ordered_json input_hashes = nlohmann::ordered_json::object();
  bool timestamp = true;

  void add_input(const std::string& path);
  nlohmann::ordered_json to_json() const;
};

std::string utc_timestamp();

struct ProviderOptions {
  std::string kind = "synthetic";
  std::string fixtures;
  std::string sidecar_url;
  std::string lexicon;
  std::string profile = "nesting-decay";
  std::size_t layers = 2;
  std::size_t heads = 2;
};

void add_provider_options(CLI::App* cmd, ProviderOptions& options);

/// Loads --lexicon, or the built-in lexicon when the flag is empty.
std::shared_ptr<const Lexicon> lexicon_from_option(const std::string& path);

std::unique_ptr<AttentionProvider> make_provider(const ProviderOptions& options,
                                                 std::shared_ptr<const Lexicon> lexicon);

nlohmann::ordered_json to_json(const ProviderOptions& options);

/// Prompts from exactly one of --prompt and --file.
std::vector<CorpusEntry> load_prompts(const std::optional<std::string>& prompt,
                                      const std::optional<std::string>& file, Manifest& manifest);

std::vector<CorpusEntry> load_corpus_option(const std::string& flag, const std::string& path,
                                            Manifest& manifest);

/// Writes to `path`, or to `out` when path is empty.
void emit(const std::string& path, const std::string& content, std::ostream& out);

/// JSON document text with a trailing newline.
std::string dump(const nlohmann::ordered_json& j);

/// Shortest round-trip decimal form.
std::string format_double(double value);

std::string csv_field(const std::string& text);

/// Applies f to 0..n-1 with up to `jobs` calls in flight. Results keep index
/// order; the first exception in index order is rethrown.
template <typename F>
auto ordered_map(std::size_t n, std::size_t jobs, F f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> results;
  results.reserve(n);
  if (jobs <= 1) {
    for (std::size_t k = 0; k < n; ++k) results.push_back(f(k));
    return results;
  }
  for (std::size_t begin = 0; begin < n; begin += jobs) {
    std::vector<std::future<R>> batch;
    for (std::size_t k = begin; k < std::min(n, begin + jobs); ++k) {
      batch.push_back(std::async(std::launch::async, f, k));
    }
    for (auto& fut : batch) results.push_back(fut.get());
  }
  return results;
}

}  // namespace attnforge::cli
