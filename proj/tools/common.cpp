#include "common.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "attnforge/replay.hpp"
#include "attnforge/sidecar.hpp"
#include "attnforge/synthetic.hpp"

namespace attnforge::cli {

CliError input_error(const std::string& message) { return CliError(2, message); }

void Manifest::add_input(const std::string& path) {
  try {
    input_hashes[path] = file_hash(path);
  } catch (const CorpusError&) {
    input_hashes[path] = nullptr;
  }
}

nlohmann::ordered_json Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = config;
  j["seeds"] = seeds;
  j["provider"] = provider;
  j["input_hashes"] = input_hashes;
  if (timestamp) j["timestamp"] = utc_timestamp();
  return j;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void add_provider_options(CLI::App* cmd, ProviderOptions& o) {
  cmd->add_option("--provider", o.kind, "Attention source")
      ->check(CLI::IsMember({"synthetic", "replay", "sidecar"}))
      ->capture_default_str();
  cmd->add_option("--fixtures", o.fixtures, "Replay fixture file or directory");
  cmd->add_option("--sidecar-url", o.sidecar_url, "Sidecar base URL (default $ATTNFORGE_SIDECAR_URL)");
  cmd->add_option("--lexicon", o.lexicon, "Sensitive-word lexicon (word<TAB>pos per line)");
  cmd->add_option("--profile", o.profile,
                  "Synthetic attention rule: nesting-decay or fixed:FOCUS:DISPERSION")
      ->capture_default_str();
  cmd->add_option("--layers-synthetic", o.layers, "Synthetic layer count")->capture_default_str();
  cmd->add_option("--heads-synthetic", o.heads, "Synthetic head count")->capture_default_str();
}

std::shared_ptr<const Lexicon> lexicon_from_option(const std::string& path) {
  if (path.empty()) return std::shared_ptr<const Lexicon>(&default_lexicon(), [](const Lexicon*) {});
  try {
    return std::make_shared<const Lexicon>(load_lexicon(path));
  } catch (const LexiconError& e) {
    throw input_error(std::string("--lexicon: ") + e.what());
  }
}

namespace {

ProfileRule parse_profile(const std::string& spec) {
  if (spec == "nesting-decay") return nesting_decay_rule();
  if (spec.rfind("fixed:", 0) == 0) {
    const auto rest = spec.substr(6);
    const auto colon = rest.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument("missing dispersion");
      const double focus = std::stod(rest.substr(0, colon));
      const double dispersion = std::stod(rest.substr(colon + 1));
      validate_profile({focus, dispersion, 0});
      return fixed_profile_rule(focus, dispersion);
    } catch (const std::exception& e) {
      throw input_error("--profile: bad fixed profile '" + spec + "': " + e.what());
    }
  }
  throw input_error("--profile: expected nesting-decay or fixed:FOCUS:DISPERSION, got '" + spec +
                    "'");
}

}  // namespace

std::unique_ptr<AttentionProvider> make_provider(const ProviderOptions& o,
                                                 std::shared_ptr<const Lexicon> lexicon) {
  if (o.kind == "synthetic") {
    if (o.layers == 0 || o.heads == 0) {
      throw input_error("--layers-synthetic and --heads-synthetic must be >= 1");
    }
    return std::make_unique<SyntheticProvider>(std::move(lexicon), parse_profile(o.profile),
                                               SyntheticOptions{o.layers, o.heads});
  }
  if (o.kind == "replay") {
    if (o.fixtures.empty()) throw input_error("--fixtures is required with --provider replay");
    try {
      return std::make_unique<ReplayProvider>(ReplayProvider::from_path(std::move(lexicon), o.fixtures));
    } catch (const FixtureFormatError& e) {
      throw input_error(std::string("--fixtures: ") + e.what());
    } catch (const FixtureMissingError& e) {
      throw input_error(std::string("--fixtures: ") + e.what());
    }
  }
  std::string url = o.sidecar_url;
  if (url.empty()) url = sidecar_url_from_env().value_or("");
  if (url.empty()) {
    throw input_error(std::string("--sidecar-url is required with --provider sidecar (or set ") +
                      kSidecarUrlEnv + ")");
  }
  SidecarOptions options;
  options.base_url = url;
  return std::make_unique<SidecarClient>(std::move(lexicon), options);
}

nlohmann::ordered_json to_json(const ProviderOptions& o) {
  nlohmann::ordered_json j;
  j["provider"] = o.kind;
  if (o.kind == "synthetic") {
    j["profile"] = o.profile;
    j["layers"] = o.layers;
    j["heads"] = o.heads;
  }
  if (o.kind == "replay") j["fixtures"] = o.fixtures;
  j["lexicon"] = o.lexicon.empty() ? nlohmann::ordered_json("builtin")
                                   : nlohmann::ordered_json(o.lexicon);
  return j;
}

std::vector<CorpusEntry> load_corpus_option(const std::string& flag, const std::string& path,
                                            Manifest& manifest) {
  try {
    auto entries = read_corpus(path);
    manifest.add_input(path);
    return entries;
  } catch (const CorpusError& e) {
    throw input_error(flag + ": " + e.what());
  }
}

std::vector<CorpusEntry> load_prompts(const std::optional<std::string>& prompt,
                                      const std::optional<std::string>& file, Manifest& manifest) {
  if (prompt.has_value() == file.has_value()) {
    throw input_error("exactly one of --prompt and --file is required");
  }
  if (prompt) {
    if (prompt->empty()) throw input_error("--prompt is empty");
    return {CorpusEntry{"prompt", *prompt, std::nullopt, std::nullopt, std::nullopt}};
  }
  auto entries = load_corpus_option("--file", *file, manifest);
  if (entries.empty()) throw input_error("--file: no prompts in '" + *file + "'");
  return entries;
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot write '" + path + "'");
  f << content;
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace attnforge::cli
