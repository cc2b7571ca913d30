#include "attnforge/sidecar.hpp"

#include <cstdlib>

#include <httplib.h>

namespace attnforge {

std::optional<std::string> sidecar_url_from_env() {
  const char* value = std::getenv(kSidecarUrlEnv);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

namespace {

template <typename T>
T field(const nlohmann::json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SidecarProtocolError(std::string("sidecar response field '") + name + "': " + e.what());
  }
}

AttentionDims parse_dims(const nlohmann::json& j) {
  const auto d = field<nlohmann::json>(j, "dims");
  return AttentionDims{field<std::size_t>(d, "T"), field<std::size_t>(d, "L"),
                       field<std::size_t>(d, "H"), field<std::size_t>(d, "M")};
}

}  // namespace

std::vector<Token> parse_tokenize_response(const nlohmann::json& j, std::string_view text) {
  std::vector<Token> tokens;
  for (const auto& entry : field<nlohmann::json>(j, "tokens")) {
    auto offset = [](const nlohmann::json& v) { return v.is_number_integer() && v.get<long long>() >= 0; };
    if (!entry.is_array() || entry.size() != 3 || !entry[0].is_string() || !offset(entry[1]) ||
        !offset(entry[2])) {
      throw SidecarProtocolError("sidecar token entries must be [string, start, end]");
    }
    tokens.push_back({entry[0].get<std::string>(), entry[1].get<std::size_t>(),
                      entry[2].get<std::size_t>()});
  }
  if (tokens.empty()) throw SidecarProtocolError("sidecar returned no tokens");
  TokenizedPrompt check{std::string(text), tokens, {}};
  try {
    validate_prompt(check);
  } catch (const StructuralError& e) {
    throw SidecarProtocolError(std::string("sidecar token spans: ") + e.what());
  }
  return tokens;
}

ProviderResult parse_full_response(const nlohmann::json& j, TokenizedPrompt prompt,
                                   double norm_tol) {
  try {
    const AttentionDims dims = parse_dims(j);
    if (dims.tokens != prompt.size()) {
      throw SidecarProtocolError("sidecar dims.M " + std::to_string(dims.tokens) +
                                 " differs from the token count " +
                                 std::to_string(prompt.size()));
    }
    AttentionTensor decode(dims, field<std::vector<double>>(j, "decode_values"));
    auto prefill = PrefillAttentionMatrix::from_rows(
        field<std::vector<std::vector<double>>>(j, "prefill_rows"));
    ProviderResult result{std::move(prompt), std::move(decode), std::move(prefill)};
    check_result(result, norm_tol);
    return result;
  } catch (const StructuralError& e) {
    throw SidecarProtocolError(std::string("sidecar full response: ") + e.what());
  } catch (const SidecarProtocolError&) {
    throw;
  } catch (const ProviderError& e) {
    throw SidecarProtocolError(std::string("sidecar full response: ") + e.what());
  }
}

AttentionStats parse_stats_response(const nlohmann::json& j) {
  AttentionStats stats;
  stats.dims = parse_dims(j);
  if (stats.dims.size() == 0) throw SidecarProtocolError("sidecar stats dims must be positive");
  stats.entropy_sum = field<double>(j, "entropy_sum");
  stats.sens_mass_sum = field<double>(j, "sens_mass_sum");
  stats.prefill_entropy = field<double>(j, "prefill_entropy");
  if (stats.entropy_sum < 0.0 || stats.sens_mass_sum < 0.0 || stats.prefill_entropy < 0.0) {
    throw SidecarProtocolError("sidecar stats must be non-negative");
  }
  return stats;
}

struct SidecarClient::Transport {
  explicit Transport(const SidecarOptions& options) : client(options.base_url) {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
  }
  httplib::Client client;
};

SidecarClient::SidecarClient(std::shared_ptr<const Lexicon> lexicon, SidecarOptions options)
    : lexicon_(std::move(lexicon)), options_(std::move(options)) {
  if (!lexicon_) throw std::invalid_argument("sidecar client needs a lexicon");
  if (options_.base_url.empty()) throw std::invalid_argument("sidecar URL is empty");
  if (options_.attempts < 1) throw std::invalid_argument("sidecar attempts must be >= 1");
  transport_ = std::make_unique<Transport>(options_);
  if (!transport_->client.is_valid()) {
    throw std::invalid_argument("invalid sidecar URL '" + options_.base_url + "'");
  }
}

SidecarClient::~SidecarClient() = default;

nlohmann::json SidecarClient::post(const std::string& path, const nlohmann::json& body) const {
  const std::string payload = body.dump();
  std::lock_guard<std::mutex> lock(wire_mutex_);
  std::string last_error;
  for (int attempt = 0; attempt < options_.attempts; ++attempt) {
    auto res = transport_->client.Post(path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      throw SidecarProtocolError("sidecar " + path + " returned HTTP " +
                                 std::to_string(res->status) + ": " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw SidecarProtocolError("sidecar " + path + " returned invalid JSON: " + e.what());
    }
  }
  throw SidecarTransportError("sidecar " + options_.base_url + path + " unreachable after " +
                              std::to_string(options_.attempts) + " attempt(s): " + last_error);
}

std::vector<Token> SidecarClient::tokenize(const std::string& text) const {
  return parse_tokenize_response(post("/tokenize", {{"text", text}}), text);
}

ProviderResult SidecarClient::provide(const ProviderRequest& request) const {
  if (request.prompt_text.empty()) throw std::invalid_argument("prompt is empty");
  TokenizedPrompt prompt;
  prompt.text = request.prompt_text;
  prompt.tokens = tokenize(prompt.text);
  prompt.sensitive_indices = tag_sensitive(prompt.text, prompt.tokens, *lexicon_);
  const nlohmann::json body = {
      {"text", prompt.text}, {"probe_steps", request.probe_steps}, {"mode", "full"}};
  return parse_full_response(post("/attention", body), std::move(prompt), options_.norm_tol);
}

AttentionStats SidecarClient::stats(const std::string& text, std::size_t probe_steps) const {
  if (text.empty()) throw std::invalid_argument("prompt is empty");
  const auto tokens = tokenize(text);
  const auto sensitive = tag_sensitive(text, tokens, *lexicon_);
  const nlohmann::json body = {{"text", text},
                               {"probe_steps", probe_steps},
                               {"mode", "stats"},
                               {"sensitive_indices", sensitive}};
  auto stats = parse_stats_response(post("/attention", body));
  if (stats.dims.tokens != tokens.size()) {
    throw SidecarProtocolError("sidecar stats dims.M differs from the token count");
  }
  return stats;
}

}  // namespace attnforge
