#include "attnforge/replay.hpp"

#include <algorithm>
#include <fstream>

namespace attnforge {

nlohmann::ordered_json to_json(const ReplayFixture& fixture) {
  nlohmann::ordered_json j;
  j["text"] = fixture.text;
  auto tokens = nlohmann::ordered_json::array();
  for (const auto& tok : fixture.tokens) tokens.push_back({tok.text, tok.start, tok.end});
  j["tokens"] = std::move(tokens);
  const auto& d = fixture.decode.dims();
  j["dims"] = {{"T", d.steps}, {"L", d.layers}, {"H", d.heads}, {"M", d.tokens}};
  auto values = fixture.decode.values();
  j["decode_values"] = std::vector<double>(values.begin(), values.end());
  j["prefill_rows"] = fixture.prefill.rows();
  return j;
}

ReplayFixture fixture_from_json(const nlohmann::json& j, double norm_tol) {
  try {
    std::string text = j.at("text").get<std::string>();
    std::vector<Token> tokens;
    for (const auto& entry : j.at("tokens")) {
      if (!entry.is_array() || entry.size() != 3) {
        throw FixtureFormatError("token entries must be [string, start, end]");
      }
      tokens.push_back({entry[0].get<std::string>(), entry[1].get<std::size_t>(),
                        entry[2].get<std::size_t>()});
    }
    const auto& dj = j.at("dims");
    AttentionDims dims{dj.at("T").get<std::size_t>(), dj.at("L").get<std::size_t>(),
                       dj.at("H").get<std::size_t>(), dj.at("M").get<std::size_t>()};
    if (dims.tokens != tokens.size()) {
      throw FixtureFormatError("dims.M does not match the token count");
    }
    AttentionTensor decode(dims, j.at("decode_values").get<std::vector<double>>());
    auto prefill = PrefillAttentionMatrix::from_rows(
        j.at("prefill_rows").get<std::vector<std::vector<double>>>());
    if (prefill.tokens() != dims.tokens) {
      throw FixtureFormatError("prefill_rows is not M x M");
    }
    TokenizedPrompt check{text, tokens, {}};
    validate_prompt(check);
    if (auto report = validate_tensor(decode, norm_tol); !report.valid) {
      throw FixtureFormatError("decode_values: " + report.describe());
    }
    if (auto report = validate_prefill(prefill, norm_tol); !report.valid) {
      throw FixtureFormatError("prefill_rows: " + report.describe());
    }
    return ReplayFixture{std::move(text), std::move(tokens), std::move(decode),
                         std::move(prefill)};
  } catch (const nlohmann::json::exception& e) {
    throw FixtureFormatError(std::string("malformed fixture: ") + e.what());
  } catch (const StructuralError& e) {
    throw FixtureFormatError(std::string("malformed fixture: ") + e.what());
  }
}

ReplayFixture load_fixture(const std::filesystem::path& path, double norm_tol) {
  std::ifstream in(path);
  if (!in) throw FixtureMissingError("cannot open fixture '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FixtureFormatError(path.string() + ": " + e.what());
  }
  try {
    return fixture_from_json(j, norm_tol);
  } catch (const FixtureFormatError& e) {
    throw FixtureFormatError(path.string() + ": " + e.what());
  }
}

void store_fixture(const std::filesystem::path& path, const ReplayFixture& fixture) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fixture '" + path.string() + "'");
  out << to_json(fixture).dump() << '\n';
}

ReplayFixture fixture_from_result(const ProviderResult& result) {
  return ReplayFixture{result.prompt.text, result.prompt.tokens, result.decode, result.prefill};
}

ReplayProvider::ReplayProvider(std::shared_ptr<const Lexicon> lexicon,
                               std::vector<ReplayFixture> fixtures)
    : lexicon_(std::move(lexicon)) {
  if (!lexicon_) throw std::invalid_argument("replay provider needs a lexicon");
  for (auto& f : fixtures) {
    auto key = f.text;
    fixtures_.insert_or_assign(std::move(key), std::move(f));
  }
}

ReplayProvider ReplayProvider::from_path(std::shared_ptr<const Lexicon> lexicon,
                                         const std::filesystem::path& path) {
  std::vector<ReplayFixture> fixtures;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) fixtures.push_back(load_fixture(f));
  } else {
    fixtures.push_back(load_fixture(path));
  }
  return ReplayProvider(std::move(lexicon), std::move(fixtures));
}

ProviderResult ReplayProvider::provide(const ProviderRequest& request) const {
  auto it = fixtures_.find(request.prompt_text);
  if (it == fixtures_.end()) {
    throw FixtureMissingError("no replay fixture for prompt (" +
                              std::to_string(request.prompt_text.size()) + " bytes)");
  }
  const auto& f = it->second;
  TokenizedPrompt prompt{f.text, f.tokens, tag_sensitive(f.text, f.tokens, *lexicon_)};
  return ProviderResult{std::move(prompt), f.decode, f.prefill};
}

}  // namespace attnforge
