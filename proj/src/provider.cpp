#include "attnforge/provider.hpp"

#include "attnforge/lexicon.hpp"

namespace attnforge {

std::vector<Token> basic_tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t p = 0;
  while (p < text.size()) {
    const auto c = static_cast<unsigned char>(text[p]);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      ++p;
      continue;
    }
    const std::size_t start = p;
    if (is_word_byte(c)) {
      while (p < text.size() && is_word_byte(static_cast<unsigned char>(text[p]))) ++p;
    } else {
      ++p;
    }
    tokens.push_back({std::string(text.substr(start, p - start)), start, p});
  }
  return tokens;
}

void check_result(const ProviderResult& result, double norm_tol) {
  const std::size_t m = result.prompt.size();
  if (result.decode.dims().tokens != m || result.prefill.tokens() != m) {
    throw ProviderError("provider returned inconsistent token counts: prompt " +
                        std::to_string(m) + ", decode " +
                        std::to_string(result.decode.dims().tokens) + ", prefill " +
                        std::to_string(result.prefill.tokens()));
  }
  try {
    validate_prompt(result.prompt);
  } catch (const StructuralError& e) {
    throw ProviderError(std::string("provider returned an invalid prompt: ") + e.what());
  }
  if (auto report = validate_tensor(result.decode, norm_tol); !report.valid) {
    throw ProviderError("provider returned an invalid decode tensor: " + report.describe());
  }
  if (auto report = validate_prefill(result.prefill, norm_tol); !report.valid) {
    throw ProviderError("provider returned an invalid prefill matrix: " + report.describe());
  }
}

}  // namespace attnforge
