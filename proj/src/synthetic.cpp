#include "attnforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "attnforge/hashing.hpp"
#include "attnforge/nesting.hpp"

namespace attnforge {

namespace {

constexpr std::uint64_t kPrefillStream = 0x70726566696c6cULL;  // "prefill"

}  // namespace

void validate_profile(const SyntheticProfile& profile) {
  if (!(profile.focus >= 0.0 && profile.focus <= 1.0)) {
    throw std::invalid_argument("synthetic focus must lie in [0, 1]");
  }
  if (!(profile.dispersion > 0.0)) {
    throw std::invalid_argument("synthetic dispersion must be positive");
  }
}

std::vector<double> synth_distribution(const std::vector<bool>& is_sensitive,
                                       const SyntheticProfile& profile, std::uint64_t stream) {
  const std::size_t n = is_sensitive.size();
  const auto sensitive_count =
      static_cast<std::size_t>(std::count(is_sensitive.begin(), is_sensitive.end(), true));
  const std::size_t residual_count = n - sensitive_count;

  double sensitive_mass = profile.focus;
  if (sensitive_count == 0) sensitive_mass = 0.0;
  if (residual_count == 0) sensitive_mass = 1.0;
  const double residual_mass = 1.0 - sensitive_mass;

  std::vector<double> out(n, 0.0);
  std::vector<double> log_weights;
  log_weights.reserve(residual_count);
  std::mt19937_64 rng(mix64(profile.seed ^ mix64(stream)));
  const double inv_dispersion = std::isinf(profile.dispersion) ? 0.0 : 1.0 / profile.dispersion;
  for (std::size_t k = 0; k < n; ++k) {
    if (is_sensitive[k]) continue;
    const double u = 1.0 - unit_double(rng());  // (0, 1]
    log_weights.push_back(std::log(u) * inv_dispersion);
  }
  const double max_log =
      log_weights.empty() ? 0.0 : *std::max_element(log_weights.begin(), log_weights.end());
  double weight_total = 0.0;
  for (double& lw : log_weights) {
    lw = std::exp(lw - max_log);
    weight_total += lw;
  }

  std::size_t r = 0;
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = is_sensitive[k] ? sensitive_mass / static_cast<double>(sensitive_count)
                             : residual_mass * log_weights[r++] / weight_total;
  }
  double total = 0.0;
  for (double v : out) total += v;
  for (double& v : out) v /= total;
  return out;
}

namespace {

std::vector<bool> sensitivity_mask(const TokenizedPrompt& prompt, std::size_t positions) {
  std::vector<bool> mask(positions, false);
  for (std::size_t idx : prompt.sensitive_indices) {
    if (idx < positions) mask[idx] = true;
  }
  return mask;
}

}  // namespace

AttentionTensor synth_generate(const TokenizedPrompt& prompt, const SyntheticProfile& profile,
                               const AttentionDims& dims) {
  validate_profile(profile);
  if (dims.tokens != prompt.size()) {
    throw StructuralError("synthetic dims expect " + std::to_string(dims.tokens) +
                          " tokens but the prompt has " + std::to_string(prompt.size()));
  }
  validate_prompt(prompt);
  const auto mask = sensitivity_mask(prompt, prompt.size());
  std::vector<double> values;
  values.reserve(dims.size());
  for (std::size_t s = 0; s < dims.slice_count(); ++s) {
    auto slice = synth_distribution(mask, profile, s);
    values.insert(values.end(), slice.begin(), slice.end());
  }
  return AttentionTensor(dims, std::move(values));
}

PrefillAttentionMatrix synth_prefill(const TokenizedPrompt& prompt,
                                     const SyntheticProfile& profile) {
  validate_profile(profile);
  validate_prompt(prompt);
  const std::size_t m = prompt.size();
  if (m == 0) throw StructuralError("synthetic prefill needs at least one token");
  const auto full_mask = sensitivity_mask(prompt, m);
  std::vector<double> values(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<bool> mask(full_mask.begin(), full_mask.begin() + static_cast<long>(i + 1));
    auto row = synth_distribution(mask, profile, kPrefillStream ^ mix64(i));
    std::copy(row.begin(), row.end(), values.begin() + static_cast<long>(i * m));
  }
  return PrefillAttentionMatrix(m, std::move(values));
}

ProfileRule fixed_profile_rule(double focus, double dispersion) {
  SyntheticProfile profile{focus, dispersion, 0};
  validate_profile(profile);
  return [profile](const TokenizedPrompt&) { return profile; };
}

ProfileRule nesting_decay_rule(NestingDecay decay) {
  if (!(decay.initial_focus >= 0.0 && decay.initial_focus <= 1.0) ||
      !(decay.focus_decay >= 0.0 && decay.focus_decay <= 1.0)) {
    throw std::invalid_argument("nesting decay focus parameters must lie in [0, 1]");
  }
  if (!(decay.base_dispersion > 0.0) || !(decay.dispersion_growth > 0.0)) {
    throw std::invalid_argument("nesting decay dispersion parameters must be positive");
  }
  return [decay](const TokenizedPrompt& prompt) {
    const auto depth = static_cast<double>(nesting_depth_of(prompt.text));
    SyntheticProfile profile;
    profile.focus = decay.initial_focus * std::pow(decay.focus_decay, std::max(depth - 1.0, 0.0));
    profile.dispersion = decay.base_dispersion * std::pow(decay.dispersion_growth, depth);
    return profile;
  };
}

TokenizedPrompt tokenize_prompt(std::string_view text, const Lexicon& lexicon) {
  TokenizedPrompt prompt;
  prompt.text = std::string(text);
  prompt.tokens = basic_tokenize(text);
  prompt.sensitive_indices = tag_sensitive(prompt.text, prompt.tokens, lexicon);
  return prompt;
}

SyntheticProvider::SyntheticProvider(std::shared_ptr<const Lexicon> lexicon, ProfileRule rule,
                                     SyntheticOptions options)
    : lexicon_(std::move(lexicon)), rule_(std::move(rule)), options_(options) {
  if (!lexicon_) throw std::invalid_argument("synthetic provider needs a lexicon");
  if (!rule_) throw std::invalid_argument("synthetic provider needs a profile rule");
  if (options_.layers == 0 || options_.heads == 0) {
    throw std::invalid_argument("synthetic layers and heads must be positive");
  }
}

SyntheticProfile SyntheticProvider::profile_for(const TokenizedPrompt& prompt,
                                                std::uint64_t request_seed) const {
  SyntheticProfile profile = rule_(prompt);
  profile.seed = mix64(request_seed ^ fnv1a64(prompt.text));
  return profile;
}

ProviderResult SyntheticProvider::provide(const ProviderRequest& request) const {
  TokenizedPrompt prompt = tokenize_prompt(request.prompt_text, *lexicon_);
  if (prompt.tokens.empty()) {
    throw std::invalid_argument("prompt has no tokens");
  }
  const SyntheticProfile profile = profile_for(prompt, request.seed);
  AttentionDims dims{std::max<std::size_t>(request.probe_steps, 1), options_.layers,
                     options_.heads, prompt.size()};
  auto decode = synth_generate(prompt, profile, dims);
  auto prefill = synth_prefill(prompt, profile);
  return ProviderResult{std::move(prompt), std::move(decode), std::move(prefill)};
}

}  // namespace attnforge
