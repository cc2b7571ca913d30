#include "attnforge/metrics.hpp"

#include <cmath>

namespace attnforge {

std::string_view to_string(EntropySource source) {
  return source == EntropySource::Prefill ? "prefill" : "decode";
}

EntropySource parse_entropy_source(std::string_view text) {
  if (text == "prefill") return EntropySource::Prefill;
  if (text == "decode") return EntropySource::Decode;
  throw std::invalid_argument("unknown entropy source '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["asw"] = report.asw;
  j["entropy"] = report.entropy;
  j["cond_entropy"] = report.cond_entropy;
  j["risk"] = report.risk;
  j["beta"] = report.beta;
  j["normalized"] = report.normalized;
  j["source"] = std::string(to_string(report.source));
  return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.asw = j.at("asw").get<double>();
  r.entropy = j.at("entropy").get<double>();
  r.cond_entropy = j.at("cond_entropy").get<double>();
  r.risk = j.at("risk").get<double>();
  r.beta = j.at("beta").get<double>();
  r.normalized = j.at("normalized").get<bool>();
  r.source = parse_entropy_source(j.at("source").get<std::string>());
  return r;
}

double entropy_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

double shannon_entropy(std::span<const double> distribution) {
  double h = 0.0;
  for (double p : distribution) h += entropy_term(p);
  return h;
}

namespace {

double log_tokens(std::size_t tokens) {
  if (tokens < 2) {
    throw std::domain_error("normalized entropy needs at least two tokens");
  }
  return std::log(static_cast<double>(tokens));
}

}  // namespace

double attn_sens_words(const AttentionTensor& tensor, const std::set<std::size_t>& sensitive,
                       double norm_tol) {
  const std::size_t m = tensor.dims().tokens;
  for (std::size_t idx : sensitive) {
    if (idx >= m) {
      throw std::out_of_range("sensitive index " + std::to_string(idx) + " >= token count " +
                              std::to_string(m));
    }
  }
  // Per-token slice means already carry the 1/(T*L*H) factor.
  const auto profile = aggregate_token_weights(tensor, norm_tol);
  double mass = 0.0;
  for (std::size_t idx : sensitive) mass += profile.weights[idx];
  return mass / static_cast<double>(m);
}

double attn_entropy(const AttentionTensor& tensor, const MetricConfig& config) {
  require_valid(tensor, config.norm_tol);
  const auto& d = tensor.dims();
  const double denom = config.entropy_normalized ? log_tokens(d.tokens) : 1.0;
  double total = 0.0;
  for (std::size_t s = 0; s < d.slice_count(); ++s) total += shannon_entropy(tensor.slice(s));
  return total / static_cast<double>(d.slice_count()) / denom;
}

double attn_entropy(const PrefillAttentionMatrix& prefill, const MetricConfig& config) {
  require_valid(prefill, config.norm_tol);
  const std::size_t m = prefill.tokens();
  const double denom = config.entropy_normalized ? log_tokens(m) : 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total += shannon_entropy(prefill.row(i));
  return total / static_cast<double>(m) / denom;
}

double conditional_entropy(const PrefillAttentionMatrix& prefill, double norm_tol) {
  require_valid(prefill, norm_tol);
  double total = 0.0;
  for (std::size_t i = 0; i < prefill.tokens(); ++i) total += shannon_entropy(prefill.row(i));
  return total;
}

double risk_score(double attn_entropy, double cond_entropy, double beta) {
  if (!std::isfinite(attn_entropy) || !std::isfinite(cond_entropy) || !std::isfinite(beta)) {
    throw std::invalid_argument("risk_score inputs must be finite");
  }
  if (beta < 0.0) {
    throw std::invalid_argument("beta must be non-negative");
  }
  return attn_entropy + beta * cond_entropy;
}

MetricReport full_report(const TokenizedPrompt& prompt, const AttentionTensor& tensor,
                         const PrefillAttentionMatrix& prefill, const MetricConfig& config,
                         double beta) {
  const std::size_t m = tensor.dims().tokens;
  if (prompt.size() != m || prefill.tokens() != m) {
    throw DimensionMismatch("token count mismatch: prompt " + std::to_string(prompt.size()) +
                            ", tensor " + std::to_string(m) + ", prefill " +
                            std::to_string(prefill.tokens()));
  }
  MetricReport report;
  report.asw = attn_sens_words(tensor, prompt.sensitive_indices, config.norm_tol);
  report.entropy = config.entropy_source == EntropySource::Prefill ? attn_entropy(prefill, config)
                                                                  : attn_entropy(tensor, config);
  report.cond_entropy = conditional_entropy(prefill, config.norm_tol);
  report.beta = beta;
  report.risk = risk_score(report.entropy, report.cond_entropy, beta);
  report.normalized = config.entropy_normalized;
  report.source = config.entropy_source;
  return report;
}

MetricReport report_from_stats(const AttentionStats& stats, const MetricConfig& config,
                               double beta) {
  const auto& d = stats.dims;
  if (d.slice_count() == 0 || d.tokens == 0) {
    throw StructuralError("attention stats dimensions must all be positive");
  }
  MetricReport report;
  report.asw = stats.sens_mass_sum / static_cast<double>(d.size());
  report.entropy = stats.entropy_sum / static_cast<double>(d.slice_count());
  if (config.entropy_normalized) report.entropy /= log_tokens(d.tokens);
  report.cond_entropy = stats.prefill_entropy;
  report.beta = beta;
  report.risk = risk_score(report.entropy, report.cond_entropy, beta);
  report.normalized = config.entropy_normalized;
  report.source = EntropySource::Decode;
  return report;
}

}  // namespace attnforge
