#pragma once

// Attention-distribution signals: sensitive-word attention intensity,
// dispersion entropy, prefill conditional entropy and the combined risk score.
// All logarithms are natural.

#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "attnforge/attention.hpp"

namespace attnforge {

enum class EntropySource { Prefill, Decode };

std::string_view to_string(EntropySource source);
EntropySource parse_entropy_source(std::string_view text);

struct MetricConfig {
  bool entropy_normalized = true;  // divide by log M
  EntropySource entropy_source = EntropySource::Prefill;
  double norm_tol = kDefaultNormTol;
};

/// Inputs that disagree on the token count M.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MetricReport {
  double asw = 0.0;
  double entropy = 0.0;
  double cond_entropy = 0.0;
  double risk = 0.0;
  double beta = 0.0;
  bool normalized = true;
  EntropySource source = EntropySource::Prefill;
};

/// Stable field order: asw, entropy, cond_entropy, risk, beta, normalized, source.
nlohmann::ordered_json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// -x log x with 0 log 0 taken as 0.
double entropy_term(double p);

/// Shannon entropy of one distribution, natural log.
double shannon_entropy(std::span<const double> distribution);

/// Sum over i in S and all slices of values[t,l,h,i], divided by T*L*H*M.
/// Throws std::out_of_range for an index >= M, InvalidTensorError for an
/// invalid tensor.
double attn_sens_words(const AttentionTensor& tensor, const std::set<std::size_t>& sensitive,
                       double norm_tol = kDefaultNormTol);

/// Mean per-slice entropy over the T*L*H decode slices, divided by log M when
/// config.entropy_normalized. Ignores config.entropy_source.
double attn_entropy(const AttentionTensor& tensor, const MetricConfig& config = {});

/// Same statistic with the M prefill rows taken as the slices.
double attn_entropy(const PrefillAttentionMatrix& prefill, const MetricConfig& config = {});

/// Sum of the row entropies of the prefill matrix (no averaging).
double conditional_entropy(const PrefillAttentionMatrix& prefill,
                           double norm_tol = kDefaultNormTol);

/// attn_entropy + beta * cond_entropy. Throws std::invalid_argument on
/// non-finite inputs or negative beta.
double risk_score(double attn_entropy, double cond_entropy, double beta);

/// Bundles the four metrics. The entropy term follows config.entropy_source.
/// Throws DimensionMismatch when prompt, tensor and prefill disagree on M.
MetricReport full_report(const TokenizedPrompt& prompt, const AttentionTensor& tensor,
                         const PrefillAttentionMatrix& prefill, const MetricConfig& config,
                         double beta);

/// Sufficient statistics served instead of full tensors.
struct AttentionStats {
  AttentionDims dims;
  double entropy_sum = 0.0;      // sum over slices of raw per-slice entropy
  double sens_mass_sum = 0.0;    // sum over i in S and all slices of alpha
  double prefill_entropy = 0.0;  // conditional entropy of the prefill matrix
};

/// Report computed from sufficient statistics. The entropy term is always the
/// decode-slice mean, since statistics carry no prefill-row entropy mean.
MetricReport report_from_stats(const AttentionStats& stats, const MetricConfig& config,
                               double beta);

}  // namespace attnforge
