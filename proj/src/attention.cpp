#include "attnforge/attention.hpp"

#include <cmath>
#include <sstream>

namespace attnforge {

namespace {

bool out_of_tolerance(double sum, double norm_tol) {
  return !(std::abs(sum - 1.0) <= norm_tol + kRoundingSlack);
}

}  // namespace

AttentionTensor::AttentionTensor(AttentionDims dims, std::vector<double> values)
    : dims_(dims), values_(std::move(values)) {
  if (dims_.steps == 0 || dims_.layers == 0 || dims_.heads == 0 || dims_.tokens == 0) {
    throw StructuralError("attention tensor dimensions must all be positive");
  }
  if (values_.size() != dims_.size()) {
    std::ostringstream msg;
    msg << "attention tensor expects " << dims_.size() << " values (T=" << dims_.steps
        << " L=" << dims_.layers << " H=" << dims_.heads << " M=" << dims_.tokens << "), got "
        << values_.size();
    throw StructuralError(msg.str());
  }
}

double AttentionTensor::at(std::size_t t, std::size_t l, std::size_t h, std::size_t i) const {
  return values_[((t * dims_.layers + l) * dims_.heads + h) * dims_.tokens + i];
}

std::span<const double> AttentionTensor::slice(std::size_t s) const {
  return std::span<const double>(values_).subspan(s * dims_.tokens, dims_.tokens);
}

std::span<const double> AttentionTensor::slice(std::size_t t, std::size_t l, std::size_t h) const {
  return slice((t * dims_.layers + l) * dims_.heads + h);
}

PrefillAttentionMatrix::PrefillAttentionMatrix(std::size_t tokens, std::vector<double> values)
    : tokens_(tokens), values_(std::move(values)) {
  if (tokens_ == 0) {
    throw StructuralError("prefill matrix needs at least one token");
  }
  if (values_.size() != tokens_ * tokens_) {
    std::ostringstream msg;
    msg << "prefill matrix expects " << tokens_ * tokens_ << " values, got " << values_.size();
    throw StructuralError(msg.str());
  }
}

PrefillAttentionMatrix PrefillAttentionMatrix::from_rows(
    const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  flat.reserve(rows.size() * rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) {
      std::ostringstream msg;
      msg << "prefill row " << i << " has " << rows[i].size() << " entries, expected "
          << rows.size();
      throw StructuralError(msg.str());
    }
    flat.insert(flat.end(), rows[i].begin(), rows[i].end());
  }
  return PrefillAttentionMatrix(rows.size(), std::move(flat));
}

std::span<const double> PrefillAttentionMatrix::row(std::size_t i) const {
  return std::span<const double>(values_).subspan(i * tokens_, tokens_);
}

std::vector<std::vector<double>> PrefillAttentionMatrix::rows() const {
  std::vector<std::vector<double>> out;
  out.reserve(tokens_);
  for (std::size_t i = 0; i < tokens_; ++i) {
    auto r = row(i);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

std::string ValidationReport::describe() const {
  if (valid) return "valid";
  std::ostringstream out;
  out << violations.size() << " slice(s) violate normalization:";
  for (const auto& v : violations) {
    out << " (" << v.step << "," << v.layer << "," << v.head << ") sum=" << v.sum;
    if (v.has_negative) out << " [negative]";
  }
  return out.str();
}

ValidationReport validate_tensor(const AttentionTensor& tensor, double norm_tol) {
  if (!(norm_tol > 0.0)) {
    throw std::invalid_argument("norm_tol must be positive");
  }
  const auto& d = tensor.dims();
  ValidationReport report;
  for (std::size_t t = 0; t < d.steps; ++t) {
    for (std::size_t l = 0; l < d.layers; ++l) {
      for (std::size_t h = 0; h < d.heads; ++h) {
        double sum = 0.0;
        bool negative = false;
        for (double v : tensor.slice(t, l, h)) {
          sum += v;
          negative = negative || v < 0.0 || std::isnan(v);
        }
        if (negative || out_of_tolerance(sum, norm_tol)) {
          report.valid = false;
          report.violations.push_back({t, l, h, sum, negative});
        }
      }
    }
  }
  return report;
}

std::string PrefillValidationReport::describe() const {
  if (valid) return "valid";
  std::ostringstream out;
  out << violations.size() << " prefill row(s) invalid:";
  for (const auto& v : violations) {
    out << " row " << v.row << " sum=" << v.sum;
    if (v.has_negative) out << " [negative]";
    if (v.acausal) out << " [mass above diagonal]";
  }
  return out.str();
}

PrefillValidationReport validate_prefill(const PrefillAttentionMatrix& prefill, double norm_tol) {
  if (!(norm_tol > 0.0)) {
    throw std::invalid_argument("norm_tol must be positive");
  }
  PrefillValidationReport report;
  const std::size_t m = prefill.tokens();
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    bool negative = false;
    bool acausal = false;
    auto r = prefill.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      sum += r[j];
      negative = negative || r[j] < 0.0 || std::isnan(r[j]);
      acausal = acausal || (j > i && r[j] != 0.0);
    }
    if (negative || acausal || out_of_tolerance(sum, norm_tol)) {
      report.valid = false;
      report.violations.push_back({i, sum, negative, acausal});
    }
  }
  return report;
}

InvalidTensorError::InvalidTensorError(ValidationReport report)
    : std::runtime_error("invalid attention tensor: " + report.describe()),
      report_(std::move(report)) {}

InvalidPrefillError::InvalidPrefillError(PrefillValidationReport report)
    : std::runtime_error("invalid prefill matrix: " + report.describe()),
      report_(std::move(report)) {}

void require_valid(const AttentionTensor& tensor, double norm_tol) {
  auto report = validate_tensor(tensor, norm_tol);
  if (!report.valid) throw InvalidTensorError(std::move(report));
}

void require_valid(const PrefillAttentionMatrix& prefill, double norm_tol) {
  auto report = validate_prefill(prefill, norm_tol);
  if (!report.valid) throw InvalidPrefillError(std::move(report));
}

void validate_prompt(const TokenizedPrompt& prompt) {
  std::size_t prev_end = 0;
  for (std::size_t k = 0; k < prompt.tokens.size(); ++k) {
    const auto& tok = prompt.tokens[k];
    if (tok.start > tok.end || tok.end > prompt.text.size()) {
      throw StructuralError("token " + std::to_string(k) + " has an invalid span");
    }
    if (k > 0 && tok.start < prev_end) {
      throw StructuralError("token " + std::to_string(k) +
                            " overlaps or precedes the previous token span");
    }
    prev_end = tok.end;
  }
  for (std::size_t idx : prompt.sensitive_indices) {
    if (idx >= prompt.tokens.size()) {
      throw StructuralError("sensitive index " + std::to_string(idx) + " out of range");
    }
  }
}

TokenWeightProfile aggregate_token_weights(const AttentionTensor& tensor, double norm_tol) {
  require_valid(tensor, norm_tol);
  const auto& d = tensor.dims();
  TokenWeightProfile profile;
  profile.weights.assign(d.tokens, 0.0);
  for (std::size_t s = 0; s < d.slice_count(); ++s) {
    auto slice = tensor.slice(s);
    for (std::size_t i = 0; i < d.tokens; ++i) profile.weights[i] += slice[i];
  }
  const double scale = 1.0 / static_cast<double>(d.slice_count());
  for (double& w : profile.weights) w *= scale;
  return profile;
}

}  // namespace attnforge
