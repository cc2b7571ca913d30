#pragma once

// Attention tensor data model.
//
// Decode-time weights are stored densely in row-major (t, l, h, i) order so
// that every (t, l, h) slice is a contiguous run of `tokens` values. Replay
// fixtures rely on this layout.

#include <cstddef>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace attnforge {

inline constexpr double kDefaultNormTol = 1e-3;

// Summation rounding allowance applied on top of any normalization tolerance.
inline constexpr double kRoundingSlack = 1e-12;

/// Dimension or array-length mismatch. Distinct from a normalization failure,
/// which is reported through ValidationReport instead.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AttentionDims {
  std::size_t steps = 1;
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t tokens = 1;

  std::size_t slice_count() const { return steps * layers * heads; }
  std::size_t size() const { return slice_count() * tokens; }
  bool operator==(const AttentionDims&) const = default;
};

class AttentionTensor {
 public:
  /// Throws StructuralError if any dimension is zero or the value count is
  /// not steps*layers*heads*tokens.
  AttentionTensor(AttentionDims dims, std::vector<double> values);

  const AttentionDims& dims() const { return dims_; }
  std::span<const double> values() const { return values_; }

  double at(std::size_t t, std::size_t l, std::size_t h, std::size_t i) const;

  /// Slice by flat index in (t, l, h) order, 0 <= s < slice_count().
  std::span<const double> slice(std::size_t s) const;
  std::span<const double> slice(std::size_t t, std::size_t l, std::size_t h) const;

  bool operator==(const AttentionTensor&) const = default;

 private:
  AttentionDims dims_;
  std::vector<double> values_;
};

/// Averaged prefill self-attention, entry (i, j) = attention of position i to
/// position j. Rows are stored contiguously.
class PrefillAttentionMatrix {
 public:
  /// Throws StructuralError if tokens == 0 or the value count is not tokens^2.
  PrefillAttentionMatrix(std::size_t tokens, std::vector<double> values);

  /// Builds from nested rows; every row must have exactly rows.size() entries.
  static PrefillAttentionMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t tokens() const { return tokens_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const { return values_[i * tokens_ + j]; }
  std::vector<std::vector<double>> rows() const;

  bool operator==(const PrefillAttentionMatrix&) const = default;

 private:
  std::size_t tokens_;
  std::vector<double> values_;
};

struct SliceViolation {
  std::size_t step = 0;
  std::size_t layer = 0;
  std::size_t head = 0;
  double sum = 0.0;
  bool has_negative = false;
};

struct ValidationReport {
  bool valid = true;
  std::vector<SliceViolation> violations;

  std::string describe() const;
};

ValidationReport validate_tensor(const AttentionTensor& tensor, double norm_tol = kDefaultNormTol);

struct RowViolation {
  std::size_t row = 0;
  double sum = 0.0;
  bool has_negative = false;
  bool acausal = false;
};

struct PrefillValidationReport {
  bool valid = true;
  std::vector<RowViolation> violations;

  std::string describe() const;
};

PrefillValidationReport validate_prefill(const PrefillAttentionMatrix& prefill,
                                         double norm_tol = kDefaultNormTol);

/// Thrown when an operation receives a tensor that fails validation; carries
/// the report.
class InvalidTensorError : public std::runtime_error {
 public:
  explicit InvalidTensorError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

class InvalidPrefillError : public std::runtime_error {
 public:
  explicit InvalidPrefillError(PrefillValidationReport report);
  const PrefillValidationReport& report() const { return report_; }

 private:
  PrefillValidationReport report_;
};

/// Throws InvalidTensorError / InvalidPrefillError when validation fails.
void require_valid(const AttentionTensor& tensor, double norm_tol = kDefaultNormTol);
void require_valid(const PrefillAttentionMatrix& prefill, double norm_tol = kDefaultNormTol);

struct Token {
  std::string text;
  std::size_t start = 0;  // byte offset into the prompt text
  std::size_t end = 0;    // one past the last byte

  bool operator==(const Token&) const = default;
};

struct TokenizedPrompt {
  std::string text;
  std::vector<Token> tokens;
  std::set<std::size_t> sensitive_indices;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenizedPrompt&) const = default;
};

/// Checks span ordering/overlap, span bounds and sensitive index range.
/// Throws StructuralError describing the first problem found.
void validate_prompt(const TokenizedPrompt& prompt);

struct TokenWeightProfile {
  std::vector<double> weights;
};

/// weight[i] = mean over all (t, l, h) slices of values[t, l, h, i].
/// Throws InvalidTensorError if the tensor fails validation at norm_tol.
TokenWeightProfile aggregate_token_weights(const AttentionTensor& tensor,
                                           double norm_tol = kDefaultNormTol);

}  // namespace attnforge
