#include "attnforge/defense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace attnforge {

void DefenseConfig::validate() const {
  if (!std::isfinite(tau)) throw std::invalid_argument("tau must be finite");
  if (!std::isfinite(beta) || beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  if (warning_prefix.empty()) throw std::invalid_argument("warning prefix is empty");
}

std::string_view to_string(VerdictKind kind) {
  return kind == VerdictKind::Harmless ? "harmless" : "flagged";
}

DefenseVerdict decide(const MetricReport& report, std::string_view prompt,
                      const DefenseConfig& config) {
  config.validate();
  DefenseVerdict v;
  v.report = report;
  v.risk = report.risk;
  if (v.risk < config.tau) {
    v.kind = VerdictKind::Harmless;
    v.transformed_prompt = std::string(prompt);
  } else {
    v.kind = VerdictKind::Flagged;
    v.transformed_prompt = config.warning_prefix + std::string(prompt);
  }
  return v;
}

MetricReport defense_report(std::string_view prompt, const AttentionProvider& provider,
                            double beta, std::uint64_t seed, double norm_tol) {
  auto result = provider.provide({std::string(prompt), 0, seed});
  MetricConfig config;
  config.entropy_source = EntropySource::Prefill;
  config.norm_tol = norm_tol;
  return full_report(result.prompt, result.decode, result.prefill, config, beta);
}

DefenseVerdict classify(std::string_view prompt, const AttentionProvider& provider,
                        const DefenseConfig& config) {
  config.validate();
  return decide(defense_report(prompt, provider, config.beta, config.seed, config.norm_tol),
                prompt, config);
}

DefenseVerdict fail_closed_verdict(std::string_view prompt, const DefenseConfig& config) {
  DefenseVerdict v;
  v.kind = VerdictKind::Flagged;
  v.risk = std::numeric_limits<double>::quiet_NaN();
  v.report.beta = config.beta;
  v.transformed_prompt = config.warning_prefix + std::string(prompt);
  return v;
}

nlohmann::ordered_json to_json(const DefenseVerdict& v) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(v.kind));
  j["risk"] = std::isfinite(v.risk) ? nlohmann::ordered_json(v.risk) : nlohmann::ordered_json();
  j["transformed_prompt"] = v.transformed_prompt;
  return j;
}

double calibrate_tau(std::vector<double> scores, double percentile) {
  if (scores.size() < kMinCalibrationScores) {
    throw std::invalid_argument("tau calibration needs at least " +
                                std::to_string(kMinCalibrationScores) + " benign scores, got " +
                                std::to_string(scores.size()));
  }
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("percentile must lie in (0, 100]");
  }
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  // p*n/100 is evaluated before the ceiling so that exact ranks stay exact.
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, scores.size());
  return scores[rank - 1];
}

std::string_view to_string(Label label) { return label == Label::Benign ? "benign" : "attack"; }

Label parse_label(std::string_view text) {
  if (text == "benign") return Label::Benign;
  if (text == "attack") return Label::Attack;
  throw std::invalid_argument("unknown label '" + std::string(text) + "'");
}

BetaGrid BetaGrid::parse(std::string_view text) {
  BetaGrid grid;
  const auto a = text.find(':');
  const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
  if (a == std::string_view::npos || b == std::string_view::npos) {
    throw std::invalid_argument("beta grid must be lo:hi:step");
  }
  auto number = [&](std::string_view part) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(std::string(part), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) {
      throw std::invalid_argument("beta grid must be lo:hi:step, got '" + std::string(text) + "'");
    }
    return v;
  };
  grid.lo = number(text.substr(0, a));
  grid.hi = number(text.substr(a + 1, b - a - 1));
  grid.step = number(text.substr(b + 1));
  grid.values();  // validates
  return grid;
}

std::vector<double> BetaGrid::values() const {
  if (!(lo >= 0.0) || !(hi >= lo) || !(step > 0.0) || !std::isfinite(hi)) {
    throw std::invalid_argument("beta grid needs 0 <= lo <= hi and step > 0");
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(lo + static_cast<double>(k) * step);
  return out;
}

namespace {

std::pair<std::size_t, std::size_t> count_labels(const std::vector<Label>& labels) {
  const auto attacks =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Attack));
  return {labels.size() - attacks, attacks};
}

}  // namespace

double best_balanced_accuracy(const std::vector<double>& risks, const std::vector<Label>& labels) {
  if (risks.size() != labels.size()) throw std::invalid_argument("risk/label size mismatch");
  const auto [benign, attacks] = count_labels(labels);
  if (benign == 0 || attacks == 0) {
    throw std::invalid_argument("balanced accuracy needs both benign and attack examples");
  }
  std::vector<std::size_t> order(risks.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return risks[a] > risks[b]; });

  // Threshold above every risk flags nothing: TPR 0, TNR 1.
  double best = 0.5;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double r = risks[order[k]];
    for (; k < order.size() && risks[order[k]] == r; ++k) {
      (labels[order[k]] == Label::Attack ? tp : fp) += 1;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(attacks);
    const double tnr = 1.0 - static_cast<double>(fp) / static_cast<double>(benign);
    best = std::max(best, 0.5 * (tpr + tnr));
  }
  return best;
}

BetaSearchResult grid_search_beta(const std::vector<LabeledScore>& labeled, const BetaGrid& grid) {
  std::vector<Label> labels;
  labels.reserve(labeled.size());
  for (const auto& s : labeled) labels.push_back(s.label);
  const auto [benign, attacks] = count_labels(labels);
  if (benign == 0 || attacks == 0) {
    throw std::invalid_argument("beta grid search needs both benign and attack examples");
  }

  BetaSearchResult result;
  bool first = true;
  std::vector<double> risks(labeled.size());
  for (double beta : grid.values()) {
    for (std::size_t k = 0; k < labeled.size(); ++k) {
      risks[k] = risk_score(labeled[k].attn_entropy, labeled[k].cond_entropy, beta);
    }
    const double ba = best_balanced_accuracy(risks, labels);
    result.curve.emplace_back(beta, ba);
    if (first || ba > result.balanced_accuracy + 1e-12) {
      result.beta = beta;
      result.balanced_accuracy = ba;
      first = false;
    }
  }
  return result;
}

double roc_auc(const std::vector<double>& scores, const std::vector<Label>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("score/label size mismatch");
  const auto [benign, attacks] = count_labels(labels);
  if (benign == 0 || attacks == 0) {
    throw std::invalid_argument("ROC-AUC needs both benign and attack examples");
  }
  // Mann-Whitney U with midranks.
  std::vector<std::size_t> order(scores.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double attack_rank_sum = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t end = k;
    while (end < order.size() && scores[order[end]] == scores[order[k]]) ++end;
    const double midrank = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t q = k; q < end; ++q) {
      if (labels[order[q]] == Label::Attack) attack_rank_sum += midrank;
    }
    k = end;
  }
  const double a = static_cast<double>(attacks), b = static_cast<double>(benign);
  return (attack_rank_sum - a * (a + 1.0) / 2.0) / (a * b);
}

nlohmann::ordered_json to_json(const CalibrationArtifact& c) {
  nlohmann::ordered_json j;
  j["tau"] = c.tau;
  j["beta"] = c.beta;
  j["percentile"] = c.percentile;
  j["corpus_hash"] = c.corpus_hash;
  j["created_at"] = c.created_at.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(c.created_at);
  return j;
}

CalibrationArtifact calibration_from_json(const nlohmann::json& j) {
  try {
    CalibrationArtifact c;
    c.tau = j.at("tau").get<double>();
    c.beta = j.at("beta").get<double>();
    c.percentile = j.at("percentile").get<double>();
    c.corpus_hash = j.at("corpus_hash").get<std::string>();
    if (j.contains("created_at") && j["created_at"].is_string()) {
      c.created_at = j["created_at"].get<std::string>();
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed calibration artifact: ") + e.what());
  }
}

CalibrationArtifact load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open calibration file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed calibration file '" + path.string() + "': " + e.what());
  }
  // The CLI writes the artifact inside {"manifest", "calibration"}.
  if (j.contains("calibration")) return calibration_from_json(j["calibration"]);
  return calibration_from_json(j);
}

}  // namespace attnforge
