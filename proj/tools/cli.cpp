#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "attnforge/attack.hpp"
#include "attnforge/corpus.hpp"
#include "attnforge/defense.hpp"
#include "attnforge/generator.hpp"
#include "attnforge/metrics.hpp"
#include "attnforge/replay.hpp"
#include "common.hpp"

namespace attnforge::cli {

namespace {

struct GlobalOptions {
  bool no_timestamp = false;
};

// Provider failures map to the infrastructure code; bad prompts (too short
// for normalized entropy, no recorded fixture) to the input code.
template <typename F>
auto guarded(const std::string& id, F f) {
  try {
    return f();
  } catch (const FixtureMissingError& e) {
    throw input_error("prompt '" + id + "': " + e.what());
  } catch (const ProviderError& e) {
    throw CliError(kExitInfrastructure, "prompt '" + id + "': " + e.what());
  } catch (const InvalidTensorError& e) {
    throw CliError(kExitInfrastructure, "prompt '" + id + "': " + e.what());
  } catch (const InvalidPrefillError& e) {
    throw CliError(kExitInfrastructure, "prompt '" + id + "': " + e.what());
  } catch (const std::logic_error& e) {
    throw input_error("prompt '" + id + "': " + e.what());
  }
}

void write_manifest_beside(const std::string& output, const Manifest& manifest) {
  if (!output.empty()) emit(output + ".manifest.json", dump(manifest.to_json()), std::cout);
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOptions {
  std::optional<std::string> prompt;
  std::optional<std::string> file;
  ProviderOptions provider;
  double beta = 0.0;
  std::size_t probe_steps = kDefaultProbeSteps;
  std::string format = "json";
  std::string entropy_source = "prefill";
  bool raw_entropy = false;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string output;
};

void add_analyze(CLI::App& app, AnalyzeOptions& o) {
  auto* cmd = app.add_subcommand("analyze", "Attention metrics for prompts");
  cmd->configurable();
  cmd->add_option("--prompt", o.prompt, "Single prompt text");
  cmd->add_option("--file", o.file, "JSONL prompts {id, prompt, ...}");
  add_provider_options(cmd, o.provider);
  cmd->add_option("--beta", o.beta, "Weight of the conditional entropy in the risk score")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--probe-steps", o.probe_steps, "Decode steps captured")->capture_default_str();
  cmd->add_option("--out", o.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  cmd->add_option("--entropy-source", o.entropy_source, "Entropy term source")
      ->check(CLI::IsMember({"prefill", "decode"}))
      ->capture_default_str();
  cmd->add_flag("--raw-entropy", o.raw_entropy, "Do not divide the entropy by log M");
  cmd->add_option("--seed", o.seed, "Provider seed")->capture_default_str();
  cmd->add_option("--jobs", o.jobs, "Concurrent prompts")->check(CLI::PositiveNumber);
  cmd->add_option("--output", o.output, "Output file (default stdout)");
}

int run_analyze(const AnalyzeOptions& o, const GlobalOptions& g, std::ostream& out) {
  Manifest manifest;
  manifest.command = "analyze";
  manifest.timestamp = !g.no_timestamp;
  const auto prompts = load_prompts(o.prompt, o.file, manifest);
  const auto provider = make_provider(o.provider, lexicon_from_option(o.provider.lexicon));
  if (!o.provider.lexicon.empty()) manifest.add_input(o.provider.lexicon);

  MetricConfig config;
  config.entropy_normalized = !o.raw_entropy;
  config.entropy_source = parse_entropy_source(o.entropy_source);
  manifest.provider = provider->id();
  manifest.config = to_json(o.provider);
  manifest.config["beta"] = o.beta;
  manifest.config["probe_steps"] = o.probe_steps;
  manifest.config["entropy_source"] = o.entropy_source;
  manifest.config["normalized"] = config.entropy_normalized;
  manifest.config["format"] = o.format;
  manifest.seeds["seed"] = o.seed;

  const auto reports = ordered_map(prompts.size(), o.jobs, [&](std::size_t k) {
    return guarded(prompts[k].id, [&] {
      const auto r = provider->provide({prompts[k].prompt, o.probe_steps, o.seed});
      return full_report(r.prompt, r.decode, r.prefill, config, o.beta);
    });
  });

  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "id,asw,entropy,cond_entropy,risk,beta,normalized,source\n";
    for (std::size_t k = 0; k < prompts.size(); ++k) {
      const auto& r = reports[k];
      csv << csv_field(prompts[k].id) << ',' << format_double(r.asw) << ','
          << format_double(r.entropy) << ',' << format_double(r.cond_entropy) << ','
          << format_double(r.risk) << ',' << format_double(r.beta) << ','
          << (r.normalized ? "true" : "false") << ',' << to_string(r.source) << '\n';
    }
    emit(o.output, csv.str(), out);
    write_manifest_beside(o.output, manifest);
    return kExitOk;
  }

  nlohmann::ordered_json doc;
  doc["manifest"] = manifest.to_json();
  auto items = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    nlohmann::ordered_json item;
    item["id"] = prompts[k].id;
    const auto fields = to_json(reports[k]);
    for (const auto& [key, value] : fields.items()) item[key] = value;
    items.push_back(std::move(item));
  }
  doc["reports"] = std::move(items);
  emit(o.output, dump(doc), out);
  return kExitOk;
}

// ---------------------------------------------------------------- attack

struct AttackOptions {
  std::string query;
  std::string target = "mock";
  std::string judge = "refusal";
  ProviderOptions provider;
  AttackConfig config;
  std::size_t top_k = 0;  // 0: twice the beam width, capped at the candidate count
  std::string transcript;
  std::string output;
};

void add_attack(CLI::App& app, AttackOptions& o) {
  auto* cmd = app.add_subcommand("attack", "Attention-guided nested-task attack session");
  cmd->configurable();
  cmd->add_option("--query", o.query, "Task to disguise")->required();
  cmd->add_option("--target", o.target, "mock, mock:refuse, scripted:FILE or http:URL")
      ->capture_default_str();
  cmd->add_option("--judge", o.judge, "refusal, refusal:FILE, asw:THRESHOLD or never")
      ->capture_default_str();
  add_provider_options(cmd, o.provider);
  cmd->add_option("--layers", o.config.max_nesting_layers, "Maximum nesting layers")
      ->capture_default_str();
  cmd->add_option("--beam", o.config.beam_width, "Beam width B")->capture_default_str();
  cmd->add_option("--candidates", o.config.candidates_per_expansion,
                  "Candidates per expansion C")
      ->capture_default_str();
  cmd->add_option("--topk", o.top_k, "Stage-one filter size K (default min(2B, C))");
  cmd->add_option("--inner", o.config.inner_limit, "Attempts per scenario")->capture_default_str();
  cmd->add_option("--outer", o.config.outer_limit, "Scenarios to try")->capture_default_str();
  cmd->add_option("--probe-steps", o.config.probe_steps, "Decode steps used for scoring")
      ->capture_default_str();
  cmd->add_option("--seed", o.config.seed, "Generator and provider seed")->capture_default_str();
  cmd->add_option("--jobs", o.config.scoring_jobs, "Concurrent candidate scoring")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--transcript", o.transcript, "Write the full attempt log here");
  cmd->add_option("--output", o.output, "Outcome file (default stdout)");
}

int run_attack_cmd(AttackOptions o, const GlobalOptions& g, std::ostream& out) {
  if (o.query.empty()) throw input_error("--query is empty");
  o.config.filter_top_k =
      o.top_k > 0 ? o.top_k : std::min(2 * o.config.beam_width, o.config.candidates_per_expansion);
  try {
    o.config.validate();
  } catch (const std::invalid_argument& e) {
    throw input_error(e.what());
  }
  std::unique_ptr<TargetAdapter> target;
  std::unique_ptr<SuccessJudge> judge;
  try {
    target = make_target(o.target);
  } catch (const std::exception& e) {
    throw input_error(std::string("--target: ") + e.what());
  }
  try {
    judge = make_judge(o.judge);
  } catch (const std::exception& e) {
    throw input_error(std::string("--judge: ") + e.what());
  }
  const auto provider = make_provider(o.provider, lexicon_from_option(o.provider.lexicon));
  const TemplateGenerator generator(default_scenarios(), o.config.seed);

  Manifest manifest;
  manifest.command = "attack";
  manifest.timestamp = !g.no_timestamp;
  manifest.provider = provider->id();
  manifest.config = to_json(o.provider);
  const auto attack_config = to_json(o.config);
  for (const auto& [key, value] : attack_config.items()) manifest.config[key] = value;
  manifest.config["target"] = target->id();
  manifest.config["judge"] = judge->id();
  manifest.config["generator"] = generator.id();
  manifest.seeds["seed"] = o.config.seed;
  if (!o.provider.lexicon.empty()) manifest.add_input(o.provider.lexicon);

  const auto outcome = run_attack(o.query, *target, *judge, *provider, generator, o.config);

  if (!o.transcript.empty()) {
    nlohmann::ordered_json t;
    t["manifest"] = manifest.to_json();
    t["transcript"] = transcript_json(outcome);
    emit(o.transcript, dump(t), out);
  }
  nlohmann::ordered_json doc;
  doc["manifest"] = manifest.to_json();
  doc["outcome"] = to_json(outcome);
  emit(o.output, dump(doc), out);

  if (outcome.success) return kExitOk;
  const auto& log = outcome.state.transcript;
  const bool all_errored =
      !log.empty() && std::all_of(log.begin(), log.end(), [](const AttemptRecord& r) { return r.errored; });
  return all_errored ? kExitInfrastructure : kExitBudgetExhausted;
}

// ---------------------------------------------------------------- defend

struct DefendOptions {
  std::optional<std::string> prompt;
  std::optional<std::string> file;
  std::optional<double> tau;
  std::optional<double> beta;
  std::optional<std::string> calibration;
  std::vector<std::string> calibration_corpus;
  bool rescore = false;
  bool fail_open = false;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  ProviderOptions provider;
  std::string output;
};

void add_defend(CLI::App& app, DefendOptions& o) {
  auto* cmd = app.add_subcommand("defend", "Risk-score firewall verdicts");
  cmd->configurable();
  cmd->add_option("--prompt", o.prompt, "Single prompt text");
  cmd->add_option("--file", o.file, "JSONL prompts {id, prompt, ...}");
  cmd->add_option("--tau", o.tau, "Risk threshold");
  cmd->add_option("--beta", o.beta, "Conditional entropy weight")->check(CLI::NonNegativeNumber);
  cmd->add_option("--calibration", o.calibration, "Calibration artifact from `calibrate`");
  cmd->add_option("--calibration-corpus", o.calibration_corpus,
                  "Corpus files the artifact should have been built from, in calibrate order "
                  "(benign, labeled); a hash mismatch warns");
  cmd->add_flag("--rescore", o.rescore, "Also score the prefixed prompt of flagged verdicts");
  cmd->add_flag("--fail-open", o.fail_open,
                "On provider failure pass the prompt through instead of flagging it");
  cmd->add_option("--seed", o.seed, "Provider seed")->capture_default_str();
  cmd->add_option("--jobs", o.jobs, "Concurrent prompts")->check(CLI::PositiveNumber);
  add_provider_options(cmd, o.provider);
  cmd->add_option("--output", o.output, "Output file (default stdout)");
}

int run_defend(const DefendOptions& o, const GlobalOptions& g, std::ostream& out,
               std::ostream& err) {
  const bool direct = o.tau || o.beta;
  if (direct == o.calibration.has_value()) {
    throw input_error("give either --tau with --beta, or --calibration");
  }
  if (direct && !(o.tau && o.beta)) throw input_error("--tau and --beta must be given together");

  Manifest manifest;
  manifest.command = "defend";
  manifest.timestamp = !g.no_timestamp;
  DefenseConfig config;
  config.seed = o.seed;
  if (o.calibration) {
    CalibrationArtifact artifact;
    try {
      artifact = load_calibration(*o.calibration);
    } catch (const std::invalid_argument& e) {
      throw input_error(std::string("--calibration: ") + e.what());
    }
    manifest.add_input(*o.calibration);
    config.tau = artifact.tau;
    config.beta = artifact.beta;
    if (!o.calibration_corpus.empty()) {
      std::vector<CorpusEntry> all;
      for (const auto& path : o.calibration_corpus) {
        auto part = load_corpus_option("--calibration-corpus", path, manifest);
        all.insert(all.end(), part.begin(), part.end());
      }
      const auto hash = corpus_hash(all);
      if (hash != artifact.corpus_hash) {
        err << "warning: calibration corpus hash " << hash << " differs from the artifact's "
            << artifact.corpus_hash << "\n";
      }
    }
  } else {
    config.tau = *o.tau;
    config.beta = *o.beta;
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw input_error(e.what());
  }

  const auto prompts = load_prompts(o.prompt, o.file, manifest);
  const auto provider = make_provider(o.provider, lexicon_from_option(o.provider.lexicon));
  if (!o.provider.lexicon.empty()) manifest.add_input(o.provider.lexicon);
  manifest.provider = provider->id();
  manifest.config = to_json(o.provider);
  manifest.config["tau"] = config.tau;
  manifest.config["beta"] = config.beta;
  manifest.config["fail_open"] = o.fail_open;
  manifest.config["rescore"] = o.rescore;
  manifest.seeds["seed"] = o.seed;

  struct Row {
    DefenseVerdict verdict;
    std::optional<MetricReport> rescored;
    std::string error;
  };
  const auto rows = ordered_map(prompts.size(), o.jobs, [&](std::size_t k) {
    const auto& text = prompts[k].prompt;
    Row row;
    try {
      row.verdict = guarded(prompts[k].id, [&] { return classify(text, *provider, config); });
      if (o.rescore && row.verdict.kind == VerdictKind::Flagged) {
        row.rescored = guarded(prompts[k].id, [&] {
          return defense_report(row.verdict.transformed_prompt, *provider, config.beta, config.seed);
        });
      }
    } catch (const CliError& e) {
      if (e.code() != kExitInfrastructure) throw;
      row.error = e.what();
      if (o.fail_open) {
        row.verdict = DefenseVerdict{};
        row.verdict.risk = std::nan("");
        row.verdict.transformed_prompt = text;
      } else {
        row.verdict = fail_closed_verdict(text, config);
      }
    }
    return row;
  });

  bool infra_failure = false;
  nlohmann::ordered_json doc;
  doc["manifest"] = manifest.to_json();
  auto verdicts = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    nlohmann::ordered_json v;
    v["id"] = prompts[k].id;
    const auto fields = to_json(rows[k].verdict);
    for (const auto& [key, value] : fields.items()) v[key] = value;
    if (rows[k].rescored) {
      v["rescored"] = {{"entropy", rows[k].rescored->entropy}, {"risk", rows[k].rescored->risk}};
    }
    if (!rows[k].error.empty()) {
      v["error"] = rows[k].error;
      err << "error: " << rows[k].error << "\n";
      infra_failure = true;
    }
    verdicts.push_back(std::move(v));
  }
  doc["verdicts"] = std::move(verdicts);
  emit(o.output, dump(doc), out);
  return infra_failure ? kExitInfrastructure : kExitOk;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateOptions {
  std::string benign;
  std::string labeled;
  double percentile = 95.0;
  std::string beta_grid = "0:10:1";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  ProviderOptions provider;
  std::string output;
};

void add_calibrate(CLI::App& app, CalibrateOptions& o) {
  auto* cmd = app.add_subcommand("calibrate", "Fit beta by grid search and tau on benign risks");
  cmd->configurable();
  cmd->add_option("--benign", o.benign,
                  "JSONL benign prompts for tau (default: benign entries of --labeled)");
  cmd->add_option("--labeled", o.labeled, "JSONL prompts labelled benign|attack")->required();
  cmd->add_option("--percentile", o.percentile, "Benign risk percentile for tau")
      ->capture_default_str();
  cmd->add_option("--beta-grid", o.beta_grid, "lo:hi:step")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Provider seed")->capture_default_str();
  cmd->add_option("--jobs", o.jobs, "Concurrent prompts")->check(CLI::PositiveNumber);
  add_provider_options(cmd, o.provider);
  cmd->add_option("--output", o.output, "Artifact file (default stdout)");
}

int run_calibrate(const CalibrateOptions& o, const GlobalOptions& g, std::ostream& out) {
  Manifest manifest;
  manifest.command = "calibrate";
  manifest.timestamp = !g.no_timestamp;

  BetaGrid grid;
  try {
    grid = BetaGrid::parse(o.beta_grid);
  } catch (const std::invalid_argument& e) {
    throw input_error(std::string("--beta-grid: ") + e.what());
  }
  std::vector<CorpusEntry> benign;
  if (!o.benign.empty()) benign = load_corpus_option("--benign", o.benign, manifest);
  const auto labeled = load_corpus_option("--labeled", o.labeled, manifest);
  if (labeled.empty()) throw input_error("--labeled: no entries in '" + o.labeled + "'");
  for (const auto& e : labeled) {
    if (!e.label) throw input_error("--labeled: entry '" + e.id + "' has no label");
  }
  if (!o.benign.empty() && benign.empty()) throw input_error("--benign: no entries in '" + o.benign + "'");

  const auto provider = make_provider(o.provider, lexicon_from_option(o.provider.lexicon));
  if (!o.provider.lexicon.empty()) manifest.add_input(o.provider.lexicon);
  manifest.provider = provider->id();
  manifest.config = to_json(o.provider);
  manifest.config["percentile"] = o.percentile;
  manifest.config["beta_grid"] = o.beta_grid;
  manifest.seeds["seed"] = o.seed;

  auto score = [&](const std::vector<CorpusEntry>& entries) {
    return ordered_map(entries.size(), o.jobs, [&](std::size_t k) {
      return guarded(entries[k].id,
                     [&] { return defense_report(entries[k].prompt, *provider, 0.0, o.seed); });
    });
  };
  const auto labeled_reports = score(labeled);
  std::vector<LabeledScore> scores;
  for (std::size_t k = 0; k < labeled.size(); ++k) {
    scores.push_back({labeled_reports[k].entropy, labeled_reports[k].cond_entropy, *labeled[k].label});
  }

  BetaSearchResult search;
  try {
    search = grid_search_beta(scores, grid);
  } catch (const std::invalid_argument& e) {
    throw input_error(std::string("--labeled: ") + e.what());
  }

  std::vector<double> benign_risks;
  if (!benign.empty()) {
    for (const auto& r : score(benign)) benign_risks.push_back(risk_score(r.entropy, r.cond_entropy, search.beta));
  } else {
    for (const auto& s : scores) {
      if (s.label == Label::Benign) benign_risks.push_back(risk_score(s.attn_entropy, s.cond_entropy, search.beta));
    }
  }
  CalibrationArtifact artifact;
  try {
    artifact.tau = calibrate_tau(benign_risks, o.percentile);
  } catch (const std::invalid_argument& e) {
    throw input_error(std::string(o.benign.empty() ? "--labeled: " : "--benign: ") + e.what());
  }
  artifact.beta = search.beta;
  artifact.percentile = o.percentile;
  std::vector<CorpusEntry> all = benign;
  all.insert(all.end(), labeled.begin(), labeled.end());
  artifact.corpus_hash = corpus_hash(all);
  if (!g.no_timestamp) artifact.created_at = utc_timestamp();

  std::vector<double> risks;
  std::vector<Label> labels;
  for (const auto& s : scores) {
    risks.push_back(risk_score(s.attn_entropy, s.cond_entropy, search.beta));
    labels.push_back(s.label);
  }

  nlohmann::ordered_json doc;
  doc["manifest"] = manifest.to_json();
  doc["calibration"] = to_json(artifact);
  doc["balanced_accuracy"] = search.balanced_accuracy;
  doc["roc_auc"] = roc_auc(risks, labels);
  auto curve = nlohmann::ordered_json::array();
  for (const auto& [beta, ba] : search.curve) curve.push_back({{"beta", beta}, {"balanced_accuracy", ba}});
  doc["curve"] = std::move(curve);
  emit(o.output, dump(doc), out);
  if (!o.output.empty()) {
    out << "tau=" << format_double(artifact.tau) << " beta=" << format_double(artifact.beta) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  std::string input;
  std::string by = "label";
  bool compare_defense = false;
  ProviderOptions provider;
  double beta = 0.0;
  std::size_t probe_steps = kDefaultProbeSteps;
  std::string entropy_source = "decode";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string output;
};

void add_report(CLI::App& app, ReportOptions& o) {
  auto* cmd = app.add_subcommand("report", "Grouped metric means as CSV");
  cmd->configurable();
  cmd->add_option("--input", o.input, "JSONL corpus (label, group and success are optional)")
      ->required();
  cmd->add_option("--by", o.by, "Grouping key")
      ->check(CLI::IsMember({"label", "group"}))
      ->capture_default_str();
  cmd->add_flag("--compare-defense", o.compare_defense,
                "Per-prompt prefill entropy before and after the warning prefix");
  cmd->add_option("--beta", o.beta, "Conditional entropy weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--probe-steps", o.probe_steps, "Decode steps captured")->capture_default_str();
  cmd->add_option("--entropy-source", o.entropy_source, "Entropy term source")
      ->check(CLI::IsMember({"prefill", "decode"}))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Provider seed")->capture_default_str();
  cmd->add_option("--jobs", o.jobs, "Concurrent prompts")->check(CLI::PositiveNumber);
  add_provider_options(cmd, o.provider);
  cmd->add_option("--output", o.output, "CSV file (default stdout)");
}

int run_report(const ReportOptions& o, const GlobalOptions& g, std::ostream& out) {
  Manifest manifest;
  manifest.command = "report";
  manifest.timestamp = !g.no_timestamp;
  const auto entries = load_corpus_option("--input", o.input, manifest);
  if (entries.empty()) throw input_error("--input: no entries in '" + o.input + "'");
  const auto provider = make_provider(o.provider, lexicon_from_option(o.provider.lexicon));
  manifest.provider = provider->id();
  manifest.config = to_json(o.provider);
  manifest.config["by"] = o.by;
  manifest.config["compare_defense"] = o.compare_defense;
  manifest.config["beta"] = o.beta;
  manifest.config["probe_steps"] = o.probe_steps;
  manifest.config["entropy_source"] = o.entropy_source;
  manifest.seeds["seed"] = o.seed;

  auto group_of = [&](const CorpusEntry& e) -> std::string {
    if (o.by == "group") return e.group.value_or("-");
    return e.label ? std::string(to_string(*e.label)) : "unlabeled";
  };

  std::ostringstream csv;
  if (o.compare_defense) {
    const std::string prefix(kWarningPrefix);
    const auto pairs = ordered_map(entries.size(), o.jobs, [&](std::size_t k) {
      return guarded(entries[k].id, [&] {
        const auto before = defense_report(entries[k].prompt, *provider, o.beta, o.seed);
        const auto after = defense_report(prefix + entries[k].prompt, *provider, o.beta, o.seed);
        return std::make_pair(before, after);
      });
    });
    csv << "id,group,entropy,defended_entropy,risk,defended_risk\n";
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& [before, after] = pairs[k];
      csv << csv_field(entries[k].id) << ',' << csv_field(group_of(entries[k])) << ','
          << format_double(before.entropy) << ',' << format_double(after.entropy) << ','
          << format_double(before.risk) << ',' << format_double(after.risk) << '\n';
    }
  } else {
    MetricConfig config;
    config.entropy_source = parse_entropy_source(o.entropy_source);
    const auto reports = ordered_map(entries.size(), o.jobs, [&](std::size_t k) {
      return guarded(entries[k].id, [&] {
        const auto r = provider->provide({entries[k].prompt, o.probe_steps, o.seed});
        return full_report(r.prompt, r.decode, r.prefill, config, o.beta);
      });
    });
    struct Acc {
      std::size_t count = 0;
      double asw = 0, entropy = 0, cond = 0, risk = 0;
      std::size_t judged = 0, successes = 0;
    };
    std::vector<std::string> order;
    std::map<std::string, Acc> groups;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto key = group_of(entries[k]);
      if (!groups.contains(key)) order.push_back(key);
      auto& a = groups[key];
      ++a.count;
      a.asw += reports[k].asw;
      a.entropy += reports[k].entropy;
      a.cond += reports[k].cond_entropy;
      a.risk += reports[k].risk;
      if (entries[k].success) {
        ++a.judged;
        a.successes += *entries[k].success ? 1 : 0;
      }
    }
    csv << "group,count,mean_asw,mean_entropy,mean_cond_entropy,mean_risk,success_rate\n";
    for (const auto& key : order) {
      const auto& a = groups[key];
      const double n = static_cast<double>(a.count);
      csv << csv_field(key) << ',' << a.count << ',' << format_double(a.asw / n) << ','
          << format_double(a.entropy / n) << ',' << format_double(a.cond / n) << ','
          << format_double(a.risk / n) << ',';
      if (a.judged > 0) {
        csv << format_double(static_cast<double>(a.successes) / static_cast<double>(a.judged));
      }
      csv << '\n';
    }
  }
  emit(o.output, csv.str(), out);
  write_manifest_beside(o.output, manifest);
  return kExitOk;
}

// ---------------------------------------------------------------- synth-corpus

struct SynthOptions {
  std::size_t benign = 200;
  std::size_t attack = 200;
  std::uint64_t seed = 7;
  std::string output;
};

void add_synth(CLI::App& app, SynthOptions& o) {
  auto* cmd = app.add_subcommand("synth-corpus", "Seeded benign/attack prompt corpus as JSONL");
  cmd->configurable();
  cmd->add_option("--benign", o.benign, "Plain prompts")->capture_default_str();
  cmd->add_option("--attack", o.attack, "Nested placeholder tasks")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Corpus seed")->capture_default_str();
  cmd->add_option("--output", o.output, "JSONL file (default stdout)");
}

int run_synth(const SynthOptions& o, const GlobalOptions& g, std::ostream& out) {
  Manifest manifest;
  manifest.command = "synth-corpus";
  manifest.timestamp = !g.no_timestamp;
  manifest.config["benign"] = o.benign;
  manifest.config["attack"] = o.attack;
  manifest.seeds["seed"] = o.seed;
  std::ostringstream jsonl;
  write_corpus(jsonl, synthetic_corpus(o.benign, o.attack, o.seed));
  emit(o.output, jsonl.str(), out);
  write_manifest_beside(o.output, manifest);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-distribution analysis, nested-task attack and entropy firewall",
               "attnforge"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file; keys are flag names, [command] sections apply "
                                 "to that command; flags given on the command line win");
  GlobalOptions global;
  app.add_flag("--no-timestamp", global.no_timestamp, "Omit timestamps for byte-stable output");

  AnalyzeOptions analyze;
  AttackOptions attack;
  DefendOptions defend;
  CalibrateOptions calibrate;
  ReportOptions report;
  SynthOptions synth;
  add_analyze(app, analyze);
  add_attack(app, attack);
  add_defend(app, defend);
  add_calibrate(app, calibrate);
  add_report(app, report);
  add_synth(app, synth);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (app.got_subcommand("analyze")) return run_analyze(analyze, global, out);
    if (app.got_subcommand("attack")) return run_attack_cmd(attack, global, out);
    if (app.got_subcommand("defend")) return run_defend(defend, global, out, err);
    if (app.got_subcommand("calibrate")) return run_calibrate(calibrate, global, out);
    if (app.got_subcommand("report")) return run_report(report, global, out);
    return run_synth(synth, global, out);
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const ProviderError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInfrastructure;
  } catch (const TargetTransportError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInfrastructure;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInfrastructure;
  }
}

}  // namespace attnforge::cli
