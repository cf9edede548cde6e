// Command-line front end: wires config, corpus, knowledge base, backend,
// traversal, metrics, and the analysis experiments into reproducible runs.
//
// Exit codes: 0 success, 2 input/config error, 3 partial failure,
// 4 backend exhaustion.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tgt/analysis.hpp"
#include "tgt/backend.hpp"
#include "tgt/config.hpp"
#include "tgt/corpus.hpp"
#include "tgt/errors.hpp"
#include "tgt/http_backend.hpp"
#include "tgt/knowledge.hpp"
#include "tgt/metrics.hpp"
#include "tgt/mock_backend.hpp"
#include "tgt/mock_server.hpp"
#include "tgt/rng.hpp"
#include "tgt/traversal.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tgt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitPartial = 3;
constexpr int kExitBackend = 4;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_id;
};

config::RunConfig load_config(const CommonArgs& args) {
  config::RunConfig cfg;
  if (!args.config_path.empty()) cfg = config::load_run_config(args.config_path);
  for (const auto& assignment : args.overrides) config::apply_override(cfg, assignment);
  config::validate(cfg);
  return cfg;
}

prompts::PromptTemplates load_templates(const config::RunConfig& cfg) {
  auto templates = prompts::default_templates();
  if (cfg.backend.templates_path.empty()) return templates;
  std::ifstream in(cfg.backend.templates_path);
  if (!in) throw ConfigError("cannot open templates: " + cfg.backend.templates_path);
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("templates " + cfg.backend.templates_path + ": " + e.what());
  }
  templates.answer = obj.value("answer", templates.answer);
  templates.verify = obj.value("verify", templates.verify);
  templates.report = obj.value("report", templates.report);
  templates.report_verify = obj.value("report_verify", templates.report_verify);
  templates.extract = obj.value("extract", templates.extract);
  templates.follow_up = obj.value("follow_up", templates.follow_up);
  return templates;
}

std::unique_ptr<backend::Backend> make_backend(const config::RunConfig& cfg) {
  const auto templates = load_templates(cfg);
  if (!cfg.backend.mock_script.empty()) {
    return std::make_unique<backend::MockBackend>(
        backend::load_mock_script(cfg.backend.mock_script), templates);
  }
  return std::make_unique<backend::HttpBackend>(config::backend_config_of(cfg), templates);
}

std::vector<knowledge::OrganId> load_organ_table(const config::RunConfig& cfg) {
  if (cfg.knowledge.organ_table.empty()) return knowledge::default_alias_table();
  return knowledge::load_alias_table(cfg.knowledge.organ_table);
}

knowledge::QuestionBank load_bank(const config::RunConfig& cfg,
                                  const std::vector<knowledge::OrganId>& organs) {
  if (cfg.knowledge.question_bank.empty()) return knowledge::default_question_bank(organs);
  return knowledge::load_question_bank(cfg.knowledge.question_bank);
}

corpus::CorpusFormat format_of(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
    return corpus::CorpusFormat::kCsv;
  return corpus::CorpusFormat::kJsonl;
}

std::string make_run_id(const std::string& requested, const std::string& config_snapshot) {
  if (!requested.empty()) return requested;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&now));
  char digest[16];
  std::snprintf(digest, sizeof(digest), "%08x",
                static_cast<unsigned>(rng::fnv1a64(config_snapshot) & 0xFFFFFFFFu));
  return std::string(stamp) + "-" + digest;
}

std::vector<corpus::PatientCase> select_cases(const corpus::Corpus& corpus,
                                              const std::vector<std::string>& filter) {
  if (!filter.empty()) {
    std::vector<corpus::PatientCase> selected;
    for (const auto& id : filter) {
      const auto it =
          std::find_if(corpus.cases.begin(), corpus.cases.end(),
                       [&](const corpus::PatientCase& c) { return c.case_id == id; });
      if (it == corpus.cases.end()) throw Error("unknown case_id in filter: " + id);
      selected.push_back(*it);
    }
    return selected;
  }
  std::vector<corpus::PatientCase> test_cases;
  for (const auto& c : corpus.cases)
    if (c.split_tag == corpus::SplitTag::kTest) test_cases.push_back(c);
  if (!test_cases.empty()) return test_cases;
  return corpus.cases;
}

// {case_id, text} per line.
std::vector<std::pair<std::string, std::string>> load_text_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "file does not exist");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    if (!obj.contains("case_id") || !obj.contains("text"))
      throw MissingField(path.string() + ":" + std::to_string(line_no) +
                         ": expected case_id and text");
    out.emplace_back(obj["case_id"].get<std::string>(), obj["text"].get<std::string>());
  }
  return out;
}

void print_metric_table(const metrics::MetricReport& report) {
  const auto values = report.as_array();
  static const char* kLabels[6] = {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "METEOR", "ROUGE-L"};
  std::printf("%-8s %8s\n", "metric", "score(%)");
  for (std::size_t i = 0; i < 6; ++i)
    std::printf("%-8s %8s\n", kLabels[i], metrics::format_percent(values[i]).c_str());
  std::printf("pairs=%zu candidate_tokens=%zu reference_tokens=%zu\n", report.pairs,
              report.candidate_tokens, report.reference_tokens);
}

void write_metrics_csv(const metrics::MetricReport& report, const fs::path& path) {
  std::ofstream out(path);
  out << "bleu1,bleu2,bleu3,bleu4,meteor,rouge_l\n";
  const auto values = report.as_array();
  for (std::size_t i = 0; i < 6; ++i) {
    if (i) out << ',';
    out << metrics::format_percent(values[i]);
  }
  out << '\n';
}

struct RunDirs {
  fs::path root;
  fs::path reports;
  fs::path traces;
};

RunDirs prepare_run_dir(const config::RunConfig& cfg, const std::string& run_id) {
  RunDirs dirs;
  dirs.root = fs::path(cfg.run.output_dir) / run_id;
  dirs.reports = dirs.root / "reports";
  dirs.traces = dirs.root / "traces";
  fs::create_directories(dirs.reports);
  fs::create_directories(dirs.traces);
  return dirs;
}

// ---------------------------------------------------------------------------

int cmd_build_db(const CommonArgs& common, const std::string& corpus_path,
                 const std::string& out_path) {
  auto cfg = load_config(common);
  auto corpus_data = corpus::load_corpus(corpus_path, format_of(corpus_path));

  bool has_train = false;
  for (const auto& c : corpus_data.cases)
    if (c.split_tag == corpus::SplitTag::kTrain) has_train = true;
  if (!has_train)
    corpus_data =
        corpus::split_corpus(corpus_data, cfg.run.train_fraction, config::require_seed(cfg));

  std::vector<std::string> train_reports;
  for (const auto& c : corpus_data.cases)
    if (c.split_tag == corpus::SplitTag::kTrain) train_reports.push_back(c.reference_report);

  const auto table = load_organ_table(cfg);
  std::unique_ptr<backend::Backend> llm;
  knowledge::ExtractorMode mode = knowledge::ExtractorMode::kRulebased;
  if (cfg.knowledge.extractor == "backend_llm") {
    mode = knowledge::ExtractorMode::kBackendLlm;
    llm = make_backend(cfg);
  }
  const auto organs = knowledge::extract_organs(train_reports, mode, table, llm.get());
  const auto db = knowledge::build_database(corpus_data, organs);
  knowledge::save_database(db, out_path);

  std::printf("organs: %zu\n", db.organs.size());
  for (const auto& organ : db.organs)
    std::printf("  %-14s pool=%zu\n", organ.canonical_name.c_str(),
                db.sentences.at(organ.canonical_name).size());
  std::printf("database written to %s\n", out_path.c_str());
  return kExitOk;
}

int cmd_generate(const CommonArgs& common, const std::string& corpus_path,
                 const std::string& db_path, const std::vector<std::string>& case_filter) {
  auto cfg = load_config(common);
  if (!fs::exists(db_path)) throw MissingDatabase("database file not found: " + db_path);
  const auto db = knowledge::load_database(db_path);
  const auto corpus_data = corpus::load_corpus(corpus_path, format_of(corpus_path));
  const auto cases = select_cases(corpus_data, case_filter);
  if (cases.empty()) throw Error("no cases selected");
  const auto seed = config::require_seed(cfg);

  const auto bank = load_bank(cfg, db.organs);
  const auto graph = traversal::build_graph(db, bank, std::nullopt, cfg.policy.question_limit);
  auto be = make_backend(cfg);
  const auto policy = config::budget_policy_of(cfg);
  const auto options = config::traversal_options_of(cfg);

  const std::string snapshot = config::run_config_to_json_text(cfg);
  const std::string run_id = make_run_id(common.run_id, snapshot);
  const auto dirs = prepare_run_dir(cfg, run_id);
  const auto t0 = std::chrono::steady_clock::now();

  bool partial = false;
  std::size_t failed_organs = 0;
  std::size_t total_organs = 0;
  config::Manifest manifest;
  std::vector<std::pair<std::string, std::string>> scored_pairs;
  std::ofstream candidates(dirs.root / "candidates.jsonl");
  for (const auto& patient : cases) {
    auto result = traversal::generate_case_report(patient, graph, db, policy, options, *be, seed,
                                                  cfg.run.max_concurrent_requests);
    partial = partial || result.partial_failure;
    for (const auto& organ : result.trace.organs) {
      ++total_organs;
      if (organ.failed) ++failed_organs;
    }
    const auto report_path = dirs.reports / (patient.case_id + ".txt");
    {
      std::ofstream out(report_path);
      out << result.report.full_text << '\n';
    }
    const auto trace_path = dirs.traces / (patient.case_id + ".json");
    traversal::save_trace(result.trace, trace_path);
    candidates << json{{"case_id", patient.case_id}, {"text", result.report.full_text}}.dump()
               << '\n';
    // Manifest paths are relative to the run directory so a rerun into a
    // different output root stays byte-identical.
    manifest.outputs.emplace_back("report:" + patient.case_id,
                                  fs::relative(report_path, dirs.root).string());
    manifest.outputs.emplace_back("trace:" + patient.case_id,
                                  fs::relative(trace_path, dirs.root).string());
    scored_pairs.emplace_back(result.report.full_text, patient.reference_report);
  }
  candidates.close();
  manifest.outputs.emplace_back("candidates", "candidates.jsonl");

  // Score the run against the corpus references in place.
  const auto metric_report = metrics::evaluate_corpus(scored_pairs);
  write_metrics_csv(metric_report, dirs.root / "metrics.csv");
  manifest.outputs.emplace_back("metrics", "metrics.csv");

  manifest.run_id = run_id;
  manifest.command = "generate";
  manifest.config_snapshot = snapshot;
  manifest.corpus_digest = config::file_digest(corpus_path);
  manifest.code_version = config::kCodeVersion;
  if (cfg.run.record_timings)
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  config::write_manifest(manifest, dirs.root / "manifest.json");

  std::printf("run %s: %zu case(s) -> %s\n", run_id.c_str(), cases.size(),
              dirs.root.string().c_str());
  if (total_organs > 0 && failed_organs == total_organs) return kExitBackend;
  return partial ? kExitPartial : kExitOk;
}

int cmd_evaluate(const std::string& candidates_path, const std::string& references_path,
                 const std::string& csv_out) {
  const auto candidates = load_text_jsonl(candidates_path);
  const auto references = load_text_jsonl(references_path);

  std::map<std::string, std::string> ref_by_id(references.begin(), references.end());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> unpaired;
  for (const auto& [id, text] : candidates) {
    auto it = ref_by_id.find(id);
    if (it == ref_by_id.end()) {
      unpaired.push_back(id);
      continue;
    }
    pairs.emplace_back(text, it->second);
    ref_by_id.erase(it);
  }
  for (const auto& [id, text] : ref_by_id) unpaired.push_back(id);
  if (!unpaired.empty()) {
    std::string joined;
    for (const auto& id : unpaired) joined += (joined.empty() ? "" : ", ") + id;
    throw UnpairedCases("unpaired case ids: " + joined);
  }

  const auto report = metrics::evaluate_corpus(pairs);
  print_metric_table(report);
  if (!csv_out.empty()) write_metrics_csv(report, csv_out);
  return kExitOk;
}

struct AnalysisContext {
  config::RunConfig cfg;
  knowledge::ExpertDatabase db;
  knowledge::QuestionBank bank;
  std::vector<corpus::PatientCase> cases;
  std::unique_ptr<backend::Backend> be;
  std::uint64_t seed = 0;
  std::string snapshot;
  std::string run_id;
  fs::path out_dir;
  std::string corpus_digest;
  std::chrono::steady_clock::time_point t0;
};

AnalysisContext make_analysis_context(const CommonArgs& common, const std::string& corpus_path,
                                      const std::string& db_path,
                                      const std::vector<std::string>& case_filter) {
  AnalysisContext ctx;
  ctx.t0 = std::chrono::steady_clock::now();
  ctx.cfg = load_config(common);
  if (!fs::exists(db_path)) throw MissingDatabase("database file not found: " + db_path);
  ctx.db = knowledge::load_database(db_path);
  const auto corpus_data = corpus::load_corpus(corpus_path, format_of(corpus_path));
  ctx.cases = select_cases(corpus_data, case_filter);
  if (ctx.cases.empty()) throw Error("no cases selected");
  ctx.bank = load_bank(ctx.cfg, ctx.db.organs);
  ctx.be = make_backend(ctx.cfg);
  ctx.seed = config::require_seed(ctx.cfg);
  ctx.snapshot = config::run_config_to_json_text(ctx.cfg);
  ctx.run_id = make_run_id(common.run_id, ctx.snapshot);
  ctx.out_dir = fs::path(ctx.cfg.run.output_dir) / ctx.run_id;
  fs::create_directories(ctx.out_dir);
  ctx.corpus_digest = config::file_digest(corpus_path);
  return ctx;
}

void finish_manifest(AnalysisContext& ctx, const std::string& command,
                     const std::vector<std::pair<std::string, std::string>>& outputs) {
  config::Manifest manifest;
  manifest.run_id = ctx.run_id;
  manifest.command = command;
  manifest.config_snapshot = ctx.snapshot;
  manifest.corpus_digest = ctx.corpus_digest;
  manifest.code_version = config::kCodeVersion;
  manifest.outputs = outputs;
  if (ctx.cfg.run.record_timings)
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.t0).count();
  config::write_manifest(manifest, ctx.out_dir / "manifest.json");
}

int cmd_permute_study(const CommonArgs& common, const std::string& corpus_path,
                      const std::string& db_path, const std::vector<std::string>& case_filter,
                      std::size_t cap) {
  auto ctx = make_analysis_context(common, corpus_path, db_path, case_filter);
  analysis::StudyOptions study;
  study.permutation_cap = cap;
  study.cache_answers = ctx.cfg.run.cache_answers;
  study.max_concurrent = ctx.cfg.run.max_concurrent_requests;
  const auto records = analysis::run_permutation_study(
      ctx.cases, ctx.db, ctx.bank, config::budget_policy_of(ctx.cfg),
      config::traversal_options_of(ctx.cfg), *ctx.be, ctx.cfg.policy.question_limit, ctx.seed,
      study);
  const auto correlations = analysis::correlate_distance_scores(records);
  const auto perm_csv = ctx.out_dir / "permutations.csv";
  const auto corr_csv = ctx.out_dir / "correlations.csv";
  analysis::write_permutations_csv(records, perm_csv);
  analysis::write_correlations_csv(correlations, corr_csv);
  finish_manifest(ctx, "permute-study",
                  {{"permutations", "permutations.csv"}, {"correlations", "correlations.csv"}});
  std::printf("%zu permutations -> %s\n", records.size(), perm_csv.string().c_str());
  return kExitOk;
}

int cmd_bias(const CommonArgs& common, const std::string& corpus_path) {
  auto cfg = load_config(common);
  const auto corpus_data = corpus::load_corpus(corpus_path, format_of(corpus_path));
  const auto organs = load_organ_table(cfg);
  const auto records = analysis::positional_bias(corpus_data, organs);

  const std::string snapshot = config::run_config_to_json_text(cfg);
  const std::string run_id = make_run_id(common.run_id, snapshot);
  const fs::path out_dir = fs::path(cfg.run.output_dir) / run_id;
  fs::create_directories(out_dir);
  const auto bias_csv = out_dir / "bias.csv";
  analysis::write_bias_csv(records, bias_csv);

  config::Manifest manifest;
  manifest.run_id = run_id;
  manifest.command = "bias";
  manifest.config_snapshot = snapshot;
  manifest.corpus_digest = config::file_digest(corpus_path);
  manifest.code_version = config::kCodeVersion;
  manifest.outputs = {{"bias", "bias.csv"}};
  config::write_manifest(manifest, out_dir / "manifest.json");
  std::printf("bias table -> %s\n", bias_csv.string().c_str());
  return kExitOk;
}

int cmd_icl_sweep(const CommonArgs& common, const std::string& corpus_path,
                  const std::string& db_path, const std::vector<std::string>& case_filter,
                  const std::vector<std::size_t>& k_values) {
  auto ctx = make_analysis_context(common, corpus_path, db_path, case_filter);
  std::vector<std::string> warnings;
  const auto rows = analysis::icl_sweep(ctx.cases, ctx.db, ctx.bank,
                                        config::budget_policy_of(ctx.cfg),
                                        config::traversal_options_of(ctx.cfg), *ctx.be,
                                        ctx.cfg.policy.question_limit, ctx.seed, k_values,
                                        &warnings);
  for (const auto& warning : warnings) std::fprintf(stderr, "warning: %s\n", warning.c_str());
  const auto csv = ctx.out_dir / "icl_sweep.csv";
  analysis::write_sweep_csv(rows, "k", /*with_tokens=*/false, csv);
  finish_manifest(ctx, "icl-sweep", {{"icl_sweep", "icl_sweep.csv"}});
  std::printf("%zu rows -> %s\n", rows.size(), csv.string().c_str());
  return kExitOk;
}

int cmd_budget_sweep(const CommonArgs& common, const std::string& corpus_path,
                     const std::string& db_path, const std::vector<std::string>& case_filter,
                     const std::vector<long>& budgets) {
  auto ctx = make_analysis_context(common, corpus_path, db_path, case_filter);
  const auto rows = analysis::budget_sweep(ctx.cases, ctx.db, ctx.bank,
                                           config::budget_policy_of(ctx.cfg),
                                           config::traversal_options_of(ctx.cfg), *ctx.be,
                                           ctx.cfg.policy.question_limit, ctx.seed, budgets);
  const auto csv = ctx.out_dir / "budget_sweep.csv";
  analysis::write_sweep_csv(rows, "budget", /*with_tokens=*/true, csv);
  finish_manifest(ctx, "budget-sweep", {{"budget_sweep", "budget_sweep.csv"}});
  std::printf("%zu rows -> %s\n", rows.size(), csv.string().c_str());
  return kExitOk;
}

int cmd_mock_serve(const CommonArgs& common, const std::string& host, int port) {
  auto cfg = load_config(common);
  if (cfg.backend.mock_script.empty())
    throw ConfigError("mock-serve requires backend.mock_script");
  backend::MockServer::Options options;
  options.script = backend::load_mock_script(cfg.backend.mock_script);
  options.templates = load_templates(cfg);
  const auto organs = load_organ_table(cfg);
  options.bank = load_bank(cfg, organs);
  options.question_limit = cfg.policy.question_limit;
  options.max_rounds = std::max(cfg.policy.max_rounds, 2);
  backend::MockServer server(std::move(options));
  const int bound = server.start(host, port);
  std::printf("listening on %s:%d\n", host.c_str(), bound);
  std::fflush(stdout);
  // Serve until killed.
  while (true) std::this_thread::sleep_for(std::chrono::seconds(3600));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thought-graph traversal engine for structured report generation"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string corpus_path;
  std::string db_path = "expert_db.json";
  std::string out_path = "expert_db.json";
  std::vector<std::string> case_filter;
  std::string candidates_path;
  std::string references_path;
  std::string csv_out = "metrics.csv";
  std::vector<std::size_t> k_values;
  std::vector<long> budgets;
  std::size_t permutation_cap = 720;
  std::string host = "127.0.0.1";
  int port = 8089;
  int jobs = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", common.config_path, "run config file (json)");
    if (needs_config) opt->check(CLI::ExistingFile);
    cmd->add_option("--set", common.overrides, "override: section.key=value");
    cmd->add_option("--run-id", common.run_id, "fixed run id (default: timestamp+digest)");
    cmd->add_option("--jobs", jobs, "worker threads, maps to run.max_concurrent_requests");
  };

  auto* build_db = app.add_subcommand("build-db", "extract organ list and sentence database");
  add_common(build_db, true);
  build_db->add_option("--corpus", corpus_path, "corpus file (.jsonl or .csv)")->required();
  build_db->add_option("--out", out_path, "database output path");

  auto* generate = app.add_subcommand("generate", "generate reports with traversal");
  add_common(generate, true);
  generate->add_option("--corpus", corpus_path, "corpus file")->required();
  generate->add_option("--db", db_path, "expert database file");
  generate->add_option("--cases", case_filter, "case ids (default: test split, else all)")
      ->delimiter(',');

  auto* evaluate = app.add_subcommand("evaluate", "score candidates against references");
  evaluate->add_option("--candidates", candidates_path, "candidates jsonl (case_id, text)")
      ->required();
  evaluate->add_option("--references", references_path, "references jsonl (case_id, text)")
      ->required();
  evaluate->add_option("--csv", csv_out, "metric CSV output path");

  auto* permute = app.add_subcommand("permute-study", "organ-order permutation study");
  add_common(permute, true);
  permute->add_option("--corpus", corpus_path, "corpus file")->required();
  permute->add_option("--db", db_path, "expert database file");
  permute->add_option("--cases", case_filter, "case ids")->delimiter(',');
  permute->add_option("--cap", permutation_cap, "refuse m! beyond this");

  auto* bias = app.add_subcommand("bias", "organ-mention positional analysis");
  add_common(bias, true);
  bias->add_option("--corpus", corpus_path, "corpus file")->required();

  auto* icl = app.add_subcommand("icl-sweep", "example-count sweep");
  add_common(icl, true);
  icl->add_option("--corpus", corpus_path, "corpus file")->required();
  icl->add_option("--db", db_path, "expert database file");
  icl->add_option("--cases", case_filter, "case ids")->delimiter(',');
  icl->add_option("--k-values", k_values, "example counts, e.g. 0,1,5")
      ->delimiter(',')
      ->required();

  auto* budget = app.add_subcommand("budget-sweep", "reasoning-budget sweep");
  add_common(budget, true);
  budget->add_option("--corpus", corpus_path, "corpus file")->required();
  budget->add_option("--db", db_path, "expert database file");
  budget->add_option("--cases", case_filter, "case ids")->delimiter(',');
  budget->add_option("--budgets", budgets, "token budgets, e.g. 0,100,450")
      ->delimiter(',')
      ->required();

  auto* serve = app.add_subcommand("mock-serve", "serve a mock script over the chat protocol");
  add_common(serve, true);
  serve->add_option("--host", host, "bind host");
  serve->add_option("--port", port, "bind port (0 = ephemeral)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (jobs > 0) common.overrides.push_back("run.max_concurrent_requests=" + std::to_string(jobs));

  try {
    if (build_db->parsed()) return cmd_build_db(common, corpus_path, out_path);
    if (generate->parsed()) return cmd_generate(common, corpus_path, db_path, case_filter);
    if (evaluate->parsed()) return cmd_evaluate(candidates_path, references_path, csv_out);
    if (permute->parsed())
      return cmd_permute_study(common, corpus_path, db_path, case_filter, permutation_cap);
    if (bias->parsed()) return cmd_bias(common, corpus_path);
    if (icl->parsed()) return cmd_icl_sweep(common, corpus_path, db_path, case_filter, k_values);
    if (budget->parsed())
      return cmd_budget_sweep(common, corpus_path, db_path, case_filter, budgets);
    if (serve->parsed()) return cmd_mock_serve(common, host, port);
  } catch (const TransportError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBackend;
  } catch (const ProtocolError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBackend;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
