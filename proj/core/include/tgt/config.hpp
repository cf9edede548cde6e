#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tgt/http_backend.hpp"
#include "tgt/traversal.hpp"

namespace tgt::config {

// Mirrors the config file sections. Every field is overridable on the command
// line with --set section.key=value; TGT_API_KEY is the only secret channel.
struct RunConfig {
  struct Backend {
    std::string base_url;     // exactly one of base_url / mock_script
    std::string mock_script;  // path to a MockScript file
    std::string model_name = "mock-vlm";
    std::string templates_path;  // optional prompt template overrides
    double temperature_answer = 0.0;
    double temperature_verify = 0.0;
    double temperature_report = 0.2;
    int max_output_tokens = 512;
    int retry_max = 3;
    int backoff_base_ms = 500;
    int timeout_s = 120;
  } backend;

  struct Knowledge {
    std::string organ_table;    // empty = built-in five-organ table
    std::string question_bank;  // empty = built-in templated bank
    std::size_t k = 5;
    std::string extractor = "rulebased";  // or backend_llm
  } knowledge;

  struct Policy {
    long max_reasoning_tokens = 450;
    int max_rounds = 3;
    int max_verify_attempts = 3;
    std::size_t question_limit = 7;
    bool tokens_exclude_verify = false;
  } policy;

  struct Run {
    std::optional<std::uint64_t> seed;
    std::string output_dir = "out";
    int max_concurrent_requests = 4;
    bool record_timings = false;
    bool cache_answers = false;
    double train_fraction = 0.8;
  } run;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json_text(const std::string& text, const std::string& origin);

// "section.key=value" command-line override.
void apply_override(RunConfig& config, const std::string& assignment);

// Throws ConfigError on violated invariants (backend choice, ranges).
void validate(const RunConfig& config);

std::string run_config_to_json_text(const RunConfig& config);

traversal::BudgetPolicy budget_policy_of(const RunConfig& config);
traversal::TraversalOptions traversal_options_of(const RunConfig& config);
backend::BackendConfig backend_config_of(const RunConfig& config);

std::uint64_t require_seed(const RunConfig& config);

struct Manifest {
  std::string run_id;
  std::string command;
  std::string config_snapshot;  // JSON text
  std::string corpus_digest;    // fnv1a64 hex of the corpus file bytes
  std::string code_version;
  std::vector<std::pair<std::string, std::string>> outputs;  // (label, path)
  std::optional<double> wall_seconds;                        // only with record_timings
};

std::string file_digest(const std::filesystem::path& path);

// Written to tmp then renamed, so a manifest is either absent or complete.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

inline constexpr const char* kCodeVersion = "tgt 0.1.0";

}  // namespace tgt::config
