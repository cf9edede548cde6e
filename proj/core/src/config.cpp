#include "tgt/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tgt/errors.hpp"
#include "tgt/rng.hpp"

namespace tgt::config {

using nlohmann::json;

namespace {

json config_to_json(const RunConfig& c) {
  json j;
  j["backend"] = {{"base_url", c.backend.base_url},
                  {"mock_script", c.backend.mock_script},
                  {"model_name", c.backend.model_name},
                  {"templates_path", c.backend.templates_path},
                  {"temperature_answer", c.backend.temperature_answer},
                  {"temperature_verify", c.backend.temperature_verify},
                  {"temperature_report", c.backend.temperature_report},
                  {"max_output_tokens", c.backend.max_output_tokens},
                  {"retry_max", c.backend.retry_max},
                  {"backoff_base_ms", c.backend.backoff_base_ms},
                  {"timeout_s", c.backend.timeout_s}};
  j["knowledge"] = {{"organ_table", c.knowledge.organ_table},
                    {"question_bank", c.knowledge.question_bank},
                    {"k", c.knowledge.k},
                    {"extractor", c.knowledge.extractor}};
  j["policy"] = {{"max_reasoning_tokens", c.policy.max_reasoning_tokens},
                 {"max_rounds", c.policy.max_rounds},
                 {"max_verify_attempts", c.policy.max_verify_attempts},
                 {"question_limit", c.policy.question_limit},
                 {"tokens_exclude_verify", c.policy.tokens_exclude_verify}};
  j["run"] = {{"output_dir", c.run.output_dir},
              {"max_concurrent_requests", c.run.max_concurrent_requests},
              {"record_timings", c.run.record_timings},
              {"cache_answers", c.run.cache_answers},
              {"train_fraction", c.run.train_fraction}};
  if (c.run.seed) j["run"]["seed"] = *c.run.seed;
  return j;
}

void config_from_json(const json& j, RunConfig& c) {
  if (j.contains("backend")) {
    const auto& b = j["backend"];
    c.backend.base_url = b.value("base_url", c.backend.base_url);
    c.backend.mock_script = b.value("mock_script", c.backend.mock_script);
    c.backend.model_name = b.value("model_name", c.backend.model_name);
    c.backend.templates_path = b.value("templates_path", c.backend.templates_path);
    c.backend.temperature_answer = b.value("temperature_answer", c.backend.temperature_answer);
    c.backend.temperature_verify = b.value("temperature_verify", c.backend.temperature_verify);
    c.backend.temperature_report = b.value("temperature_report", c.backend.temperature_report);
    c.backend.max_output_tokens = b.value("max_output_tokens", c.backend.max_output_tokens);
    c.backend.retry_max = b.value("retry_max", c.backend.retry_max);
    c.backend.backoff_base_ms = b.value("backoff_base_ms", c.backend.backoff_base_ms);
    c.backend.timeout_s = b.value("timeout_s", c.backend.timeout_s);
  }
  if (j.contains("knowledge")) {
    const auto& k = j["knowledge"];
    c.knowledge.organ_table = k.value("organ_table", c.knowledge.organ_table);
    c.knowledge.question_bank = k.value("question_bank", c.knowledge.question_bank);
    c.knowledge.k = k.value("k", c.knowledge.k);
    c.knowledge.extractor = k.value("extractor", c.knowledge.extractor);
  }
  if (j.contains("policy")) {
    const auto& p = j["policy"];
    c.policy.max_reasoning_tokens = p.value("max_reasoning_tokens", c.policy.max_reasoning_tokens);
    c.policy.max_rounds = p.value("max_rounds", c.policy.max_rounds);
    c.policy.max_verify_attempts = p.value("max_verify_attempts", c.policy.max_verify_attempts);
    c.policy.question_limit = p.value("question_limit", c.policy.question_limit);
    c.policy.tokens_exclude_verify =
        p.value("tokens_exclude_verify", c.policy.tokens_exclude_verify);
  }
  if (j.contains("run")) {
    const auto& r = j["run"];
    if (r.contains("seed")) c.run.seed = r["seed"].get<std::uint64_t>();
    c.run.output_dir = r.value("output_dir", c.run.output_dir);
    c.run.max_concurrent_requests =
        r.value("max_concurrent_requests", c.run.max_concurrent_requests);
    c.run.record_timings = r.value("record_timings", c.run.record_timings);
    c.run.cache_answers = r.value("cache_answers", c.run.cache_answers);
    c.run.train_fraction = r.value("train_fraction", c.run.train_fraction);
  }
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  RunConfig c;
  config_from_json(j, c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return run_config_from_json_text(buf.str(), path.string());
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("--set expects section.key=value, got: " + assignment);
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string value = assignment.substr(eq + 1);

  json current = config_to_json(config);
  if (!current.contains(section) || !current[section].contains(key)) {
    // seed is absent from the snapshot until set
    if (!(section == "run" && key == "seed"))
      throw ConfigError("unknown config field: " + section + "." + key);
  }

  json typed;
  if (section == "run" && key == "seed") {
    typed = json::parse(value, nullptr, false);
  } else {
    const json& existing = current[section][key];
    if (existing.is_string()) {
      typed = value;
    } else {
      typed = json::parse(value, nullptr, false);
      if (typed.is_discarded())
        throw ConfigError("cannot parse value for " + section + "." + key + ": " + value);
    }
  }
  if (typed.is_discarded())
    throw ConfigError("cannot parse value for " + section + "." + key + ": " + value);
  current[section][key] = typed;
  RunConfig fresh;
  config_from_json(current, fresh);
  config = fresh;
}

void validate(const RunConfig& c) {
  const bool has_url = !c.backend.base_url.empty();
  const bool has_mock = !c.backend.mock_script.empty();
  if (has_url == has_mock)
    throw ConfigError("exactly one of backend.base_url / backend.mock_script must be set");
  if (c.policy.question_limit < 1 || c.policy.question_limit > 7)
    throw ConfigError("policy.question_limit must be in 1..7");
  if (c.policy.max_rounds < 1) throw ConfigError("policy.max_rounds must be >= 1");
  if (c.policy.max_verify_attempts < 1)
    throw ConfigError("policy.max_verify_attempts must be >= 1");
  if (c.policy.max_reasoning_tokens < 0)
    throw ConfigError("policy.max_reasoning_tokens must be >= 0");
  if (c.run.max_concurrent_requests < 1)
    throw ConfigError("run.max_concurrent_requests must be >= 1");
  if (!(c.run.train_fraction > 0.0 && c.run.train_fraction < 1.0))
    throw ConfigError("run.train_fraction must be in (0,1)");
  if (c.backend.retry_max < 0) throw ConfigError("backend.retry_max must be >= 0");
  if (c.knowledge.extractor != "rulebased" && c.knowledge.extractor != "backend_llm")
    throw ConfigError("knowledge.extractor must be rulebased or backend_llm");
}

std::string run_config_to_json_text(const RunConfig& config) {
  return config_to_json(config).dump(2);
}

traversal::BudgetPolicy budget_policy_of(const RunConfig& c) {
  traversal::BudgetPolicy policy;
  policy.max_reasoning_tokens = c.policy.max_reasoning_tokens;
  policy.max_rounds = c.policy.max_rounds;
  policy.max_verify_attempts = c.policy.max_verify_attempts;
  return policy;
}

traversal::TraversalOptions traversal_options_of(const RunConfig& c) {
  traversal::TraversalOptions options;
  options.examples_k = c.knowledge.k;
  options.tokens_exclude_verify = c.policy.tokens_exclude_verify;
  return options;
}

backend::BackendConfig backend_config_of(const RunConfig& c) {
  backend::BackendConfig out;
  out.base_url = c.backend.base_url;
  out.model_name = c.backend.model_name;
  out.temperature_answer = c.backend.temperature_answer;
  out.temperature_verify = c.backend.temperature_verify;
  out.temperature_report = c.backend.temperature_report;
  out.max_output_tokens = c.backend.max_output_tokens;
  out.retry_max = c.backend.retry_max;
  out.backoff_base_ms = c.backend.backoff_base_ms;
  out.timeout_s = c.backend.timeout_s;
  out.max_concurrent_requests = c.run.max_concurrent_requests;
  return out;
}

std::uint64_t require_seed(const RunConfig& config) {
  if (!config.run.seed) throw ConfigError("run.seed is required for seeded commands");
  return *config.run.seed;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot digest missing file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(rng::fnv1a64(buf.str())));
  return hex;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  json j;
  j["run_id"] = manifest.run_id;
  j["command"] = manifest.command;
  j["config"] = json::parse(manifest.config_snapshot);
  j["corpus_digest"] = manifest.corpus_digest;
  j["code_version"] = manifest.code_version;
  j["outputs"] = json::array();
  for (const auto& [label, out_path] : manifest.outputs)
    j["outputs"].push_back({{"label", label}, {"path", out_path}});
  if (manifest.wall_seconds) j["wall_seconds"] = *manifest.wall_seconds;

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tgt::config
