#include "tgt/config.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "tgt/errors.hpp"
#include "testutil.hpp"

using namespace tgt;
using nlohmann::json;
using tgt::test::TempDir;
using tgt::test::write_file;

TEST(RunConfig, DocumentedDefaults) {
  config::RunConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.backend.temperature_answer, 0.0);
  EXPECT_DOUBLE_EQ(cfg.backend.temperature_verify, 0.0);
  EXPECT_DOUBLE_EQ(cfg.backend.temperature_report, 0.2);
  EXPECT_EQ(cfg.backend.retry_max, 3);
  EXPECT_EQ(cfg.backend.backoff_base_ms, 500);
  EXPECT_EQ(cfg.backend.timeout_s, 120);
  EXPECT_EQ(cfg.knowledge.k, 5u);  // Algorithm default example count
  EXPECT_EQ(cfg.policy.max_reasoning_tokens, 450);
  EXPECT_EQ(cfg.policy.max_rounds, 3);
  EXPECT_EQ(cfg.policy.max_verify_attempts, 3);
  EXPECT_EQ(cfg.policy.question_limit, 7u);
  EXPECT_EQ(cfg.run.max_concurrent_requests, 4);
  EXPECT_FALSE(cfg.run.seed.has_value());
  EXPECT_FALSE(cfg.run.record_timings);

  traversal::TraversalOptions options;
  EXPECT_EQ(options.examples_k, 5u);
}

TEST(RunConfig, LoadSectionsAndMapping) {
  TempDir tmp;
  write_file(tmp.file("c.json"), json{{"backend", {{"mock_script", "s.json"},
                                                   {"temperature_report", 0.5}}},
                                      {"policy", {{"max_reasoning_tokens", 900},
                                                  {"tokens_exclude_verify", true}}},
                                      {"knowledge", {{"k", 3}}},
                                      {"run", {{"seed", 11}, {"max_concurrent_requests", 2}}}}
                                     .dump());
  const auto cfg = config::load_run_config(tmp.file("c.json"));
  EXPECT_EQ(cfg.backend.mock_script, "s.json");
  EXPECT_DOUBLE_EQ(cfg.backend.temperature_report, 0.5);

  const auto policy = config::budget_policy_of(cfg);
  EXPECT_EQ(policy.max_reasoning_tokens, 900);
  const auto options = config::traversal_options_of(cfg);
  EXPECT_TRUE(options.tokens_exclude_verify);
  EXPECT_EQ(options.examples_k, 3u);
  EXPECT_EQ(config::require_seed(cfg), 11u);

  const auto backend_cfg = config::backend_config_of(cfg);
  EXPECT_EQ(backend_cfg.max_concurrent_requests, 2);
}

TEST(RunConfig, OverridesAreTyped) {
  config::RunConfig cfg;
  config::apply_override(cfg, "backend.mock_script=s.json");
  config::apply_override(cfg, "policy.max_rounds=5");
  config::apply_override(cfg, "run.seed=99");
  config::apply_override(cfg, "policy.tokens_exclude_verify=true");
  EXPECT_EQ(cfg.backend.mock_script, "s.json");
  EXPECT_EQ(cfg.policy.max_rounds, 5);
  ASSERT_TRUE(cfg.run.seed.has_value());
  EXPECT_EQ(*cfg.run.seed, 99u);
  EXPECT_TRUE(cfg.policy.tokens_exclude_verify);

  EXPECT_THROW(config::apply_override(cfg, "nonsense"), ConfigError);
  EXPECT_THROW(config::apply_override(cfg, "backend.unknown=1"), ConfigError);
  EXPECT_THROW(config::apply_override(cfg, "policy.max_rounds=abc"), ConfigError);
}

TEST(RunConfig, ValidationRules) {
  config::RunConfig cfg;
  EXPECT_THROW(config::validate(cfg), ConfigError);  // neither backend configured
  cfg.backend.mock_script = "s.json";
  EXPECT_NO_THROW(config::validate(cfg));
  cfg.backend.base_url = "http://x";
  EXPECT_THROW(config::validate(cfg), ConfigError);  // both configured
  cfg.backend.base_url.clear();

  cfg.policy.question_limit = 8;
  EXPECT_THROW(config::validate(cfg), ConfigError);
  cfg.policy.question_limit = 7;
  cfg.run.train_fraction = 1.0;
  EXPECT_THROW(config::validate(cfg), ConfigError);
  cfg.run.train_fraction = 0.8;
  cfg.knowledge.extractor = "telepathy";
  EXPECT_THROW(config::validate(cfg), ConfigError);
}

TEST(RunConfig, SnapshotRoundTrips) {
  config::RunConfig cfg;
  cfg.backend.mock_script = "script.json";
  cfg.run.seed = 42;
  cfg.policy.max_rounds = 4;
  const auto snapshot = config::run_config_to_json_text(cfg);
  const auto reloaded = config::run_config_from_json_text(snapshot, "snapshot");
  EXPECT_EQ(reloaded.backend.mock_script, "script.json");
  EXPECT_EQ(reloaded.policy.max_rounds, 4);
  ASSERT_TRUE(reloaded.run.seed.has_value());
  EXPECT_EQ(*reloaded.run.seed, 42u);
  EXPECT_EQ(config::run_config_to_json_text(reloaded), snapshot);
}

TEST(Manifest, DigestIsStableAndRecomputable) {
  TempDir tmp;
  write_file(tmp.file("input.txt"), "digest me");
  const auto a = config::file_digest(tmp.file("input.txt"));
  const auto b = config::file_digest(tmp.file("input.txt"));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 16u);  // fnv1a64 hex
  write_file(tmp.file("other.txt"), "digest me!");
  EXPECT_NE(config::file_digest(tmp.file("other.txt")), a);
  EXPECT_THROW(config::file_digest(tmp.file("missing.txt")), ConfigError);
}

TEST(Manifest, AtomicWriteProducesCompleteJson) {
  TempDir tmp;
  config::Manifest manifest;
  manifest.run_id = "r1";
  manifest.command = "generate";
  manifest.config_snapshot = config::run_config_to_json_text(config::RunConfig{});
  manifest.corpus_digest = "feedfacefeedface";
  manifest.code_version = config::kCodeVersion;
  manifest.outputs = {{"report:x", "reports/x.txt"}};
  config::write_manifest(manifest, tmp.file("manifest.json"));
  const auto parsed = json::parse(tgt::test::read_file(tmp.file("manifest.json")));
  EXPECT_EQ(parsed["run_id"], "r1");
  EXPECT_EQ(parsed["outputs"][0]["path"], "reports/x.txt");
  EXPECT_FALSE(parsed.contains("wall_seconds"));
  EXPECT_FALSE(std::filesystem::exists(tmp.file("manifest.json.tmp")));
}
