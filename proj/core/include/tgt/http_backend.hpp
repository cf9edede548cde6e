#pragma once

#include <memory>
#include <string>

#include "tgt/backend.hpp"
#include "tgt/prompts.hpp"

namespace tgt::backend {

struct BackendConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080, OpenAI-compatible server
  std::string model_name = "gpt-4o";
  std::string api_key_env = "TGT_API_KEY";
  double temperature_answer = 0.0;
  double temperature_verify = 0.0;
  double temperature_report = 0.2;
  int max_output_tokens = 512;
  int retry_max = 3;
  int backoff_base_ms = 500;
  int timeout_s = 120;
  int max_concurrent_requests = 4;  // global in-flight cap
};

// Chat-completions wire client: POST {base_url}/v1/chat/completions with the
// rendered prompt as one text part and images as base64 data-URL parts.
// Transient transport failures are retried with exponential backoff; shared
// safely across concurrent organ traversals.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config,
                       prompts::PromptTemplates templates = prompts::default_templates());
  ~HttpBackend() override;

  BackendResponse answer(const std::vector<std::string>& images, const std::string& question,
                         const QueryMeta& meta) override;
  VerifyResult verify(const std::vector<std::string>& images, const std::string& question,
                      const std::string& answer, const QueryMeta& meta) override;
  BackendResponse generate_report(const std::vector<std::string>& images,
                                  const std::vector<QaPair>& qa_pairs,
                                  const knowledge::ExampleSet& examples,
                                  const QueryMeta& meta) override;
  BackendResponse extract(const std::string& report, const QueryMeta& meta) override;

  void set_prompt_capture(PromptCapture capture) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// True iff the reply, lowercased and trimmed, begins with "yes".
bool parse_affirmative(const std::string& reply);

std::string base64_encode(std::string_view bytes);

}  // namespace tgt::backend
