#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "tgt/knowledge.hpp"

namespace tgt::backend {

struct Message {
  std::string role;  // system | user | assistant
  std::string text;
  std::vector<std::string> image_refs;
};

struct BackendRequest {
  std::vector<Message> messages;
  int max_output_tokens = 512;
  double temperature = 0.0;
  std::string model_name;
};

struct BackendResponse {
  std::string text;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  double latency_ms = 0.0;
  bool estimated = false;  // usage absent from the wire, counts come from the estimator
};

// Identifies a call within a traversal. The scripted mock keys on these; the
// HTTP client ignores them beyond logging.
struct QueryMeta {
  std::string organ;
  int question_index = -1;     // slot within the organ's round-1 question list
  int round = 1;
  int attempt = 1;             // verify-loop attempt, 1-based
  int graph_position = -1;     // organ position in the active graph order
  int canonical_position = -1; // organ position in database order
  std::string kind;            // answer | verify | report | report_verify | extract
};

struct VerifyResult {
  bool verified = false;
  BackendResponse response;
};

struct QaPair {
  std::string question;
  std::string answer;
  int round = 1;
};

// ceil(chars/4), the usual rough chars-per-token heuristic. Used by the mock
// for all counts and by the HTTP client when the server omits usage.
long estimate_tokens(std::string_view text);

using PromptCapture = std::function<void(const QueryMeta&, const std::string& prompt)>;

class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendResponse answer(const std::vector<std::string>& images,
                                 const std::string& question, const QueryMeta& meta) = 0;

  // True iff the reply, lowercased and trimmed, starts with "yes".
  virtual VerifyResult verify(const std::vector<std::string>& images, const std::string& question,
                              const std::string& answer, const QueryMeta& meta) = 0;

  virtual BackendResponse generate_report(const std::vector<std::string>& images,
                                          const std::vector<QaPair>& qa_pairs,
                                          const knowledge::ExampleSet& examples,
                                          const QueryMeta& meta) = 0;

  // Organ-name extraction over one report (knowledge module, backend_llm mode).
  virtual BackendResponse extract(const std::string& report, const QueryMeta& meta) = 0;

  virtual void set_prompt_capture(PromptCapture capture) = 0;
};

}  // namespace tgt::backend
