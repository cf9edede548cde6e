#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tgt/backend.hpp"
#include "tgt/knowledge.hpp"
#include "tgt/prompts.hpp"

namespace tgt::backend {

// Deterministic scripted stand-in for the VLM. Lookup misses fall through to
// a synthesizer that is a pure function of the query key, so identical
// (script, inputs) always produce identical outputs and token counts.
struct MockScript {
  std::map<std::string, std::string> answers;        // "organ/q_index/round" -> text
  std::map<std::string, int> verify_plan;            // "organ/q_index" -> rejections before accept
  std::map<std::string, int> report_verify_plan;     // organ -> rejections before accept
  std::map<std::string, std::string> report_templates;           // organ -> {organ},{first_answer}
  std::map<std::string, std::string> report_templates_enriched;  // used once follow-up rounds ran
  std::map<std::string, int> latency_ms;             // organ -> injected answer-call delay

  // Synthetic-experiment knobs (analysis module oracles).
  double degrade_with_displacement = 0.0;  // statement corruption per organ displacement step
  int icl_peak_k = -1;                     // statement corruption grows with |k - peak|
  double icl_peak_rate = 0.0;
  int pad_answer_chars = 0;                // pad answer texts to a fixed byte length

  std::vector<knowledge::OrganId> extract_aliases;  // extraction emulation table; empty = default
};

MockScript load_mock_script(const std::filesystem::path& path);
void save_mock_script(const MockScript& script, const std::filesystem::path& path);

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockScript script,
                       prompts::PromptTemplates templates = prompts::default_templates());

  BackendResponse answer(const std::vector<std::string>& images, const std::string& question,
                         const QueryMeta& meta) override;
  VerifyResult verify(const std::vector<std::string>& images, const std::string& question,
                      const std::string& answer, const QueryMeta& meta) override;
  BackendResponse generate_report(const std::vector<std::string>& images,
                                  const std::vector<QaPair>& qa_pairs,
                                  const knowledge::ExampleSet& examples,
                                  const QueryMeta& meta) override;
  BackendResponse extract(const std::string& report, const QueryMeta& meta) override;

  void set_prompt_capture(PromptCapture capture) override { capture_ = std::move(capture); }

  // The pure text rules, exposed so the wire stub server can replay them.
  std::string answer_text(const QueryMeta& meta) const;
  bool verify_verdict(const QueryMeta& meta) const;
  std::string report_text(const std::vector<QaPair>& qa_pairs,
                          const knowledge::ExampleSet& examples, const QueryMeta& meta) const;
  std::string extract_text(const std::string& report) const;

  const MockScript& script() const { return script_; }
  const prompts::PromptTemplates& templates() const { return templates_; }

 private:
  BackendResponse make_response(const std::string& prompt, std::string text,
                                const QueryMeta& meta) const;

  MockScript script_;
  prompts::PromptTemplates templates_;
  PromptCapture capture_;
};

}  // namespace tgt::backend
