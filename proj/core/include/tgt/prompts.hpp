#pragma once

#include <string>
#include <vector>

#include "tgt/backend.hpp"
#include "tgt/knowledge.hpp"

namespace tgt::prompts {

// Named templates with {question}, {answer}, {qa_block}, {examples_block},
// {organ}, {report} placeholders. Both the mock and the HTTP client render
// through these so prompt-level tests cover either path.
struct PromptTemplates {
  std::string answer;
  std::string verify;
  std::string report;
  std::string report_verify;
  std::string extract;
  std::string follow_up;
};

PromptTemplates default_templates();

std::string render(const std::string& tmpl,
                   const std::vector<std::pair<std::string, std::string>>& slots);

std::string render_answer(const PromptTemplates& t, const std::string& question);

std::string render_verify(const PromptTemplates& t, const std::string& question,
                          const std::string& answer);

// Numbered QA lines plus the examples block; an empty example set elides the
// block entirely, including its header.
std::string render_report(const PromptTemplates& t, const std::string& organ,
                          const std::vector<backend::QaPair>& qa_pairs,
                          const knowledge::ExampleSet& examples);

// qa_block_text is the already-rendered QA block for the organ.
std::string render_report_verify(const PromptTemplates& t, const std::string& organ,
                                 const std::string& qa_block_text, const std::string& statement);

std::string render_extract(const PromptTemplates& t, const std::string& report);

std::string render_follow_up(const PromptTemplates& t, const std::string& organ,
                             const std::string& prior_answer);

std::string qa_block(const std::vector<backend::QaPair>& qa_pairs);
std::string examples_block(const knowledge::ExampleSet& examples);

}  // namespace tgt::prompts
