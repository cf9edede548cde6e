#include "tgt/prompts.hpp"

namespace tgt::prompts {

PromptTemplates default_templates() {
  PromptTemplates t;
  t.answer =
      "You are a radiology assistant examining a patient's chest X-ray images.\n"
      "Answer the question below in one or two concise sentences, based only on the images.\n"
      "\n"
      "Question: {question}\n";
  t.verify =
      "You are a radiology assistant double-checking an answer against the patient's images.\n"
      "Question: {question}\n"
      "Proposed answer: {answer}\n"
      "Is the proposed answer consistent with the images and the question? "
      "Reply \"yes\" or \"no\" first, then one sentence of justification.\n";
  t.report =
      "You are a radiology assistant writing the {organ} portion of a chest X-ray report.\n"
      "{examples_block}"
      "Findings from the question-and-answer review:\n"
      "{qa_block}"
      "Write a single concise report statement about the {organ}.\n";
  t.report_verify =
      "You are a radiology assistant auditing a draft report statement about the {organ}.\n"
      "Question-and-answer review it must summarize:\n"
      "{qa_block}"
      "Draft statement: {answer}\n"
      "Is the draft coherent with and justified by the review? "
      "Reply \"yes\" or \"no\" first, then one sentence of justification.\n";
  t.extract =
      "List every organ or anatomical structure mentioned in the radiology report below.\n"
      "Reply with a comma-separated list of organ names and nothing else.\n"
      "\n"
      "Report: {report}\n";
  t.follow_up =
      "Regarding {organ}: your earlier answer was '{answer}'. "
      "What additional findings refine or contradict this?";
  return t;
}

std::string render(const std::string& tmpl,
                   const std::vector<std::pair<std::string, std::string>>& slots) {
  std::string out = tmpl;
  for (const auto& [name, value] : slots) {
    const std::string needle = "{" + name + "}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

std::string qa_block(const std::vector<backend::QaPair>& qa_pairs) {
  std::string block;
  for (std::size_t i = 0; i < qa_pairs.size(); ++i) {
    block += "Q" + std::to_string(i + 1) + ": " + qa_pairs[i].question + "\n";
    block += "A" + std::to_string(i + 1) + ": " + qa_pairs[i].answer + "\n";
  }
  return block;
}

std::string examples_block(const knowledge::ExampleSet& examples) {
  if (examples.examples.empty()) return "";
  std::string block = "Example statements about the " + examples.organ + " from prior reports:\n";
  for (std::size_t i = 0; i < examples.examples.size(); ++i)
    block += std::to_string(i + 1) + ". " + examples.examples[i] + "\n";
  block += "\n";
  return block;
}

std::string render_answer(const PromptTemplates& t, const std::string& question) {
  return render(t.answer, {{"question", question}});
}

std::string render_verify(const PromptTemplates& t, const std::string& question,
                          const std::string& answer) {
  return render(t.verify, {{"question", question}, {"answer", answer}});
}

std::string render_report(const PromptTemplates& t, const std::string& organ,
                          const std::vector<backend::QaPair>& qa_pairs,
                          const knowledge::ExampleSet& examples) {
  return render(t.report, {{"organ", organ},
                           {"examples_block", examples_block(examples)},
                           {"qa_block", qa_block(qa_pairs)}});
}

std::string render_report_verify(const PromptTemplates& t, const std::string& organ,
                                 const std::string& qa_block_text, const std::string& statement) {
  return render(t.report_verify,
                {{"organ", organ}, {"qa_block", qa_block_text}, {"answer", statement}});
}

std::string render_extract(const PromptTemplates& t, const std::string& report) {
  return render(t.extract, {{"report", report}});
}

std::string render_follow_up(const PromptTemplates& t, const std::string& organ,
                             const std::string& prior_answer) {
  return render(t.follow_up, {{"organ", organ}, {"answer", prior_answer}});
}

}  // namespace tgt::prompts
