#include "tgt/mock_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "tgt/errors.hpp"
#include "tgt/text.hpp"

namespace tgt::backend {

using nlohmann::json;

long estimate_tokens(std::string_view text) {
  return static_cast<long>((text.size() + 3) / 4);
}

namespace {

std::string answer_key(const QueryMeta& m) {
  return m.organ + "/" + std::to_string(m.question_index) + "/" + std::to_string(m.round);
}

std::string verify_key(const QueryMeta& m) {
  return m.organ + "/" + std::to_string(m.question_index);
}

// Replaces floor(fraction*n) words at evenly spread positions with junk
// tokens, so corrupted statements lose n-gram overlap deterministically.
std::string corrupt_words(const std::string& statement, double fraction) {
  if (fraction <= 0.0) return statement;
  std::vector<std::string> words;
  std::stringstream ss(statement);
  std::string w;
  while (ss >> w) words.push_back(w);
  if (words.empty()) return statement;
  const auto n = words.size();
  auto count = static_cast<std::size_t>(std::floor(std::min(fraction, 1.0) * static_cast<double>(n)));
  if (count > n) count = n;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t idx = j * n / count;
    words[idx] = "zz" + std::to_string(j);
  }
  return text::join(words, " ");
}

}  // namespace

MockScript load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script: " + path.string());
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("mock script " + path.string() + ": " + e.what());
  }
  MockScript s;
  if (obj.contains("answers"))
    s.answers = obj["answers"].get<std::map<std::string, std::string>>();
  if (obj.contains("verify_plan"))
    s.verify_plan = obj["verify_plan"].get<std::map<std::string, int>>();
  if (obj.contains("report_verify_plan"))
    s.report_verify_plan = obj["report_verify_plan"].get<std::map<std::string, int>>();
  if (obj.contains("report_templates"))
    s.report_templates = obj["report_templates"].get<std::map<std::string, std::string>>();
  if (obj.contains("report_templates_enriched"))
    s.report_templates_enriched =
        obj["report_templates_enriched"].get<std::map<std::string, std::string>>();
  if (obj.contains("latency_ms")) s.latency_ms = obj["latency_ms"].get<std::map<std::string, int>>();
  if (obj.contains("degrade_with_displacement"))
    s.degrade_with_displacement = obj["degrade_with_displacement"].get<double>();
  if (obj.contains("icl_peak_k")) s.icl_peak_k = obj["icl_peak_k"].get<int>();
  if (obj.contains("icl_peak_rate")) s.icl_peak_rate = obj["icl_peak_rate"].get<double>();
  if (obj.contains("pad_answer_chars")) s.pad_answer_chars = obj["pad_answer_chars"].get<int>();
  if (obj.contains("extract_aliases")) {
    for (const auto& entry : obj["extract_aliases"]) {
      knowledge::OrganId organ;
      organ.canonical_name = entry.at("name").get<std::string>();
      if (entry.contains("aliases"))
        organ.aliases = entry["aliases"].get<std::vector<std::string>>();
      s.extract_aliases.push_back(std::move(organ));
    }
  }
  for (const auto& [key, n] : s.verify_plan)
    if (n < 0) throw ConfigError("verify_plan[" + key + "] must be >= 0");
  for (const auto& [key, n] : s.report_verify_plan)
    if (n < 0) throw ConfigError("report_verify_plan[" + key + "] must be >= 0");
  return s;
}

void save_mock_script(const MockScript& s, const std::filesystem::path& path) {
  json obj;
  obj["answers"] = s.answers;
  obj["verify_plan"] = s.verify_plan;
  obj["report_verify_plan"] = s.report_verify_plan;
  obj["report_templates"] = s.report_templates;
  obj["report_templates_enriched"] = s.report_templates_enriched;
  obj["latency_ms"] = s.latency_ms;
  obj["degrade_with_displacement"] = s.degrade_with_displacement;
  obj["icl_peak_k"] = s.icl_peak_k;
  obj["icl_peak_rate"] = s.icl_peak_rate;
  obj["pad_answer_chars"] = s.pad_answer_chars;
  obj["extract_aliases"] = json::array();
  for (const auto& organ : s.extract_aliases)
    obj["extract_aliases"].push_back({{"name", organ.canonical_name}, {"aliases", organ.aliases}});
  std::ofstream out(path);
  out << obj.dump(2) << '\n';
}

MockBackend::MockBackend(MockScript script, prompts::PromptTemplates templates)
    : script_(std::move(script)), templates_(std::move(templates)) {}

std::string MockBackend::answer_text(const QueryMeta& meta) const {
  std::string answer;
  if (auto it = script_.answers.find(answer_key(meta)); it != script_.answers.end()) {
    answer = it->second;
  } else {
    answer = "No remarkable findings for the " + meta.organ + " (question " +
             std::to_string(meta.question_index + 1) + ", round " + std::to_string(meta.round) +
             ").";
  }
  if (script_.pad_answer_chars > 0) {
    const auto target = static_cast<std::size_t>(script_.pad_answer_chars);
    if (answer.size() > target) answer.resize(target);
    while (answer.size() < target) answer.push_back('x');
  }
  return answer;
}

bool MockBackend::verify_verdict(const QueryMeta& meta) const {
  if (meta.kind == "report_verify") {
    auto it = script_.report_verify_plan.find(meta.organ);
    const int rejections = it == script_.report_verify_plan.end() ? 0 : it->second;
    return meta.attempt > rejections;
  }
  if (meta.round > 1) return true;  // verify_plan governs the round-1 loop only
  auto it = script_.verify_plan.find(verify_key(meta));
  const int rejections = it == script_.verify_plan.end() ? 0 : it->second;
  return meta.attempt > rejections;
}

std::string MockBackend::report_text(const std::vector<QaPair>& qa_pairs,
                                     const knowledge::ExampleSet& examples,
                                     const QueryMeta& meta) const {
  bool has_follow_up = false;
  for (const auto& qa : qa_pairs)
    if (qa.round > 1) has_follow_up = true;

  std::string tmpl;
  if (has_follow_up) {
    if (auto it = script_.report_templates_enriched.find(meta.organ);
        it != script_.report_templates_enriched.end())
      tmpl = it->second;
  }
  if (tmpl.empty()) {
    if (auto it = script_.report_templates.find(meta.organ); it != script_.report_templates.end())
      tmpl = it->second;
  }
  if (tmpl.empty()) tmpl = "Findings for the {organ}: {first_answer}";

  const std::string first_answer = qa_pairs.empty() ? "" : qa_pairs.front().answer;
  std::string statement =
      prompts::render(tmpl, {{"organ", meta.organ}, {"first_answer", first_answer}});

  double fraction = 0.0;
  if (script_.degrade_with_displacement > 0.0 && meta.graph_position >= 0 &&
      meta.canonical_position >= 0) {
    fraction += script_.degrade_with_displacement *
                std::abs(meta.graph_position - meta.canonical_position);
  }
  if (script_.icl_peak_k >= 0) {
    fraction += script_.icl_peak_rate *
                std::abs(static_cast<int>(examples.examples.size()) - script_.icl_peak_k);
  }
  return corrupt_words(statement, fraction);
}

std::string MockBackend::extract_text(const std::string& report) const {
  const auto& table =
      script_.extract_aliases.empty() ? knowledge::default_alias_table() : script_.extract_aliases;
  // First-occurrence order, the way an extraction model would list them.
  std::vector<std::pair<std::size_t, std::string>> hits;
  for (const auto& organ : table) {
    std::size_t best = std::string::npos;
    auto probe = [&](const std::string& alias) {
      const std::size_t pos = text::find_word(report, alias);
      if (pos != std::string::npos && pos < best) best = pos;
    };
    probe(organ.canonical_name);
    for (const auto& alias : organ.aliases) probe(alias);
    if (best != std::string::npos) hits.emplace_back(best, organ.canonical_name);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::string> names;
  for (auto& [pos, name] : hits) names.push_back(name);
  return names.empty() ? "none" : text::join(names, ", ");
}

BackendResponse MockBackend::make_response(const std::string& prompt, std::string answer,
                                           const QueryMeta& meta) const {
  if (capture_) capture_(meta, prompt);
  BackendResponse r;
  r.prompt_tokens = estimate_tokens(prompt);
  r.completion_tokens = estimate_tokens(answer);
  r.text = std::move(answer);
  if (auto it = script_.latency_ms.find(meta.organ); it != script_.latency_ms.end()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(it->second));
    r.latency_ms = it->second;
  }
  return r;
}

BackendResponse MockBackend::answer(const std::vector<std::string>&, const std::string& question,
                                    const QueryMeta& meta) {
  return make_response(prompts::render_answer(templates_, question), answer_text(meta), meta);
}

VerifyResult MockBackend::verify(const std::vector<std::string>&, const std::string& question,
                                 const std::string& answer, const QueryMeta& meta) {
  VerifyResult v;
  v.verified = verify_verdict(meta);
  // For report_verify the caller passes the rendered QA block as `question`.
  const std::string prompt =
      meta.kind == "report_verify"
          ? prompts::render_report_verify(templates_, meta.organ, question, answer)
          : prompts::render_verify(templates_, question, answer);
  v.response = make_response(prompt, v.verified ? "yes." : "no.", meta);
  return v;
}

BackendResponse MockBackend::generate_report(const std::vector<std::string>&,
                                             const std::vector<QaPair>& qa_pairs,
                                             const knowledge::ExampleSet& examples,
                                             const QueryMeta& meta) {
  return make_response(prompts::render_report(templates_, meta.organ, qa_pairs, examples),
                       report_text(qa_pairs, examples, meta), meta);
}

BackendResponse MockBackend::extract(const std::string& report, const QueryMeta& meta) {
  return make_response(prompts::render_extract(templates_, report), extract_text(report), meta);
}

}  // namespace tgt::backend
