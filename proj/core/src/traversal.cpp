#include "tgt/traversal.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "tgt/errors.hpp"
#include "tgt/prompts.hpp"
#include "tgt/rng.hpp"
#include "tgt/text.hpp"

namespace tgt::traversal {

using nlohmann::json;

long OrganTrace::reasoning_tokens(bool exclude_verify) const {
  long total = 0;
  for (const auto& round : rounds) {
    for (const auto& qa : round) {
      total += qa.answer_tokens;
      if (!exclude_verify) total += qa.verify_tokens;
    }
  }
  if (!exclude_verify) total += report_verify_tokens;
  return total;
}

ThoughtGraph build_graph(const knowledge::ExpertDatabase& db, const knowledge::QuestionBank& bank,
                         const std::optional<std::vector<std::string>>& organ_order,
                         std::size_t question_limit) {
  std::vector<std::string> order;
  if (organ_order) {
    order = *organ_order;
    std::set<std::string> wanted(order.begin(), order.end());
    if (wanted.size() != order.size())
      throw InvalidPermutation("organ order contains duplicates");
    if (order.size() != db.organs.size())
      throw InvalidPermutation("organ order has " + std::to_string(order.size()) +
                               " entries, database has " + std::to_string(db.organs.size()));
    for (const auto& name : order)
      if (db.find(name) == nullptr)
        throw InvalidPermutation("organ order names unknown organ: " + name);
  } else {
    for (const auto& organ : db.organs) order.push_back(organ.canonical_name);
  }

  ThoughtGraph graph;
  for (const auto& name : order) {
    const auto* organ = db.find(name);
    graph.organ_nodes.push_back(*organ);
    graph.question_nodes[name] = knowledge::get_questions(bank, *organ, question_limit);
  }
  return graph;
}

namespace {

// Word-bounded so "abnormality" does not hit "normal".
bool is_normal_answer(const std::string& answer, const std::vector<std::string>& lexicon) {
  for (const auto& phrase : lexicon)
    if (text::contains_word(answer, phrase)) return true;
  return false;
}

struct PendingQuestion {
  std::string question;
  int question_index = -1;
};

}  // namespace

OrganTrace traverse_organ(const corpus::PatientCase& patient, const knowledge::OrganId& organ,
                          const ThoughtGraph& graph, const knowledge::ExpertDatabase& db,
                          const BudgetPolicy& policy, const TraversalOptions& options,
                          backend::Backend& backend, std::uint64_t seed) {
  const auto bank_it = graph.question_nodes.find(organ.canonical_name);
  if (bank_it == graph.question_nodes.end()) throw UnknownOrgan(organ.canonical_name);
  const auto& base_questions = bank_it->second;

  OrganTrace trace;
  trace.organ = organ.canonical_name;
  const auto graph_it =
      std::find_if(graph.organ_nodes.begin(), graph.organ_nodes.end(),
                   [&](const knowledge::OrganId& o) { return o.canonical_name == organ.canonical_name; });
  trace.graph_position = static_cast<int>(graph_it - graph.organ_nodes.begin());
  const int canonical_position = static_cast<int>(db.index_of(organ.canonical_name));

  const auto t0 = std::chrono::steady_clock::now();
  auto now_us = [&] {
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() -
                                                                 t0)
        .count();
  };

  backend::QueryMeta meta;
  meta.organ = organ.canonical_name;
  meta.graph_position = trace.graph_position;
  meta.canonical_position = canonical_position;

  // Latest accepted answer per round-1 slot; follow-up rounds derive from it.
  std::vector<std::string> latest_answer(base_questions.size());

  long committed_tokens = 0;  // reasoning tokens of completed rounds
  for (int round = 1; round <= policy.max_rounds; ++round) {
    std::vector<PendingQuestion> pending;
    if (round == 1) {
      for (std::size_t i = 0; i < base_questions.size(); ++i)
        pending.push_back({base_questions[i], static_cast<int>(i)});
    } else {
      if (policy.max_reasoning_tokens == 0) break;  // budget forcing disabled
      if (committed_tokens >= policy.max_reasoning_tokens) break;
      // Follow-ups probe the non-normal findings from the previous answers.
      for (std::size_t i = 0; i < base_questions.size(); ++i) {
        if (latest_answer[i].empty()) continue;
        if (is_normal_answer(latest_answer[i], options.normal_lexicon)) continue;
        pending.push_back({prompts::render(options.follow_up_template,
                                           {{"organ", organ.canonical_name},
                                            {"answer", latest_answer[i]}}),
                           static_cast<int>(i)});
      }
      if (pending.empty()) break;
    }

    std::vector<QaRecord> round_records;
    long round_tokens = 0;
    for (const auto& q : pending) {
      QaRecord rec;
      rec.question = q.question;
      rec.round = round;
      rec.question_index = q.question_index;
      rec.started_us = now_us();
      meta.question_index = q.question_index;
      meta.round = round;
      for (int attempt = 1; attempt <= policy.max_verify_attempts; ++attempt) {
        meta.attempt = attempt;
        meta.kind = "answer";
        const auto response = backend.answer(patient.image_refs, q.question, meta);
        rec.answer = response.text;
        rec.answer_tokens += response.completion_tokens;
        meta.kind = "verify";
        const auto verdict = backend.verify(patient.image_refs, q.question, rec.answer, meta);
        rec.verify_tokens += verdict.response.completion_tokens;
        ++rec.verify_attempts;
        if (verdict.verified) {
          rec.flagged = false;
          break;
        }
        rec.flagged = attempt == policy.max_verify_attempts;  // accept-after-max escape
      }
      rec.finished_us = now_us();
      latest_answer[static_cast<std::size_t>(q.question_index)] = rec.answer;
      round_tokens += rec.answer_tokens + rec.verify_tokens;
      round_records.push_back(std::move(rec));
    }
    trace.rounds.push_back(std::move(round_records));
    committed_tokens += round_tokens;
    if (round_tokens == 0) break;
  }

  // Statement generation over the full QA context, with one verification per
  // attempt against the reasoning path.
  std::vector<backend::QaPair> qa_pairs;
  for (const auto& round : trace.rounds)
    for (const auto& rec : round) qa_pairs.push_back({rec.question, rec.answer, rec.round});

  const auto examples = knowledge::sample_examples(db, organ, options.examples_k, seed);
  const std::string qa_block = prompts::qa_block(qa_pairs);
  for (int attempt = 1; attempt <= policy.max_verify_attempts; ++attempt) {
    meta.attempt = attempt;
    meta.question_index = -1;
    meta.round = static_cast<int>(trace.rounds.size());
    meta.kind = "report";
    const auto response = backend.generate_report(patient.image_refs, qa_pairs, examples, meta);
    trace.statement = response.text;
    trace.report_tokens = response.completion_tokens;
    ++trace.report_attempts;
    meta.kind = "report_verify";
    const auto verdict = backend.verify(patient.image_refs, qa_block, trace.statement, meta);
    trace.report_verify_tokens += verdict.response.completion_tokens;
    if (verdict.verified) {
      trace.statement_flagged = false;
      break;
    }
    trace.statement_flagged = attempt == policy.max_verify_attempts;
  }
  if (trace.statement_flagged) {
    // Unlike the answer loop, an exhausted statement verification means the
    // organ never produced a verified r_o; the assembled report carries a
    // failure marker instead.
    trace.failed = true;
    trace.failure_reason = "statement verification exhausted after " +
                           std::to_string(policy.max_verify_attempts) + " attempts";
  }
  return trace;
}

CaseResult generate_case_report(const corpus::PatientCase& patient, const ThoughtGraph& graph,
                                const knowledge::ExpertDatabase& db, const BudgetPolicy& policy,
                                const TraversalOptions& options, backend::Backend& backend,
                                std::uint64_t seed, int max_concurrent) {
  if (graph.organ_nodes.empty()) throw Error("graph has no organ nodes");

  const std::size_t n = graph.organ_nodes.size();
  std::vector<OrganTrace> traces(n);
  std::atomic<std::size_t> next{0};
  const std::uint64_t case_seed = rng::mix(seed, rng::fnv1a64(patient.case_id));

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const auto& organ = graph.organ_nodes[i];
      const std::uint64_t organ_seed =
          rng::mix(case_seed, static_cast<std::uint64_t>(db.index_of(organ.canonical_name)) + 1);
      try {
        traces[i] = traverse_organ(patient, organ, graph, db, policy, options, backend, organ_seed);
      } catch (const BackendError& e) {
        traces[i].organ = organ.canonical_name;
        traces[i].graph_position = static_cast<int>(i);
        traces[i].failed = true;
        traces[i].failure_reason = e.what();
      }
    }
  };

  const std::size_t threads =
      std::min(static_cast<std::size_t>(std::max(max_concurrent, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CaseResult result;
  result.trace.case_id = patient.case_id;
  std::vector<std::string> statements;
  for (std::size_t i = 0; i < n; ++i) {
    auto& trace = traces[i];
    const std::string statement =
        trace.failed ? "[unavailable: " + trace.organ + "]" : trace.statement;
    result.report.organ_statements.emplace_back(trace.organ, statement);
    statements.push_back(statement);
    result.trace.reasoning_tokens_used += trace.reasoning_tokens(options.tokens_exclude_verify);
    result.partial_failure = result.partial_failure || trace.failed;
    result.trace.organs.push_back(std::move(trace));
  }
  result.report.full_text = text::join(statements, " ");
  return result;
}

void save_trace(const TraversalTrace& trace, const std::filesystem::path& path) {
  json organs = json::array();
  for (const auto& organ : trace.organs) {
    json rounds = json::array();
    for (const auto& round : organ.rounds) {
      json records = json::array();
      for (const auto& qa : round) {
        records.push_back({{"question", qa.question},
                           {"answer", qa.answer},
                           {"round", qa.round},
                           {"question_index", qa.question_index},
                           {"verify_attempts", qa.verify_attempts},
                           {"answer_tokens", qa.answer_tokens},
                           {"verify_tokens", qa.verify_tokens},
                           {"flagged", qa.flagged}});
      }
      rounds.push_back(std::move(records));
    }
    organs.push_back({{"organ", organ.organ},
                      {"graph_position", organ.graph_position},
                      {"rounds", std::move(rounds)},
                      {"statement", organ.statement},
                      {"statement_flagged", organ.statement_flagged},
                      {"report_attempts", organ.report_attempts},
                      {"report_tokens", organ.report_tokens},
                      {"report_verify_tokens", organ.report_verify_tokens},
                      {"failed", organ.failed},
                      {"failure_reason", organ.failure_reason}});
  }
  json obj{{"case_id", trace.case_id},
           {"reasoning_tokens_used", trace.reasoning_tokens_used},
           {"organs", std::move(organs)}};
  std::ofstream out(path);
  out << obj.dump(2) << '\n';
}

}  // namespace tgt::traversal
