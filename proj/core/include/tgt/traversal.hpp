#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tgt/backend.hpp"
#include "tgt/corpus.hpp"
#include "tgt/knowledge.hpp"

namespace tgt::traversal {

// Two-level reasoning plan: organ nodes in traversal order, each expanding
// into an ordered question list.
struct ThoughtGraph {
  std::string case_ref;
  std::vector<knowledge::OrganId> organ_nodes;
  std::map<std::string, std::vector<std::string>> question_nodes;
};

struct BudgetPolicy {
  long max_reasoning_tokens = 450;  // 0 disables budget forcing: exactly one round
  int max_rounds = 3;
  int max_verify_attempts = 3;
};

struct TraversalOptions {
  std::size_t examples_k = 5;
  bool tokens_exclude_verify = false;
  // Answers matching any of these (case-insensitive substring) are not worth
  // a follow-up question in later rounds.
  std::vector<std::string> normal_lexicon = {"normal",   "no findings", "unremarkable",
                                             "clear",    "no acute",    "intact",
                                             "stable",   "no remarkable"};
  std::string follow_up_template =
      "Regarding {organ}: your earlier answer was '{answer}'. "
      "What additional findings refine or contradict this?";
};

struct QaRecord {
  std::string question;
  std::string answer;
  int round = 1;
  int question_index = -1;  // round-1 slot this question belongs to / derives from
  int verify_attempts = 0;
  long answer_tokens = 0;   // across re-asks
  long verify_tokens = 0;
  bool flagged = false;     // accepted unverified after max attempts
  // steady-clock microseconds relative to the organ traversal start; test
  // instrumentation, never exported
  long long started_us = 0;
  long long finished_us = 0;
};

struct OrganTrace {
  std::string organ;
  int graph_position = -1;
  std::vector<std::vector<QaRecord>> rounds;
  std::string statement;
  bool statement_flagged = false;
  int report_attempts = 0;
  long report_tokens = 0;  // output tokens, excluded from reasoning totals
  long report_verify_tokens = 0;
  bool failed = false;
  std::string failure_reason;

  long reasoning_tokens(bool exclude_verify) const;
};

struct TraversalTrace {
  std::string case_id;
  std::vector<OrganTrace> organs;  // graph order
  long reasoning_tokens_used = 0;
};

struct AssembledReport {
  std::vector<std::pair<std::string, std::string>> organ_statements;  // graph order
  std::string full_text;                                              // space-joined
};

struct CaseResult {
  AssembledReport report;
  TraversalTrace trace;
  bool partial_failure = false;
};

ThoughtGraph build_graph(const knowledge::ExpertDatabase& db, const knowledge::QuestionBank& bank,
                         const std::optional<std::vector<std::string>>& organ_order,
                         std::size_t question_limit);

// Algorithm core for one organ: sequential questions with a bounded verify
// loop, budget-forced follow-up rounds, then statement generation with a
// post-generation verification pass. Rounds are atomic: the budget decides
// whether the next round starts, never truncating one in flight.
OrganTrace traverse_organ(const corpus::PatientCase& patient, const knowledge::OrganId& organ,
                          const ThoughtGraph& graph, const knowledge::ExpertDatabase& db,
                          const BudgetPolicy& policy, const TraversalOptions& options,
                          backend::Backend& backend, std::uint64_t seed);

// Runs organs concurrently (bounded by max_concurrent), assembles statements
// in graph order regardless of completion order. Organs whose backend failed
// after retries appear as "[unavailable: organ]" markers.
CaseResult generate_case_report(const corpus::PatientCase& patient, const ThoughtGraph& graph,
                                const knowledge::ExpertDatabase& db, const BudgetPolicy& policy,
                                const TraversalOptions& options, backend::Backend& backend,
                                std::uint64_t seed, int max_concurrent = 4);

void save_trace(const TraversalTrace& trace, const std::filesystem::path& path);

}  // namespace tgt::traversal
