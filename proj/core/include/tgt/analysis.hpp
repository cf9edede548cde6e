#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tgt/backend.hpp"
#include "tgt/corpus.hpp"
#include "tgt/knowledge.hpp"
#include "tgt/metrics.hpp"
#include "tgt/stats.hpp"
#include "tgt/traversal.hpp"

namespace tgt::analysis {

// ord[j] is the 1-based database index of the organ placed at graph position
// j; the identity ordering is (1, 2, ..., m).
struct PermutationRecord {
  std::vector<int> ord;
  std::array<double, 6> scores{};    // bleu1..4, meteor, rouge_l
  std::array<double, 6> distance{};  // Euclidean distance to the per-metric best order
};

struct MetricCorrelation {
  std::string metric;
  stats::CorrelationResult spearman;
  stats::CorrelationResult pearson;
};

struct PositionRecord {
  std::string organ;
  std::vector<std::pair<std::string, std::size_t>> mentions;  // (case_id, first sentence index)
  double mean_position = 0.0;  // undefined when count == 0
  std::size_t count = 0;
};

struct StudyOptions {
  std::size_t permutation_cap = 720;  // refuse m! beyond this
  bool cache_answers = false;         // reuse QA answers across permutations
  int max_concurrent = 1;             // worker threads over permutations
};

// Builds one graph per organ permutation (everything else held constant),
// generates reports for every case, scores all six metrics, then fills
// per-metric distances against that metric's best-scoring order.
std::vector<PermutationRecord> run_permutation_study(
    const std::vector<corpus::PatientCase>& cases, const knowledge::ExpertDatabase& db,
    const knowledge::QuestionBank& bank, const traversal::BudgetPolicy& policy,
    const traversal::TraversalOptions& options, backend::Backend& backend,
    std::size_t question_limit, std::uint64_t seed, const StudyOptions& study = {});

std::vector<int> best_order(const std::vector<PermutationRecord>& records,
                            std::size_t metric_index);

double order_distance(const std::vector<int>& ord, const std::vector<int>& best);

std::vector<MetricCorrelation> correlate_distance_scores(
    const std::vector<PermutationRecord>& records);

std::vector<PositionRecord> positional_bias(const corpus::Corpus& corpus,
                                            const std::vector<knowledge::OrganId>& organs);

struct SweepRow {
  double x = 0.0;  // k or budget
  double reasoning_tokens = 0.0;  // budget sweep only: mean per case
  std::array<double, 6> scores{};
};

// Duplicate k values are dropped (first occurrence wins); a note lands in
// `warnings` when that happens.
std::vector<SweepRow> icl_sweep(const std::vector<corpus::PatientCase>& cases,
                                const knowledge::ExpertDatabase& db,
                                const knowledge::QuestionBank& bank,
                                const traversal::BudgetPolicy& policy,
                                const traversal::TraversalOptions& options,
                                backend::Backend& backend, std::size_t question_limit,
                                std::uint64_t seed, const std::vector<std::size_t>& k_values,
                                std::vector<std::string>* warnings = nullptr);

std::vector<SweepRow> budget_sweep(const std::vector<corpus::PatientCase>& cases,
                                   const knowledge::ExpertDatabase& db,
                                   const knowledge::QuestionBank& bank,
                                   const traversal::BudgetPolicy& policy,
                                   const traversal::TraversalOptions& options,
                                   backend::Backend& backend, std::size_t question_limit,
                                   std::uint64_t seed, const std::vector<long>& budgets);

// CSV emitters with fixed, documented column orders.
void write_permutations_csv(const std::vector<PermutationRecord>& records,
                            const std::filesystem::path& path);
void write_correlations_csv(const std::vector<MetricCorrelation>& correlations,
                            const std::filesystem::path& path);
void write_bias_csv(const std::vector<PositionRecord>& records,
                    const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& x_column,
                     bool with_tokens, const std::filesystem::path& path);

}  // namespace tgt::analysis
