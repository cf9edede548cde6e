#include "tgt/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "tgt/errors.hpp"
#include "tgt/text.hpp"

namespace tgt::analysis {

namespace {

// Memoizes Answer/Verify responses across permutation runs. QA traversal per
// organ does not depend on organ order, so replies keyed by the semantic call
// identity are safe to share; report generation is never cached because the
// displacement knob keys on graph position.
class CachingBackend : public backend::Backend {
 public:
  explicit CachingBackend(backend::Backend& inner) : inner_(inner) {}

  backend::BackendResponse answer(const std::vector<std::string>& images,
                                  const std::string& question,
                                  const backend::QueryMeta& meta) override {
    const std::string key = "a\x1f" + meta.organ + "\x1f" + std::to_string(meta.question_index) +
                            "\x1f" + std::to_string(meta.round) + "\x1f" +
                            std::to_string(meta.attempt) + "\x1f" + question;
    {
      std::lock_guard lock(mutex_);
      if (auto it = answers_.find(key); it != answers_.end()) return it->second;
    }
    auto response = inner_.answer(images, question, meta);
    std::lock_guard lock(mutex_);
    return answers_.emplace(key, std::move(response)).first->second;
  }

  backend::VerifyResult verify(const std::vector<std::string>& images, const std::string& question,
                               const std::string& answer,
                               const backend::QueryMeta& meta) override {
    const std::string key = meta.kind + "\x1f" + meta.organ + "\x1f" +
                            std::to_string(meta.question_index) + "\x1f" +
                            std::to_string(meta.round) + "\x1f" + std::to_string(meta.attempt) +
                            "\x1f" + question + "\x1f" + answer;
    {
      std::lock_guard lock(mutex_);
      if (auto it = verdicts_.find(key); it != verdicts_.end()) return it->second;
    }
    auto verdict = inner_.verify(images, question, answer, meta);
    std::lock_guard lock(mutex_);
    return verdicts_.emplace(key, std::move(verdict)).first->second;
  }

  backend::BackendResponse generate_report(const std::vector<std::string>& images,
                                           const std::vector<backend::QaPair>& qa_pairs,
                                           const knowledge::ExampleSet& examples,
                                           const backend::QueryMeta& meta) override {
    return inner_.generate_report(images, qa_pairs, examples, meta);
  }

  backend::BackendResponse extract(const std::string& report,
                                   const backend::QueryMeta& meta) override {
    return inner_.extract(report, meta);
  }

  void set_prompt_capture(backend::PromptCapture capture) override {
    inner_.set_prompt_capture(std::move(capture));
  }

 private:
  backend::Backend& inner_;
  std::mutex mutex_;
  std::unordered_map<std::string, backend::BackendResponse> answers_;
  std::unordered_map<std::string, backend::VerifyResult> verdicts_;
};

std::array<double, 6> score_cases(const std::vector<corpus::PatientCase>& cases,
                                  const std::vector<std::string>& generated) {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i)
    pairs.emplace_back(generated[i], cases[i].reference_report);
  return metrics::evaluate_corpus(pairs).as_array();
}

struct CaseRunSummary {
  std::vector<std::string> reports;
  double mean_reasoning_tokens = 0.0;
};

CaseRunSummary run_cases(const std::vector<corpus::PatientCase>& cases,
                         const traversal::ThoughtGraph& graph,
                         const knowledge::ExpertDatabase& db,
                         const traversal::BudgetPolicy& policy,
                         const traversal::TraversalOptions& options, backend::Backend& backend,
                         std::uint64_t seed, int max_concurrent) {
  CaseRunSummary out;
  long total_tokens = 0;
  for (const auto& patient : cases) {
    auto result = traversal::generate_case_report(patient, graph, db, policy, options, backend,
                                                  seed, max_concurrent);
    total_tokens += result.trace.reasoning_tokens_used;
    out.reports.push_back(std::move(result.report.full_text));
  }
  if (!cases.empty())
    out.mean_reasoning_tokens = static_cast<double>(total_tokens) / static_cast<double>(cases.size());
  return out;
}

long factorial(std::size_t m) {
  long f = 1;
  for (std::size_t i = 2; i <= m; ++i) f *= static_cast<long>(i);
  return f;
}

}  // namespace

std::vector<PermutationRecord> run_permutation_study(
    const std::vector<corpus::PatientCase>& cases, const knowledge::ExpertDatabase& db,
    const knowledge::QuestionBank& bank, const traversal::BudgetPolicy& policy,
    const traversal::TraversalOptions& options, backend::Backend& backend,
    std::size_t question_limit, std::uint64_t seed, const StudyOptions& study) {
  const std::size_t m = db.organs.size();
  if (m == 0) throw Error("database has no organs");
  const long total = factorial(m);
  if (total > static_cast<long>(study.permutation_cap))
    throw PermutationCapExceeded(std::to_string(m) + "! = " + std::to_string(total) +
                                 " exceeds cap " + std::to_string(study.permutation_cap));

  std::vector<std::vector<int>> orders;
  std::vector<int> ord(m);
  for (std::size_t j = 0; j < m; ++j) ord[j] = static_cast<int>(j) + 1;
  do {
    orders.push_back(ord);
  } while (std::next_permutation(ord.begin(), ord.end()));

  CachingBackend cache(backend);
  backend::Backend& effective = study.cache_answers ? static_cast<backend::Backend&>(cache)
                                                    : backend;

  std::vector<PermutationRecord> records(orders.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= orders.size()) return;
      try {
        std::vector<std::string> names;
        for (int organ_rank : orders[i])
          names.push_back(db.organs[static_cast<std::size_t>(organ_rank) - 1].canonical_name);
        const auto graph = traversal::build_graph(db, bank, names, question_limit);
        const auto summary =
            run_cases(cases, graph, db, policy, options, effective, seed, /*max_concurrent=*/1);
        records[i].ord = orders[i];
        records[i].scores = score_cases(cases, summary.reports);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(orders.size());
        return;
      }
    }
  };

  const std::size_t threads =
      std::min(static_cast<std::size_t>(std::max(study.max_concurrent, 1)), orders.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t k = 0; k < 6; ++k) {
    const auto best = best_order(records, k);
    for (auto& record : records) record.distance[k] = order_distance(record.ord, best);
  }
  return records;
}

std::vector<int> best_order(const std::vector<PermutationRecord>& records,
                            std::size_t metric_index) {
  if (records.empty()) throw EmptyRecords();
  const PermutationRecord* best = &records.front();
  for (const auto& record : records) {
    if (record.scores[metric_index] > best->scores[metric_index] ||
        (record.scores[metric_index] == best->scores[metric_index] && record.ord < best->ord))
      best = &record;
  }
  return best->ord;
}

double order_distance(const std::vector<int>& ord, const std::vector<int>& best) {
  if (ord.size() != best.size())
    throw LengthMismatch("order vectors differ in length: " + std::to_string(ord.size()) + " vs " +
                         std::to_string(best.size()));
  auto check_permutation = [](const std::vector<int>& v) {
    std::set<int> seen(v.begin(), v.end());
    if (seen.size() != v.size() || *seen.begin() != 1 ||
        *seen.rbegin() != static_cast<int>(v.size()))
      throw NotAPermutation("vector is not a permutation of 1..m");
  };
  check_permutation(ord);
  check_permutation(best);
  double sum = 0.0;
  for (std::size_t j = 0; j < ord.size(); ++j) {
    const double d = static_cast<double>(ord[j] - best[j]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::vector<MetricCorrelation> correlate_distance_scores(
    const std::vector<PermutationRecord>& records) {
  if (records.empty()) throw EmptyRecords();
  std::vector<MetricCorrelation> out;
  for (std::size_t k = 0; k < 6; ++k) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& record : records) {
      xs.push_back(record.distance[k]);
      ys.push_back(record.scores[k]);
    }
    MetricCorrelation c;
    c.metric = metrics::kMetricNames[k];
    c.spearman = stats::spearman(xs, ys);
    c.pearson = stats::pearson(xs, ys);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<PositionRecord> positional_bias(const corpus::Corpus& corpus,
                                            const std::vector<knowledge::OrganId>& organs) {
  std::vector<PositionRecord> out;
  for (const auto& organ : organs) {
    PositionRecord record;
    record.organ = organ.canonical_name;
    out.push_back(std::move(record));
  }
  for (const auto& patient : corpus.cases) {
    const auto sentences = corpus::segment_sentences(patient.reference_report);
    for (std::size_t o = 0; o < organs.size(); ++o) {
      for (const auto& span : sentences) {
        const auto& organ = organs[o];
        bool hit = text::contains_word(span.text, organ.canonical_name);
        for (const auto& alias : organ.aliases)
          if (!hit && text::contains_word(span.text, alias)) hit = true;
        if (!hit) continue;
        out[o].mentions.emplace_back(patient.case_id, span.index);
        break;
      }
    }
  }
  for (auto& record : out) {
    record.count = record.mentions.size();
    if (record.count == 0) continue;
    double sum = 0.0;
    for (const auto& [case_id, index] : record.mentions) sum += static_cast<double>(index);
    record.mean_position = sum / static_cast<double>(record.count);
  }
  return out;
}

std::vector<SweepRow> icl_sweep(const std::vector<corpus::PatientCase>& cases,
                                const knowledge::ExpertDatabase& db,
                                const knowledge::QuestionBank& bank,
                                const traversal::BudgetPolicy& policy,
                                const traversal::TraversalOptions& options,
                                backend::Backend& backend, std::size_t question_limit,
                                std::uint64_t seed, const std::vector<std::size_t>& k_values,
                                std::vector<std::string>* warnings) {
  if (k_values.empty()) throw Error("k_values must be nonempty");
  std::vector<std::size_t> unique_ks;
  std::set<std::size_t> seen;
  for (std::size_t k : k_values) {
    if (seen.insert(k).second) {
      unique_ks.push_back(k);
    } else if (warnings) {
      warnings->push_back("duplicate k=" + std::to_string(k) + " dropped");
    }
  }

  const auto graph = traversal::build_graph(db, bank, std::nullopt, question_limit);
  std::vector<SweepRow> rows;
  for (std::size_t k : unique_ks) {
    traversal::TraversalOptions per_k = options;
    per_k.examples_k = k;
    const auto summary = run_cases(cases, graph, db, policy, per_k, backend, seed, 1);
    SweepRow row;
    row.x = static_cast<double>(k);
    row.scores = score_cases(cases, summary.reports);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> budget_sweep(const std::vector<corpus::PatientCase>& cases,
                                   const knowledge::ExpertDatabase& db,
                                   const knowledge::QuestionBank& bank,
                                   const traversal::BudgetPolicy& policy,
                                   const traversal::TraversalOptions& options,
                                   backend::Backend& backend, std::size_t question_limit,
                                   std::uint64_t seed, const std::vector<long>& budgets) {
  if (budgets.empty()) throw Error("budgets must be nonempty");
  std::vector<long> sorted = budgets;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  const auto graph = traversal::build_graph(db, bank, std::nullopt, question_limit);
  std::vector<SweepRow> rows;
  for (long budget : sorted) {
    traversal::BudgetPolicy per_budget = policy;
    per_budget.max_reasoning_tokens = budget;
    const auto summary = run_cases(cases, graph, db, per_budget, options, backend, seed, 1);
    SweepRow row;
    row.x = static_cast<double>(budget);
    row.reasoning_tokens = summary.mean_reasoning_tokens;
    row.scores = score_cases(cases, summary.reports);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string ord_string(const std::vector<int>& ord) {
  std::string out;
  for (std::size_t j = 0; j < ord.size(); ++j) {
    if (j) out.push_back('-');
    out += std::to_string(ord[j]);
  }
  return out;
}

}  // namespace

void write_permutations_csv(const std::vector<PermutationRecord>& records,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "perm_index,ord";
  for (const char* name : metrics::kMetricNames) out << ',' << name;
  for (const char* name : metrics::kMetricNames) out << ",dist_" << name;
  out << '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << i << ',' << ord_string(records[i].ord);
    for (double score : records[i].scores) out << ',' << fmt(score);
    for (double d : records[i].distance) out << ',' << fmt(d);
    out << '\n';
  }
}

void write_correlations_csv(const std::vector<MetricCorrelation>& correlations,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "metric,spearman_rho,spearman_p,pearson_r,pearson_p,n\n";
  for (const auto& c : correlations) {
    out << c.metric << ',' << fmt(c.spearman.rho) << ',' << fmt(c.spearman.p_value, "%.6e") << ','
        << fmt(c.pearson.rho) << ',' << fmt(c.pearson.p_value, "%.6e") << ',' << c.spearman.n
        << '\n';
  }
}

void write_bias_csv(const std::vector<PositionRecord>& records,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "organ,count,mean_position\n";
  for (const auto& record : records) {
    out << record.organ << ',' << record.count << ',';
    if (record.count > 0) out << fmt(record.mean_position);
    out << '\n';
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& x_column,
                     bool with_tokens, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << x_column;
  if (with_tokens) out << ",reasoning_tokens_used";
  for (const char* name : metrics::kMetricNames) out << ',' << name;
  out << '\n';
  for (const auto& row : rows) {
    out << static_cast<long>(row.x);
    if (with_tokens) out << ',' << fmt(row.reasoning_tokens, "%.2f");
    for (double score : row.scores) out << ',' << fmt(score);
    out << '\n';
  }
}

}  // namespace tgt::analysis
