#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "tgt/knowledge.hpp"
#include "tgt/metrics.hpp"
#include "tgt/mock_backend.hpp"
#include "tgt/rng.hpp"
#include "tgt/stats.hpp"
#include "tgt/traversal.hpp"

namespace {

std::string synthetic_sentence(tgt::rng::SplitMix64& gen, std::size_t words) {
  static const char* kWords[] = {"the",     "heart",  "lungs",   "is",     "are",   "normal",
                                 "clear",   "mild",   "opacity", "seen",   "no",    "acute",
                                 "process", "within", "limits",  "contour"};
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out.push_back(' ');
    out += kWords[gen.below(sizeof(kWords) / sizeof(kWords[0]))];
  }
  out.push_back('.');
  return out;
}

std::vector<std::pair<std::string, std::string>> synthetic_pairs(std::size_t n) {
  tgt::rng::SplitMix64 gen(7);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    pairs.emplace_back(synthetic_sentence(gen, 24), synthetic_sentence(gen, 24));
  return pairs;
}

void BM_EvaluateCorpus(benchmark::State& state) {
  const auto pairs = synthetic_pairs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto report = tgt::metrics::evaluate_corpus(pairs);
    benchmark::DoNotOptimize(report);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluateCorpus)->Arg(16)->Arg(64)->Arg(256);

void BM_LcsLength(benchmark::State& state) {
  tgt::rng::SplitMix64 gen(11);
  const auto a = tgt::metrics::normalize_tokenize(synthetic_sentence(gen, state.range(0)));
  const auto b = tgt::metrics::normalize_tokenize(synthetic_sentence(gen, state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tgt::metrics::lcs_length(a.tokens, b.tokens));
}
BENCHMARK(BM_LcsLength)->Arg(32)->Arg(128)->Arg(512);

void BM_Spearman(benchmark::State& state) {
  tgt::rng::SplitMix64 gen(13);
  std::vector<double> xs;
  std::vector<double> ys;
  for (long i = 0; i < state.range(0); ++i) {
    xs.push_back(static_cast<double>(gen.below(10000)));
    ys.push_back(static_cast<double>(gen.below(10000)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(tgt::stats::spearman(xs, ys));
}
BENCHMARK(BM_Spearman)->Arg(120)->Arg(1200);

void BM_MockTraversal(benchmark::State& state) {
  const auto organs = tgt::knowledge::default_alias_table();
  tgt::knowledge::ExpertDatabase db;
  db.organs = organs;
  tgt::rng::SplitMix64 gen(17);
  for (const auto& organ : organs) {
    auto& pool = db.sentences[organ.canonical_name];
    for (int i = 0; i < 20; ++i) pool.push_back(synthetic_sentence(gen, 10));
  }
  const auto bank = tgt::knowledge::default_question_bank(organs);
  const auto graph = tgt::traversal::build_graph(db, bank, std::nullopt, 7);
  tgt::backend::MockBackend backend{tgt::backend::MockScript{}};
  tgt::corpus::PatientCase patient;
  patient.case_id = "bench";
  patient.reference_report = "Heart and lungs unremarkable.";
  tgt::traversal::BudgetPolicy policy;
  tgt::traversal::TraversalOptions options;
  for (auto _ : state) {
    auto result = tgt::traversal::generate_case_report(patient, graph, db, policy, options,
                                                       backend, 42, 1);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_MockTraversal);

}  // namespace

BENCHMARK_MAIN();
