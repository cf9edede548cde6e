#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tgt/corpus.hpp"

namespace tgt::backend {
class Backend;
}

namespace tgt::knowledge {

struct OrganId {
  std::string canonical_name;          // lowercase
  std::vector<std::string> aliases;    // lowercase, includes variants only (not the name itself)
};

// Five-organ chest X-ray convention with common aliases. Fully overridable
// through the organ table config file.
std::vector<OrganId> default_alias_table();

struct ExpertDatabase {
  std::vector<OrganId> organs;                                  // order = default report order
  std::map<std::string, std::vector<std::string>> sentences;    // organ name -> pool
  std::string source_split;

  const OrganId* find(const std::string& canonical_name) const;
  std::size_t index_of(const std::string& canonical_name) const;  // npos when absent
};

struct QuestionBank {
  std::map<std::string, std::vector<std::string>> questions;  // organ name -> 1..7 questions
};

// Seven templated diagnostic questions (presence, size, shape, opacity,
// abnormality, device, comparison) instantiated with the organ name.
QuestionBank default_question_bank(const std::vector<OrganId>& organs);

struct ExampleSet {
  std::string organ;
  std::vector<std::string> examples;
  std::size_t k = 0;  // requested count
};

enum class ExtractorMode { kRulebased, kBackendLlm };

// Rule-based: every organ whose alias appears (whole word, case-insensitive)
// in at least one report, ordered by mean first-mention sentence index, ties
// alphabetical. Backend mode sends the extraction prompt per report and
// canonicalizes the returned names through the alias table; same ordering.
std::vector<OrganId> extract_organs(const std::vector<std::string>& train_reports,
                                    ExtractorMode extractor,
                                    const std::vector<OrganId>& aliases,
                                    backend::Backend* llm = nullptr);

// Each train-report sentence goes to the first organ (organs-list order)
// with an alias hit; unmatched sentences are discarded, exact duplicates
// deduplicated per organ.
ExpertDatabase build_database(const corpus::Corpus& corpus, const std::vector<OrganId>& organs);

std::vector<std::string> get_questions(const QuestionBank& bank, const OrganId& organ,
                                       std::size_t limit);

// Uniform sample without replacement, deterministic per seed; pools smaller
// than k are returned whole.
ExampleSet sample_examples(const ExpertDatabase& db, const OrganId& organ, std::size_t k,
                           std::uint64_t seed);

// Organ table and database files are JSON (schema in the README).
std::vector<OrganId> load_alias_table(const std::filesystem::path& path);
void save_alias_table(const std::vector<OrganId>& organs, const std::filesystem::path& path);

QuestionBank load_question_bank(const std::filesystem::path& path);
void save_question_bank(const QuestionBank& bank, const std::filesystem::path& path);

ExpertDatabase load_database(const std::filesystem::path& path);
void save_database(const ExpertDatabase& db, const std::filesystem::path& path);

}  // namespace tgt::knowledge
