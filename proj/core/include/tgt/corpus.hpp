#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tgt::corpus {

enum class SplitTag { kUnassigned, kTrain, kTest };

const char* to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& s);

struct PatientCase {
  std::string case_id;
  std::vector<std::string> image_refs;
  std::string reference_report;
  SplitTag split_tag = SplitTag::kUnassigned;
};

struct Corpus {
  std::vector<PatientCase> cases;
  std::string provenance;
};

struct SentenceSpan {
  std::size_t index = 0;
  std::string text;
};

enum class CorpusFormat { kJsonl, kCsv };

// One object per line: case_id (string), images (array of strings),
// report (string), optional split ("train"|"test"). CSV variant has columns
// case_id,images,report with images ';'-separated.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Seeded shuffle, floor(train_fraction*N) cases tagged train, rest test.
// Reassigns every case; corpora that ship an official split skip this step.
Corpus split_corpus(const Corpus& corpus, double train_fraction, std::uint64_t seed);

// Terminator split (. ! ?) with a small abbreviation blocklist. Joining the
// spans with single spaces reconstructs the whitespace-normalized report.
std::vector<SentenceSpan> segment_sentences(const std::string& report);

}  // namespace tgt::corpus
