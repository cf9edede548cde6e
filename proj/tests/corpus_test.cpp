#include "tgt/corpus.hpp"

#include <gtest/gtest.h>

#include <set>

#include "tgt/errors.hpp"
#include "tgt/rng.hpp"
#include "tgt/text.hpp"
#include "testutil.hpp"

using namespace tgt;
using tgt::test::TempDir;
using tgt::test::write_file;

TEST(LoadCorpus, WellFormedJsonl) {
  TempDir tmp;
  write_file(tmp.file("c.jsonl"),
             R"({"case_id": "a", "images": ["x.png"], "report": "Lungs clear."})"
             "\n"
             R"({"case_id": "b", "images": [], "report": "Heart normal."})"
             "\n"
             R"({"case_id": "c", "report": "Bones intact."})"
             "\n");
  const auto corpus = corpus::load_corpus(tmp.file("c.jsonl"), corpus::CorpusFormat::kJsonl);
  ASSERT_EQ(corpus.cases.size(), 3u);
  EXPECT_EQ(corpus.cases[0].case_id, "a");
  EXPECT_EQ(corpus.cases[0].image_refs.size(), 1u);
  EXPECT_EQ(corpus.cases[2].reference_report, "Bones intact.");
  for (const auto& c : corpus.cases) EXPECT_EQ(c.split_tag, corpus::SplitTag::kUnassigned);
}

TEST(LoadCorpus, DuplicateCaseIdRejected) {
  TempDir tmp;
  write_file(tmp.file("c.jsonl"),
             R"({"case_id": "p1", "report": "A."})"
             "\n"
             R"({"case_id": "p1", "report": "B."})"
             "\n");
  EXPECT_THROW(corpus::load_corpus(tmp.file("c.jsonl"), corpus::CorpusFormat::kJsonl),
               DuplicateCaseId);
}

TEST(LoadCorpus, MissingReportRejectedNotDropped) {
  TempDir tmp;
  write_file(tmp.file("c.jsonl"), R"({"case_id": "p1", "images": []})"
                                  "\n");
  EXPECT_THROW(corpus::load_corpus(tmp.file("c.jsonl"), corpus::CorpusFormat::kJsonl),
               MissingField);
}

TEST(LoadCorpus, ParseErrorCarriesLineNumber) {
  TempDir tmp;
  write_file(tmp.file("c.jsonl"), R"({"case_id": "p1", "report": "ok."})"
                                  "\n{nope\n");
  try {
    corpus::load_corpus(tmp.file("c.jsonl"), corpus::CorpusFormat::kJsonl);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line_number, 2u);
  }
}

TEST(LoadCorpus, MissingFileIsError) {
  EXPECT_THROW(corpus::load_corpus("/nonexistent/nope.jsonl", corpus::CorpusFormat::kJsonl),
               ParseError);
}

TEST(LoadCorpus, CsvWithQuotedFields) {
  TempDir tmp;
  write_file(tmp.file("c.csv"),
             "case_id,images,report\n"
             "p1,a.png;b.png,\"Heart normal, lungs clear.\"\n"
             "p2,,\"He said \"\"stable\"\".\"\n");
  const auto corpus = corpus::load_corpus(tmp.file("c.csv"), corpus::CorpusFormat::kCsv);
  ASSERT_EQ(corpus.cases.size(), 2u);
  EXPECT_EQ(corpus.cases[0].image_refs, (std::vector<std::string>{"a.png", "b.png"}));
  EXPECT_EQ(corpus.cases[0].reference_report, "Heart normal, lungs clear.");
  EXPECT_EQ(corpus.cases[1].reference_report, "He said \"stable\".");
}

TEST(LoadCorpus, HonorsOfficialSplitField) {
  TempDir tmp;
  write_file(tmp.file("c.jsonl"),
             R"({"case_id": "a", "report": "X.", "split": "train"})"
             "\n"
             R"({"case_id": "b", "report": "Y.", "split": "test"})"
             "\n");
  const auto corpus = corpus::load_corpus(tmp.file("c.jsonl"), corpus::CorpusFormat::kJsonl);
  EXPECT_EQ(corpus.cases[0].split_tag, corpus::SplitTag::kTrain);
  EXPECT_EQ(corpus.cases[1].split_tag, corpus::SplitTag::kTest);
}

TEST(LoadCorpus, RoundTripIsIdentity) {
  const auto original = tgt::test::synthetic_corpus(100, 7);
  TempDir tmp;
  corpus::save_corpus(original, tmp.file("c.jsonl"));
  const auto loaded = corpus::load_corpus(tmp.file("c.jsonl"), corpus::CorpusFormat::kJsonl);
  ASSERT_EQ(loaded.cases.size(), original.cases.size());
  for (std::size_t i = 0; i < loaded.cases.size(); ++i) {
    EXPECT_EQ(loaded.cases[i].case_id, original.cases[i].case_id);
    EXPECT_EQ(loaded.cases[i].image_refs, original.cases[i].image_refs);
    EXPECT_EQ(loaded.cases[i].reference_report, original.cases[i].reference_report);
    EXPECT_EQ(loaded.cases[i].split_tag, original.cases[i].split_tag);
  }
}

TEST(SplitCorpus, FloorRuleAndDeterminism) {
  const auto corpus10 = tgt::test::synthetic_corpus(10, 3);
  const auto a = corpus::split_corpus(corpus10, 0.8, 42);
  const auto b = corpus::split_corpus(corpus10, 0.8, 42);
  std::size_t train = 0;
  std::size_t test = 0;
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    EXPECT_EQ(a.cases[i].split_tag, b.cases[i].split_tag);
    if (a.cases[i].split_tag == corpus::SplitTag::kTrain) ++train;
    if (a.cases[i].split_tag == corpus::SplitTag::kTest) ++test;
  }
  EXPECT_EQ(train, 8u);
  EXPECT_EQ(test, 2u);
}

TEST(SplitCorpus, SingleCaseFloorsToTest) {
  const auto one = tgt::test::synthetic_corpus(1, 3);
  const auto split = corpus::split_corpus(one, 0.5, 1);
  EXPECT_EQ(split.cases[0].split_tag, corpus::SplitTag::kTest);
}

TEST(SplitCorpus, DifferentSeedsDiffer) {
  const auto corpus1000 = tgt::test::synthetic_corpus(1000, 3);
  const auto a = corpus::split_corpus(corpus1000, 0.8, 1);
  const auto b = corpus::split_corpus(corpus1000, 0.8, 2);
  std::set<std::string> train_a;
  std::set<std::string> train_b;
  for (const auto& c : a.cases)
    if (c.split_tag == corpus::SplitTag::kTrain) train_a.insert(c.case_id);
  for (const auto& c : b.cases)
    if (c.split_tag == corpus::SplitTag::kTrain) train_b.insert(c.case_id);
  EXPECT_EQ(train_a.size(), train_b.size());
  EXPECT_NE(train_a, train_b);
}

TEST(SplitCorpus, PartitionProperty) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto base = tgt::test::synthetic_corpus(37, seed);
    const auto split = corpus::split_corpus(base, 0.61, seed);
    std::size_t assigned = 0;
    for (const auto& c : split.cases) {
      EXPECT_NE(c.split_tag, corpus::SplitTag::kUnassigned);
      ++assigned;
    }
    EXPECT_EQ(assigned, base.cases.size());
  }
}

TEST(SplitCorpus, EmptyCorpusRejected) {
  corpus::Corpus empty;
  EXPECT_THROW(corpus::split_corpus(empty, 0.8, 1), EmptyCorpus);
}

TEST(SegmentSentences, Empty) {
  EXPECT_TRUE(corpus::segment_sentences("").empty());
}

TEST(SegmentSentences, TwoPlainSentences) {
  const auto spans = corpus::segment_sentences("Heart size normal. Lungs are clear.");
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0].index, 0u);
  EXPECT_EQ(spans[0].text, "Heart size normal.");
  EXPECT_EQ(spans[1].index, 1u);
  EXPECT_EQ(spans[1].text, "Lungs are clear.");
}

TEST(SegmentSentences, AbbreviationGuard) {
  const auto spans = corpus::segment_sentences("Seen by Dr. Smith today. Stable vs. prior exam.");
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0].text, "Seen by Dr. Smith today.");
  EXPECT_EQ(spans[1].text, "Stable vs. prior exam.");
}

TEST(SegmentSentences, DecimalNotSplit) {
  const auto spans = corpus::segment_sentences("Nodule measures 5.5 cm. Unchanged.");
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0].text, "Nodule measures 5.5 cm.");
}

TEST(SegmentSentences, QuestionAndExclamation) {
  const auto spans = corpus::segment_sentences("Effusion? No! Resolved.");
  ASSERT_EQ(spans.size(), 3u);
  EXPECT_EQ(spans[1].text, "No!");
}

TEST(SegmentSentences, IndicesAreGapless) {
  const auto spans =
      corpus::segment_sentences("One. Two. Three. Four? Five! Trailing fragment without stop");
  for (std::size_t i = 0; i < spans.size(); ++i) EXPECT_EQ(spans[i].index, i);
  EXPECT_EQ(spans.size(), 6u);
}

TEST(SegmentSentences, JoinReconstructsNormalizedReport) {
  const std::string report = "  Heart   normal.\nLungs \t clear.  No effusion. ";
  const auto spans = corpus::segment_sentences(report);
  std::vector<std::string> texts;
  for (const auto& s : spans) texts.push_back(s.text);
  EXPECT_EQ(text::join(texts, " "), text::normalize_whitespace(report));
}

// Generator oracle: sentence counts must match the synthetic generator, which
// always emits 5 terminator-separated sentences free of abbreviations.
TEST(SegmentSentences, GeneratorCountOracle) {
  const auto corpus = tgt::test::synthetic_corpus(50, 11);
  std::size_t matches = 0;
  for (const auto& c : corpus.cases)
    if (corpus::segment_sentences(c.reference_report).size() == 5u) ++matches;
  EXPECT_GE(matches, 48u);  // >= 95%
}
