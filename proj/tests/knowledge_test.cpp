#include "tgt/knowledge.hpp"

#include <gtest/gtest.h>

#include <set>

#include "tgt/errors.hpp"
#include "tgt/mock_backend.hpp"
#include "tgt/text.hpp"
#include "testutil.hpp"

using namespace tgt;
using knowledge::ExtractorMode;

namespace {

knowledge::OrganId organ_of(const std::string& name) {
  for (const auto& organ : knowledge::default_alias_table())
    if (organ.canonical_name == name) return organ;
  throw std::runtime_error("no such organ in default table: " + name);
}

corpus::Corpus tiny_train_corpus(const std::vector<std::string>& reports) {
  corpus::Corpus out;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    corpus::PatientCase c;
    c.case_id = "t" + std::to_string(i);
    c.reference_report = reports[i];
    c.split_tag = corpus::SplitTag::kTrain;
    out.cases.push_back(std::move(c));
  }
  return out;
}

}  // namespace

TEST(ExtractOrgans, RulebasedOrdersByFirstMention) {
  const auto organs = knowledge::extract_organs({"Heart size is normal. Lungs are clear."},
                                                ExtractorMode::kRulebased,
                                                knowledge::default_alias_table());
  ASSERT_EQ(organs.size(), 2u);
  EXPECT_EQ(organs[0].canonical_name, "heart");
  EXPECT_EQ(organs[1].canonical_name, "lungs");
}

TEST(ExtractOrgans, NoMatchesIsErrorNotEmpty) {
  EXPECT_THROW(knowledge::extract_organs({"Nothing anatomical here."}, ExtractorMode::kRulebased,
                                         knowledge::default_alias_table()),
               NoOrgansFound);
}

TEST(ExtractOrgans, EmptyTrainSetRejected) {
  EXPECT_THROW(knowledge::extract_organs({}, ExtractorMode::kRulebased,
                                         knowledge::default_alias_table()),
               EmptyTrainSet);
}

TEST(ExtractOrgans, AliasMatchIsWordBounded) {
  // "heartily" must not hit the heart alias.
  EXPECT_THROW(knowledge::extract_organs({"We heartily agree."}, ExtractorMode::kRulebased,
                                         knowledge::default_alias_table()),
               NoOrgansFound);
}

// Generator oracle: 200 reports follow the canonical template order, so the
// mean-first-mention ordering must reproduce it exactly.
TEST(ExtractOrgans, GeneratorOrderOracle) {
  const auto corpus = tgt::test::synthetic_corpus(200, 5);
  std::vector<std::string> reports;
  for (const auto& c : corpus.cases) reports.push_back(c.reference_report);
  const auto organs = knowledge::extract_organs(reports, ExtractorMode::kRulebased,
                                                knowledge::default_alias_table());
  ASSERT_EQ(organs.size(), 5u);
  const std::vector<std::string> expected = {"heart", "lungs", "pleura", "mediastinum", "bones"};
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_EQ(organs[i].canonical_name, expected[i]) << "position " << i;
}

TEST(ExtractOrgans, BackendLlmModeMatchesRulebased) {
  const auto corpus = tgt::test::synthetic_corpus(20, 9);
  std::vector<std::string> reports;
  for (const auto& c : corpus.cases) reports.push_back(c.reference_report);
  backend::MockBackend llm{backend::MockScript{}};
  const auto via_llm = knowledge::extract_organs(reports, ExtractorMode::kBackendLlm,
                                                 knowledge::default_alias_table(), &llm);
  const auto via_rules = knowledge::extract_organs(reports, ExtractorMode::kRulebased,
                                                   knowledge::default_alias_table());
  ASSERT_EQ(via_llm.size(), via_rules.size());
  for (std::size_t i = 0; i < via_llm.size(); ++i)
    EXPECT_EQ(via_llm[i].canonical_name, via_rules[i].canonical_name);
}

TEST(BuildDatabase, AssignsSentencesPerOrgan) {
  const auto corpus = tiny_train_corpus({"Heart size normal. Lungs are clear."});
  const auto db = knowledge::build_database(corpus, {organ_of("heart"), organ_of("lungs")});
  EXPECT_EQ(db.sentences.at("heart"), (std::vector<std::string>{"Heart size normal."}));
  EXPECT_EQ(db.sentences.at("lungs"), (std::vector<std::string>{"Lungs are clear."}));
}

TEST(BuildDatabase, FirstOrganInListOrderWinsMultiOrganSentence) {
  const auto corpus = tiny_train_corpus({"Heart and lungs unremarkable."});
  const auto db = knowledge::build_database(corpus, {organ_of("heart"), organ_of("lungs")});
  EXPECT_EQ(db.sentences.at("heart").size(), 1u);
  EXPECT_TRUE(db.sentences.at("lungs").empty());
}

TEST(BuildDatabase, DeduplicatesExactSentences) {
  const auto corpus =
      tiny_train_corpus({"Lungs are clear.", "Lungs are clear. Lungs are hyperinflated."});
  const auto db = knowledge::build_database(corpus, {organ_of("lungs")});
  EXPECT_EQ(db.sentences.at("lungs").size(), 2u);
}

TEST(BuildDatabase, NoTrainCasesRejected) {
  corpus::Corpus corpus;
  corpus::PatientCase c;
  c.case_id = "x";
  c.reference_report = "Lungs clear.";
  c.split_tag = corpus::SplitTag::kTest;
  corpus.cases.push_back(c);
  EXPECT_THROW(knowledge::build_database(corpus, {organ_of("lungs")}), NoTrainCases);
}

// Generator oracle + the database invariant: every pooled sentence mentions
// an alias of its organ key.
TEST(BuildDatabase, GeneratorPoolOracleAndInvariant) {
  const auto corpus0 = tgt::test::synthetic_corpus(60, 13);
  corpus::Corpus tagged = corpus0;
  for (auto& c : tagged.cases) c.split_tag = corpus::SplitTag::kTrain;
  const auto table = knowledge::default_alias_table();
  const auto db = knowledge::build_database(tagged, table);

  // The generator draws from 8 distinct sentences per organ; with 60 cases
  // every variant appears, so each pool deduplicates to exactly 8.
  for (const auto& organ : table)
    EXPECT_EQ(db.sentences.at(organ.canonical_name).size(), 8u) << organ.canonical_name;

  for (const auto& organ : db.organs) {
    for (const auto& sentence : db.sentences.at(organ.canonical_name)) {
      bool mentions = text::contains_word(sentence, organ.canonical_name);
      for (const auto& alias : organ.aliases)
        mentions = mentions || text::contains_word(sentence, alias);
      EXPECT_TRUE(mentions) << sentence << " lacks aliases of " << organ.canonical_name;
    }
  }
}

TEST(GetQuestions, FullListAndPrefixProperty) {
  const auto table = knowledge::default_alias_table();
  const auto bank = knowledge::default_question_bank(table);
  const auto full = knowledge::get_questions(bank, organ_of("heart"), 7);
  ASSERT_EQ(full.size(), 7u);
  // Query-count ablation support: limit=a yields a prefix of limit=b (a<=b).
  for (std::size_t limit = 1; limit <= 7; ++limit) {
    const auto prefix = knowledge::get_questions(bank, organ_of("heart"), limit);
    ASSERT_EQ(prefix.size(), limit);
    for (std::size_t i = 0; i < limit; ++i) EXPECT_EQ(prefix[i], full[i]);
  }
}

TEST(GetQuestions, LimitBounds) {
  const auto bank = knowledge::default_question_bank(knowledge::default_alias_table());
  EXPECT_THROW(knowledge::get_questions(bank, organ_of("heart"), 0), LimitOutOfRange);
  EXPECT_THROW(knowledge::get_questions(bank, organ_of("heart"), 8), LimitOutOfRange);
}

TEST(GetQuestions, UnknownOrganRejected) {
  const auto bank = knowledge::default_question_bank(knowledge::default_alias_table());
  knowledge::OrganId ghost{"spleen", {}};
  EXPECT_THROW(knowledge::get_questions(bank, ghost, 3), UnknownOrgan);
}

TEST(SampleExamples, SmallPoolReturnedWhole) {
  knowledge::ExpertDatabase db;
  db.organs = {organ_of("heart")};
  db.sentences["heart"] = {"A.", "B.", "C."};
  const auto set = knowledge::sample_examples(db, organ_of("heart"), 5, 1);
  EXPECT_EQ(set.examples.size(), 3u);
  EXPECT_EQ(set.k, 5u);
}

TEST(SampleExamples, DeterministicPerSeedAndSeedSensitive) {
  knowledge::ExpertDatabase db;
  db.organs = {organ_of("lungs")};
  for (int i = 0; i < 100; ++i) db.sentences["lungs"].push_back("S" + std::to_string(i) + ".");
  const auto a1 = knowledge::sample_examples(db, organ_of("lungs"), 5, 42);
  const auto a2 = knowledge::sample_examples(db, organ_of("lungs"), 5, 42);
  const auto b = knowledge::sample_examples(db, organ_of("lungs"), 5, 43);
  EXPECT_EQ(a1.examples, a2.examples);
  EXPECT_NE(a1.examples, b.examples);
}

TEST(SampleExamples, NoDuplicatesNeverExceedsK) {
  knowledge::ExpertDatabase db;
  db.organs = {organ_of("bones")};
  for (int i = 0; i < 30; ++i) db.sentences["bones"].push_back("B" + std::to_string(i) + ".");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto set = knowledge::sample_examples(db, organ_of("bones"), 5, seed);
    EXPECT_LE(set.examples.size(), 5u);
    std::set<std::string> unique(set.examples.begin(), set.examples.end());
    EXPECT_EQ(unique.size(), set.examples.size());
  }
}

TEST(SampleExamples, UnknownOrganRejected) {
  knowledge::ExpertDatabase db;
  db.organs = {organ_of("heart")};
  db.sentences["heart"] = {"A."};
  EXPECT_THROW(knowledge::sample_examples(db, knowledge::OrganId{"spleen", {}}, 5, 1),
               UnknownOrgan);
}

TEST(AliasTable, FileRoundTripAndCollisionCheck) {
  tgt::test::TempDir tmp;
  knowledge::save_alias_table(knowledge::default_alias_table(), tmp.file("organs.json"));
  const auto loaded = knowledge::load_alias_table(tmp.file("organs.json"));
  EXPECT_EQ(loaded.size(), knowledge::default_alias_table().size());

  tgt::test::write_file(tmp.file("bad.json"),
                        R"([{"name": "heart", "aliases": ["cardiac"]},
                            {"name": "lungs", "aliases": ["cardiac"]}])");
  EXPECT_THROW(knowledge::load_alias_table(tmp.file("bad.json")), ConfigError);
}

TEST(Database, FileRoundTrip) {
  const auto corpus0 = tgt::test::synthetic_corpus(10, 3);
  corpus::Corpus tagged = corpus0;
  for (auto& c : tagged.cases) c.split_tag = corpus::SplitTag::kTrain;
  const auto db = knowledge::build_database(tagged, knowledge::default_alias_table());
  tgt::test::TempDir tmp;
  knowledge::save_database(db, tmp.file("db.json"));
  const auto loaded = knowledge::load_database(tmp.file("db.json"));
  ASSERT_EQ(loaded.organs.size(), db.organs.size());
  for (std::size_t i = 0; i < db.organs.size(); ++i) {
    EXPECT_EQ(loaded.organs[i].canonical_name, db.organs[i].canonical_name);
    EXPECT_EQ(loaded.sentences.at(db.organs[i].canonical_name),
              db.sentences.at(db.organs[i].canonical_name));
  }
}
