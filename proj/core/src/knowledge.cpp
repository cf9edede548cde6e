#include "tgt/knowledge.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "tgt/backend.hpp"
#include "tgt/errors.hpp"
#include "tgt/rng.hpp"
#include "tgt/text.hpp"

namespace tgt::knowledge {

using nlohmann::json;

std::vector<OrganId> default_alias_table() {
  return {
      {"lungs", {"lung", "pulmonary"}},
      {"heart", {"cardiac", "cardiomegaly"}},
      {"pleura", {"pleural"}},
      {"mediastinum", {"mediastinal", "cardiomediastinal", "hilar"}},
      {"bones", {"bone", "osseous", "bony", "rib", "ribs", "spine", "skeletal"}},
  };
}

const OrganId* ExpertDatabase::find(const std::string& canonical_name) const {
  for (const auto& organ : organs)
    if (organ.canonical_name == canonical_name) return &organ;
  return nullptr;
}

std::size_t ExpertDatabase::index_of(const std::string& canonical_name) const {
  for (std::size_t i = 0; i < organs.size(); ++i)
    if (organs[i].canonical_name == canonical_name) return i;
  return static_cast<std::size_t>(-1);
}

QuestionBank default_question_bank(const std::vector<OrganId>& organs) {
  static const char* kTemplates[7] = {
      "Are the {organ} clearly visualized in the images?",
      "What is the size of the {organ}?",
      "What is the shape or contour of the {organ}?",
      "Are there abnormal opacities or densities involving the {organ}?",
      "Are there any abnormalities of the {organ}?",
      "Is any device, tube, or hardware projected over the {organ}?",
      "Has the appearance of the {organ} changed compared with prior imaging?",
  };
  QuestionBank bank;
  for (const auto& organ : organs) {
    std::vector<std::string> qs;
    for (const char* tmpl : kTemplates) {
      std::string q = tmpl;
      const std::string needle = "{organ}";
      if (auto pos = q.find(needle); pos != std::string::npos)
        q.replace(pos, needle.size(), organ.canonical_name);
      qs.push_back(std::move(q));
    }
    bank.questions[organ.canonical_name] = std::move(qs);
  }
  return bank;
}

namespace {

bool sentence_mentions(const std::string& sentence, const OrganId& organ) {
  if (text::contains_word(sentence, organ.canonical_name)) return true;
  for (const auto& alias : organ.aliases)
    if (text::contains_word(sentence, alias)) return true;
  return false;
}

// Mean first-mention sentence index per organ over the reports that mention
// it, plus a hit flag. Positions drive the default report order (Fig-5-style
// positional prior: earlier-described organs come first).
struct MentionStats {
  double mean_position = 0.0;
  std::size_t reports_with_mention = 0;
};

std::map<std::string, MentionStats> mention_stats(const std::vector<std::string>& reports,
                                                  const std::vector<OrganId>& table) {
  std::map<std::string, MentionStats> stats;
  for (const auto& report : reports) {
    const auto sentences = corpus::segment_sentences(report);
    for (const auto& organ : table) {
      for (const auto& span : sentences) {
        if (!sentence_mentions(span.text, organ)) continue;
        auto& s = stats[organ.canonical_name];
        s.mean_position += static_cast<double>(span.index);
        s.reports_with_mention += 1;
        break;
      }
    }
  }
  for (auto& [name, s] : stats)
    if (s.reports_with_mention > 0) s.mean_position /= static_cast<double>(s.reports_with_mention);
  return stats;
}

std::vector<OrganId> order_by_position(const std::vector<OrganId>& table,
                                       const std::set<std::string>& selected,
                                       const std::map<std::string, MentionStats>& stats) {
  std::vector<OrganId> out;
  for (const auto& organ : table)
    if (selected.count(organ.canonical_name)) out.push_back(organ);
  std::sort(out.begin(), out.end(), [&](const OrganId& a, const OrganId& b) {
    const auto ita = stats.find(a.canonical_name);
    const auto itb = stats.find(b.canonical_name);
    const bool ha = ita != stats.end() && ita->second.reports_with_mention > 0;
    const bool hb = itb != stats.end() && itb->second.reports_with_mention > 0;
    if (ha != hb) return ha;  // organs never located by alias scan go last
    if (ha && hb && ita->second.mean_position != itb->second.mean_position)
      return ita->second.mean_position < itb->second.mean_position;
    return a.canonical_name < b.canonical_name;
  });
  return out;
}

}  // namespace

std::vector<OrganId> extract_organs(const std::vector<std::string>& train_reports,
                                    ExtractorMode extractor, const std::vector<OrganId>& aliases,
                                    backend::Backend* llm) {
  if (train_reports.empty()) throw EmptyTrainSet();

  std::set<std::string> selected;
  if (extractor == ExtractorMode::kRulebased) {
    for (const auto& organ : aliases)
      for (const auto& report : train_reports)
        if (sentence_mentions(report, organ)) {
          selected.insert(organ.canonical_name);
          break;
        }
  } else {
    if (llm == nullptr) throw BackendError("backend_llm extraction requires a backend");
    backend::QueryMeta meta;
    meta.kind = "extract";
    for (std::size_t i = 0; i < train_reports.size(); ++i) {
      meta.question_index = static_cast<int>(i);
      const auto response = llm->extract(train_reports[i], meta);
      // Comma-separated names, canonicalized case-insensitively via the table.
      std::string current;
      auto commit = [&] {
        const std::string name = text::normalize_whitespace(text::to_lower(current));
        current.clear();
        if (name.empty()) return;
        for (const auto& organ : aliases) {
          if (organ.canonical_name == name ||
              std::find(organ.aliases.begin(), organ.aliases.end(), name) != organ.aliases.end()) {
            selected.insert(organ.canonical_name);
            return;
          }
        }
      };
      for (char c : response.text) {
        if (c == ',' || c == '\n') {
          commit();
        } else {
          current.push_back(c);
        }
      }
      commit();
    }
  }
  if (selected.empty()) throw NoOrgansFound();
  return order_by_position(aliases, selected, mention_stats(train_reports, aliases));
}

ExpertDatabase build_database(const corpus::Corpus& corpus, const std::vector<OrganId>& organs) {
  if (organs.empty()) throw Error("organs list is empty");
  ExpertDatabase db;
  db.organs = organs;
  db.source_split = "train";
  for (const auto& organ : organs) db.sentences[organ.canonical_name] = {};

  std::size_t train_cases = 0;
  for (const auto& c : corpus.cases) {
    if (c.split_tag != corpus::SplitTag::kTrain) continue;
    ++train_cases;
    for (const auto& span : corpus::segment_sentences(c.reference_report)) {
      for (const auto& organ : organs) {
        if (!sentence_mentions(span.text, organ)) continue;
        auto& pool = db.sentences[organ.canonical_name];
        if (std::find(pool.begin(), pool.end(), span.text) == pool.end())
          pool.push_back(span.text);
        break;  // first organ in list order wins; no multi-label assignment
      }
    }
  }
  if (train_cases == 0) throw NoTrainCases();
  return db;
}

std::vector<std::string> get_questions(const QuestionBank& bank, const OrganId& organ,
                                       std::size_t limit) {
  auto it = bank.questions.find(organ.canonical_name);
  if (it == bank.questions.end()) throw UnknownOrgan(organ.canonical_name);
  if (limit < 1 || limit > 7)
    throw LimitOutOfRange("question limit must be in 1..7, got " + std::to_string(limit));
  const auto& all = it->second;
  const std::size_t n = std::min(limit, all.size());
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n)};
}

ExampleSet sample_examples(const ExpertDatabase& db, const OrganId& organ, std::size_t k,
                           std::uint64_t seed) {
  if (db.find(organ.canonical_name) == nullptr) throw UnknownOrgan(organ.canonical_name);
  const auto& pool = db.sentences.at(organ.canonical_name);
  ExampleSet set;
  set.organ = organ.canonical_name;
  set.k = k;
  if (pool.size() <= k) {
    set.examples = pool;
    return set;
  }
  rng::SplitMix64 gen(seed);
  for (std::size_t idx : rng::sample_indices(pool.size(), k, gen)) set.examples.push_back(pool[idx]);
  return set;
}

std::vector<OrganId> load_alias_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open organ table: " + path.string());
  json arr;
  try {
    arr = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("organ table " + path.string() + ": " + e.what());
  }
  std::vector<OrganId> table;
  std::set<std::string> seen;
  for (const auto& entry : arr) {
    OrganId organ;
    organ.canonical_name = text::to_lower(entry.at("name").get<std::string>());
    if (organ.canonical_name.empty()) throw ConfigError("organ table: empty canonical name");
    if (entry.contains("aliases"))
      for (const auto& alias : entry["aliases"])
        organ.aliases.push_back(text::to_lower(alias.get<std::string>()));
    for (const auto& key : organ.aliases)
      if (!seen.insert(key).second) throw ConfigError("organ table: alias collides: " + key);
    if (!seen.insert(organ.canonical_name).second)
      throw ConfigError("organ table: name collides: " + organ.canonical_name);
    table.push_back(std::move(organ));
  }
  if (table.empty()) throw ConfigError("organ table is empty: " + path.string());
  return table;
}

void save_alias_table(const std::vector<OrganId>& organs, const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& organ : organs)
    arr.push_back({{"name", organ.canonical_name}, {"aliases", organ.aliases}});
  std::ofstream out(path);
  out << arr.dump(2) << '\n';
}

QuestionBank load_question_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open question bank: " + path.string());
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("question bank " + path.string() + ": " + e.what());
  }
  QuestionBank bank;
  for (const auto& [organ, questions] : obj.items()) {
    auto list = questions.get<std::vector<std::string>>();
    if (list.empty() || list.size() > 7)
      throw ConfigError("question bank: " + organ + " must have 1..7 questions");
    for (const auto& q : list)
      if (q.empty()) throw ConfigError("question bank: " + organ + " has an empty question");
    bank.questions[organ] = std::move(list);
  }
  return bank;
}

void save_question_bank(const QuestionBank& bank, const std::filesystem::path& path) {
  json obj;
  for (const auto& [organ, questions] : bank.questions) obj[organ] = questions;
  std::ofstream out(path);
  out << obj.dump(2) << '\n';
}

ExpertDatabase load_database(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDatabase("cannot open database: " + path.string());
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("database " + path.string() + ": " + e.what());
  }
  ExpertDatabase db;
  for (const auto& entry : obj.at("organs")) {
    OrganId organ;
    organ.canonical_name = entry.at("name").get<std::string>();
    if (entry.contains("aliases"))
      organ.aliases = entry["aliases"].get<std::vector<std::string>>();
    db.organs.push_back(std::move(organ));
  }
  if (db.organs.empty()) throw ConfigError("database has no organs: " + path.string());
  for (const auto& [organ, sentences] : obj.at("sentences").items())
    db.sentences[organ] = sentences.get<std::vector<std::string>>();
  if (obj.contains("source_split")) db.source_split = obj["source_split"].get<std::string>();
  for (const auto& organ : db.organs)
    if (!db.sentences.count(organ.canonical_name)) db.sentences[organ.canonical_name] = {};
  return db;
}

void save_database(const ExpertDatabase& db, const std::filesystem::path& path) {
  json obj;
  obj["organs"] = json::array();
  for (const auto& organ : db.organs)
    obj["organs"].push_back({{"name", organ.canonical_name}, {"aliases", organ.aliases}});
  obj["sentences"] = db.sentences;
  obj["source_split"] = db.source_split;
  std::ofstream out(path);
  out << obj.dump(2) << '\n';
}

}  // namespace tgt::knowledge
