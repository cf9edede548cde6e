#include "tgt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "tgt/errors.hpp"
#include "tgt/rng.hpp"
#include "tgt/text.hpp"

namespace tgt::corpus {

using nlohmann::json;

const char* to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kTest: return "test";
    default: return "unassigned";
  }
}

SplitTag split_tag_from_string(const std::string& s) {
  if (s == "train") return SplitTag::kTrain;
  if (s == "test") return SplitTag::kTest;
  if (s == "unassigned" || s.empty()) return SplitTag::kUnassigned;
  throw Error("unknown split tag: " + s);
}

namespace {

void check_case(const PatientCase& c, const std::string& file, std::size_t line,
                std::unordered_set<std::string>& seen) {
  if (c.case_id.empty()) throw ParseError(file, line, "empty case_id");
  if (!seen.insert(c.case_id).second) throw DuplicateCaseId(c.case_id);
}

PatientCase case_from_json(const json& obj, const std::string& file, std::size_t line) {
  PatientCase c;
  if (!obj.contains("case_id") || !obj["case_id"].is_string())
    throw MissingField(file + ":" + std::to_string(line) + ": missing case_id");
  c.case_id = obj["case_id"].get<std::string>();
  if (!obj.contains("report") || !obj["report"].is_string())
    throw MissingField(file + ":" + std::to_string(line) + ": missing report for case " + c.case_id);
  c.reference_report = obj["report"].get<std::string>();
  if (obj.contains("images")) {
    if (!obj["images"].is_array())
      throw ParseError(file, line, "images must be an array");
    for (const auto& img : obj["images"]) c.image_refs.push_back(img.get<std::string>());
  }
  if (obj.contains("split")) c.split_tag = split_tag_from_string(obj["split"].get<std::string>());
  return c;
}

// Minimal RFC4180: quoted fields, embedded commas, doubled quotes.
std::vector<std::string> parse_csv_line(const std::string& line, const std::string& file,
                                        std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      if (!cur.empty()) throw ParseError(file, line_no, "stray quote inside unquoted field");
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError(file, line_no, "unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

Corpus load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  Corpus out;
  out.provenance = path.string();
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    PatientCase c = case_from_json(obj, path.string(), line_no);
    check_case(c, path.string(), line_no, seen);
    out.cases.push_back(std::move(c));
  }
  return out;
}

Corpus load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  Corpus out;
  out.provenance = path.string();
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = parse_csv_line(line, path.string(), line_no);
    if (!header_done) {
      if (fields.size() < 3 || fields[0] != "case_id")
        throw ParseError(path.string(), line_no, "expected header case_id,images,report");
      header_done = true;
      continue;
    }
    if (fields.size() < 3)
      throw MissingField(path.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
    PatientCase c;
    c.case_id = fields[0];
    std::stringstream imgs(fields[1]);
    std::string img;
    while (std::getline(imgs, img, ';'))
      if (!img.empty()) c.image_refs.push_back(img);
    c.reference_report = fields[2];
    if (c.reference_report.empty())
      throw MissingField(path.string() + ":" + std::to_string(line_no) + ": missing report for case " +
                         c.case_id);
    check_case(c, path.string(), line_no, seen);
    out.cases.push_back(std::move(c));
  }
  if (!header_done) throw ParseError(path.string(), 0, "empty csv file");
  return out;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw ParseError(path.string(), 0, "file does not exist");
  return format == CorpusFormat::kJsonl ? load_jsonl(path) : load_csv(path);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const auto& c : corpus.cases) {
    json obj;
    obj["case_id"] = c.case_id;
    obj["images"] = c.image_refs;
    obj["report"] = c.reference_report;
    if (c.split_tag != SplitTag::kUnassigned) obj["split"] = to_string(c.split_tag);
    out << obj.dump() << '\n';
  }
}

Corpus split_corpus(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (corpus.cases.empty()) throw EmptyCorpus();
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error("train_fraction must be in (0,1)");
  const std::size_t n = corpus.cases.size();
  const auto train_count =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::SplitMix64 gen(seed);
  rng::shuffle(order, gen);
  Corpus out = corpus;
  for (std::size_t rank = 0; rank < n; ++rank)
    out.cases[order[rank]].split_tag = rank < train_count ? SplitTag::kTrain : SplitTag::kTest;
  return out;
}

namespace {

const std::vector<std::string>& abbreviations() {
  static const std::vector<std::string> kAbbrev = {"dr.", "vs.", "e.g.", "no."};
  return kAbbrev;
}

bool ends_with_abbreviation(const std::string& sentence_so_far) {
  const std::string lowered = text::to_lower(sentence_so_far);
  for (const auto& abbr : abbreviations()) {
    if (lowered.size() < abbr.size()) continue;
    if (lowered.compare(lowered.size() - abbr.size(), abbr.size(), abbr) != 0) continue;
    // Word boundary before the abbreviation ("no." must not fire inside "salerno.").
    const std::size_t before = lowered.size() - abbr.size();
    if (before == 0 || !std::isalnum(static_cast<unsigned char>(lowered[before - 1]))) return true;
  }
  return false;
}

}  // namespace

std::vector<SentenceSpan> segment_sentences(const std::string& report) {
  const std::string normalized = text::normalize_whitespace(report);
  std::vector<SentenceSpan> spans;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.front() == ' ') cur.erase(cur.begin());
    while (!cur.empty() && cur.back() == ' ') cur.pop_back();
    if (!cur.empty()) spans.push_back({spans.size(), cur});
    cur.clear();
  };
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const char c = normalized[i];
    cur.push_back(c);
    if (c != '.' && c != '!' && c != '?') continue;
    const bool at_end = i + 1 == normalized.size();
    const bool followed_by_space = !at_end && normalized[i + 1] == ' ';
    if (!at_end && !followed_by_space) continue;  // decimals, embedded dots
    if (c == '.' && ends_with_abbreviation(cur)) continue;
    flush();
    if (followed_by_space) ++i;  // consume the separator
  }
  flush();
  return spans;
}

}  // namespace tgt::corpus
