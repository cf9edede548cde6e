#include "tgt/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "tgt/errors.hpp"
#include "tgt/stemmer.hpp"

namespace tgt::metrics {

TokenizedText normalize_tokenize(std::string_view text) {
  TokenizedText out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.tokens.push_back(word);
      word.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      flush();
    } else {
      flush();
      out.tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

namespace {

void check_paired(const std::vector<TokenizedText>& candidates,
                  const std::vector<TokenizedText>& references) {
  if (candidates.size() != references.size())
    throw LengthMismatch("candidate/reference lists differ: " + std::to_string(candidates.size()) +
                         " vs " + std::to_string(references.size()));
  if (candidates.empty()) throw EmptyCorpus();
}

// n-grams as delimiter-joined keys; tokens never contain '\x1f'.
std::unordered_map<std::string, long> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key.append(tokens[i + static_cast<std::size_t>(j)]);
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

double bleu_n(const std::vector<TokenizedText>& candidates,
              const std::vector<TokenizedText>& references, int n, BleuOptions opts) {
  check_paired(candidates, references);
  if (n < 1 || n > 4) throw Error("bleu order must be 1..4");

  double log_sum = 0.0;
  for (int order = 1; order <= n; ++order) {
    long clipped = 0;
    long total = 0;
    for (std::size_t p = 0; p < candidates.size(); ++p) {
      const auto cand = ngram_counts(candidates[p].tokens, order);
      const auto ref = ngram_counts(references[p].tokens, order);
      for (const auto& [key, count] : cand) {
        total += count;
        auto it = ref.find(key);
        if (it != ref.end()) clipped += std::min(count, it->second);
      }
    }
    double precision = total > 0 ? static_cast<double>(clipped) / static_cast<double>(total) : 0.0;
    if (precision <= 0.0) {
      if (!opts.smooth) return 0.0;
      precision = opts.epsilon;
    }
    log_sum += std::log(precision) / n;
  }

  long cand_len = 0;
  long ref_len = 0;
  for (std::size_t p = 0; p < candidates.size(); ++p) {
    cand_len += static_cast<long>(candidates[p].tokens.size());
    ref_len += static_cast<long>(references[p].tokens.size());
  }
  if (cand_len == 0) return 0.0;
  const double bp =
      std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  return bp * std::exp(log_sum);
}

namespace {

struct Alignment {
  // candidate position -> reference position, -1 when unmatched
  std::vector<int> cand_to_ref;
  std::size_t matches = 0;
};

// One greedy left-to-right stage over the not-yet-matched unigrams. The
// tie-break prefers the reference position that extends the current chunk.
template <typename KeyFn>
void align_stage(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                 Alignment& al, std::vector<bool>& ref_used, KeyFn key) {
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (al.cand_to_ref[i] >= 0) continue;
    const std::string ck = key(cand[i]);
    int chosen = -1;
    // chunk continuation: candidate i-1 matched to j-1
    if (i > 0 && al.cand_to_ref[i - 1] >= 0) {
      const std::size_t next = static_cast<std::size_t>(al.cand_to_ref[i - 1]) + 1;
      if (next < ref.size() && !ref_used[next] && key(ref[next]) == ck)
        chosen = static_cast<int>(next);
    }
    if (chosen < 0) {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!ref_used[j] && key(ref[j]) == ck) {
          chosen = static_cast<int>(j);
          break;
        }
      }
    }
    if (chosen >= 0) {
      al.cand_to_ref[i] = chosen;
      ref_used[static_cast<std::size_t>(chosen)] = true;
      ++al.matches;
    }
  }
}

std::size_t count_chunks(const Alignment& al) {
  std::size_t chunks = 0;
  int prev_ref = -2;
  bool in_chunk = false;
  for (std::size_t i = 0; i < al.cand_to_ref.size(); ++i) {
    const int j = al.cand_to_ref[i];
    if (j < 0) {
      in_chunk = false;
      prev_ref = -2;
      continue;
    }
    if (!in_chunk || j != prev_ref + 1) ++chunks;
    in_chunk = true;
    prev_ref = j;
  }
  return chunks;
}

}  // namespace

double meteor(const TokenizedText& candidate, const TokenizedText& reference, MeteorOptions opts) {
  const auto& cand = candidate.tokens;
  const auto& ref = reference.tokens;
  if (cand.empty() || ref.empty()) return 0.0;

  Alignment al;
  al.cand_to_ref.assign(cand.size(), -1);
  std::vector<bool> ref_used(ref.size(), false);
  align_stage(cand, ref, al, ref_used, [](const std::string& w) { return w; });
  if (opts.use_stem_stage)
    align_stage(cand, ref, al, ref_used, [](const std::string& w) { return porter_stem(w); });

  if (al.matches == 0) return 0.0;
  const double matches = static_cast<double>(al.matches);
  const double precision = matches / static_cast<double>(cand.size());
  const double recall = matches / static_cast<double>(ref.size());
  const double f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
  const double chunks = static_cast<double>(count_chunks(al));
  const double penalty = opts.gamma * std::pow(chunks / matches, opts.beta);
  return f_mean * (1.0 - penalty);
}

double meteor_corpus(const std::vector<TokenizedText>& candidates,
                     const std::vector<TokenizedText>& references, MeteorOptions opts) {
  check_paired(candidates, references);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    sum += meteor(candidates[i], references[i], opts);
  return sum / static_cast<double>(candidates.size());
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenizedText& candidate, const TokenizedText& reference) {
  if (candidate.tokens.empty() || reference.tokens.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate.tokens, reference.tokens));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.tokens.size());
  const double r = lcs / static_cast<double>(reference.tokens.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l_corpus(const std::vector<TokenizedText>& candidates,
                      const std::vector<TokenizedText>& references) {
  check_paired(candidates, references);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    sum += rouge_l(candidates[i], references[i]);
  return sum / static_cast<double>(candidates.size());
}

MetricReport evaluate_corpus(
    const std::vector<std::pair<std::string, std::string>>& candidate_reference_pairs) {
  if (candidate_reference_pairs.empty()) throw EmptyCorpus();
  std::vector<TokenizedText> candidates;
  std::vector<TokenizedText> references;
  candidates.reserve(candidate_reference_pairs.size());
  references.reserve(candidate_reference_pairs.size());
  MetricReport report;
  for (const auto& [cand, ref] : candidate_reference_pairs) {
    candidates.push_back(normalize_tokenize(cand));
    references.push_back(normalize_tokenize(ref));
    report.candidate_tokens += candidates.back().tokens.size();
    report.reference_tokens += references.back().tokens.size();
  }
  report.pairs = candidate_reference_pairs.size();
  for (int n = 1; n <= 4; ++n)
    report.bleu[static_cast<std::size_t>(n - 1)] = bleu_n(candidates, references, n);
  report.meteor = meteor_corpus(candidates, references);
  report.rouge_l = rouge_l_corpus(candidates, references);
  return report;
}

std::string format_percent(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", score * 100.0);
  return buf;
}

}  // namespace tgt::metrics
