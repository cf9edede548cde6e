#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tgt::metrics {

struct TokenizedText {
  std::vector<std::string> tokens;
};

// Lowercase, punctuation split into standalone tokens, whitespace collapsed.
// Shared by every metric and by the analysis module.
TokenizedText normalize_tokenize(std::string_view text);

struct MetricReport {
  std::array<double, 4> bleu{};  // cumulative BLEU-1..4
  double meteor = 0.0;
  double rouge_l = 0.0;
  std::size_t candidate_tokens = 0;
  std::size_t reference_tokens = 0;
  std::size_t pairs = 0;

  std::array<double, 6> as_array() const {
    return {bleu[0], bleu[1], bleu[2], bleu[3], meteor, rouge_l};
  }
};

inline const std::array<const char*, 6> kMetricNames = {"bleu1", "bleu2", "bleu3",
                                                        "bleu4", "meteor", "rouge_l"};

struct BleuOptions {
  bool smooth = false;       // add-epsilon diagnostic mode
  double epsilon = 1e-9;
};

// Corpus-level cumulative BLEU-n: clipped modified precisions pooled over the
// corpus, uniform 1/n weights, geometric mean, brevity penalty min(1, e^{1-r/c}).
// No smoothing by default: any zero precision zeroes the score.
double bleu_n(const std::vector<TokenizedText>& candidates,
              const std::vector<TokenizedText>& references, int n, BleuOptions opts = {});

struct MeteorOptions {
  bool use_stem_stage = true;   // exact stage always runs first
  double gamma = 0.5;           // penalty weight
  double beta = 3.0;            // penalty exponent
};

// Original two-stage formulation: exact then stem unigram alignment (greedy
// left-to-right, chunk-minimizing tie-break), F_mean = 10PR/(R+9P),
// penalty = gamma*(chunks/matches)^beta.
double meteor(const TokenizedText& candidate, const TokenizedText& reference,
              MeteorOptions opts = {});

double meteor_corpus(const std::vector<TokenizedText>& candidates,
                     const std::vector<TokenizedText>& references, MeteorOptions opts = {});

// LCS F-score with beta=1: F = 2PR/(P+R).
double rouge_l(const TokenizedText& candidate, const TokenizedText& reference);

double rouge_l_corpus(const std::vector<TokenizedText>& candidates,
                      const std::vector<TokenizedText>& references);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// All six scores over raw text pairs.
MetricReport evaluate_corpus(
    const std::vector<std::pair<std::string, std::string>>& candidate_reference_pairs);

// Table-style percentage rendering with two decimals.
std::string format_percent(double score);

}  // namespace tgt::metrics
