#pragma once

#include <array>
#include <string>
#include <vector>

namespace sgp {

struct BleuResult {
  double score = 0.0;  // corpus BLEU-4 in [0, 100]
  std::array<double, 4> precisions{};  // modified n-gram precisions
  double brevity_penalty = 1.0;
  int64_t hyp_len = 0, ref_len = 0;
};

/// Corpus BLEU-4: clipped n-gram matches aggregated over the corpus, geometric
/// mean of the four precisions, times the brevity penalty, scaled to [0,100].
/// Without smoothing, any zero precision zeroes the score; with smoothing,
/// zero counts receive add-one smoothing. Empty hypotheses contribute zero
/// counts rather than failing.
BleuResult evaluate_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                         const std::vector<std::vector<std::string>>& references,
                         bool smoothing = false);

}  // namespace sgp
