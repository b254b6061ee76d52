#include "sgp/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sgp/errors.hpp"

namespace sgp {

namespace {

std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

BleuResult evaluate_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                         const std::vector<std::vector<std::string>>& references,
                         bool smoothing) {
  if (hypotheses.size() != references.size() || hypotheses.empty())
    throw ContractError("evaluate_bleu: need equal nonzero hypothesis/reference counts");

  BleuResult r;
  std::array<int64_t, 4> matches{}, totals{};
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& hyp = hypotheses[s];
    const auto& ref = references[s];
    r.hyp_len += static_cast<int64_t>(hyp.size());
    r.ref_len += static_cast<int64_t>(ref.size());
    for (int n = 1; n <= 4; ++n) {
      auto hc = ngram_counts(hyp, n);
      auto rc = ngram_counts(ref, n);
      for (const auto& [gram, count] : hc) {
        totals[static_cast<size_t>(n - 1)] += count;
        auto it = rc.find(gram);
        if (it != rc.end())
          matches[static_cast<size_t>(n - 1)] += std::min(count, it->second);
      }
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < 4; ++n) {
    double m = static_cast<double>(matches[static_cast<size_t>(n)]);
    double t = static_cast<double>(totals[static_cast<size_t>(n)]);
    if (smoothing && (m == 0.0 || t == 0.0)) {
      m += 1.0;
      t += 1.0;
    }
    double p = t > 0.0 ? m / t : 0.0;
    r.precisions[static_cast<size_t>(n)] = p;
    if (p <= 0.0)
      zero = true;
    else
      log_sum += 0.25 * std::log(p);
  }

  r.brevity_penalty =
      (r.hyp_len == 0)
          ? 0.0
          : (r.hyp_len >= r.ref_len
                 ? 1.0
                 : std::exp(1.0 - static_cast<double>(r.ref_len) /
                                      static_cast<double>(r.hyp_len)));
  r.score = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum);
  return r;
}

}  // namespace sgp
