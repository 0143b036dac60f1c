#include "listenlab/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "listenlab/common.hpp"

namespace listenlab {

double compute_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ValidationError("auc: score/label count mismatch");
  size_t n = scores.size();
  size_t n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ValidationError("auc: undefined, both classes must be present");

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    double midrank = 0.5 * static_cast<double>((i + 1) + (j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[idx[k]] == 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double compute_acc(const std::vector<double>& scores, const std::vector<int>& labels,
                   double threshold) {
  if (scores.empty()) throw ValidationError("acc: empty input");
  if (scores.size() != labels.size())
    throw ValidationError("acc: score/label count mismatch");
  size_t correct = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    int pred = scores[i] >= threshold ? 1 : 0;
    correct += (pred == labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

}  // namespace listenlab
