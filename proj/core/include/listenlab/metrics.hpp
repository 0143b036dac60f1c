#pragma once

#include <vector>

namespace listenlab {

// Rank-based AUC with midrank ties; equals the Mann-Whitney statistic
// (fraction of (pos, neg) pairs ranked correctly, ties counting 0.5).
// Throws ValidationError unless both classes are present.
double compute_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Fraction of samples with (score >= threshold) == (label == 1).
// Ties at the threshold classify as fake.
double compute_acc(const std::vector<double>& scores, const std::vector<int>& labels,
                   double threshold = 0.5);

}  // namespace listenlab
