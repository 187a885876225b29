#pragma once

#include <vector>

namespace advoice::eval {

// Scores where LOWER means accept: genuine trials should fall below the
// threshold, imposter trials above.
struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> imposter;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Equal error rate with linear interpolation between the two adjacent ROC
// operating points where FAR - FRR changes sign. Accept rule: score < t, so
// FAR(t) = |{imposter < t}| / |imposter| and FRR(t) = |{genuine >= t}| / |genuine|.
EerResult compute_eer(const ScoreSet& scores);

// Fraction of imposter scores accepted at the threshold.
double far_at(const std::vector<double>& imposter_scores, double threshold);

}  // namespace advoice::eval
