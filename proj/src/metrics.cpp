#include "advoice/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "advoice/error.hpp"

namespace advoice::eval {

EerResult compute_eer(const ScoreSet& scores) {
  if (scores.genuine.empty() || scores.imposter.empty())
    throw ConfigError("compute_eer: both genuine and imposter scores are required");

  std::vector<double> gen = scores.genuine;
  std::vector<double> imp = scores.imposter;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());

  std::vector<double> cand;
  cand.reserve(gen.size() + imp.size() + 1);
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(cand));
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  cand.push_back(cand.back() + 1.0);  // accept-everything endpoint

  auto far_of = [&](double t) {
    return static_cast<double>(std::lower_bound(imp.begin(), imp.end(), t) - imp.begin()) / ni;
  };
  auto frr_of = [&](double t) {
    return static_cast<double>(gen.end() - std::lower_bound(gen.begin(), gen.end(), t)) / ng;
  };

  // FAR - FRR rises from -1 to +1 as the threshold sweeps upward; find the
  // first operating point at or past the sign change and interpolate with
  // its predecessor.
  double t1 = cand.front();
  double fa1 = far_of(t1), fr1 = frr_of(t1);
  for (std::size_t i = 1; i < cand.size(); ++i) {
    const double t2 = cand[i];
    const double fa2 = far_of(t2), fr2 = frr_of(t2);
    if (fa2 - fr2 >= 0.0) {
      const double rise = (fr1 - fa1) + (fa2 - fr2);
      const double s = rise > 0.0 ? (fr1 - fa1) / rise : 0.0;
      EerResult res;
      res.eer = fa1 + s * (fa2 - fa1);
      res.threshold = t1 + s * (t2 - t1);
      return res;
    }
    t1 = t2;
    fa1 = fa2;
    fr1 = fr2;
  }
  // Unreachable: the appended endpoint has FAR 1, FRR 0.
  return EerResult{0.5, cand.back()};
}

double far_at(const std::vector<double>& imposter_scores, double threshold) {
  if (imposter_scores.empty()) throw ConfigError("far_at: empty imposter scores");
  std::size_t n = 0;
  for (double s : imposter_scores)
    if (s < threshold) ++n;
  return static_cast<double>(n) / static_cast<double>(imposter_scores.size());
}

}  // namespace advoice::eval
