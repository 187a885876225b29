#include "advoice/metrics.hpp"

#include <cmath>
#include <vector>

#include "advoice/error.hpp"
#include "advoice/prng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using advoice::Prng;
namespace ev = advoice::eval;

TEST_CASE("eer edge cases") {
  // perfectly separable: genuine strictly below imposter
  ev::ScoreSet sep{{0.1, 0.2, 0.3}, {0.5, 0.6, 0.9}};
  CHECK(ev::compute_eer(sep).eer == doctest::Approx(0.0).epsilon(1e-12));

  // identical distributions
  ev::ScoreSet same{{0.0, 1.0}, {0.0, 1.0}};
  CHECK(ev::compute_eer(same).eer == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(ev::compute_eer(ev::ScoreSet{{}, {1.0}}), advoice::ConfigError);
  CHECK_THROWS_AS(ev::compute_eer(ev::ScoreSet{{1.0}, {}}), advoice::ConfigError);
}

TEST_CASE("eer matches the brute-force midpoint sweep on random score sets") {
  Prng g(101, "eer");
  for (int trial = 0; trial < 400; ++trial) {
    const int ng = 1 + static_cast<int>(g.below(50));
    const int ni = 1 + static_cast<int>(g.below(50));
    ev::ScoreSet s;
    const bool ties = trial % 3 == 0;  // coarse grids force repeated values
    for (int i = 0; i < ng; ++i)
      s.genuine.push_back(ties ? static_cast<double>(g.below(8)) : g.uniform(0, 1));
    for (int i = 0; i < ni; ++i)
      s.imposter.push_back(ties ? static_cast<double>(g.below(8)) : g.uniform(0.2, 1.2));
    auto lib = ev::compute_eer(s);
    auto ref = oracle::brute_force_eer(s.genuine, s.imposter);
    CHECK(std::abs(lib.eer - ref.eer) < 1e-9);
    CHECK(lib.eer >= 0.0);
    CHECK(lib.eer <= 1.0);
  }
}

TEST_CASE("threshold sits at the interpolated crossing") {
  ev::ScoreSet s{{0.1, 0.3, 0.35, 0.5}, {0.32, 0.4, 0.45, 0.7}};
  auto r = ev::compute_eer(s);
  // FAR just below the threshold should not exceed the EER, FRR at it should
  // bracket from the other side.
  CHECK(r.eer > 0.0);
  CHECK(r.eer < 1.0);
  CHECK(r.threshold > 0.1);
  CHECK(r.threshold < 0.7);
}

TEST_CASE("far_at counts strict acceptances") {
  std::vector<double> imp{0.1, 0.2, 0.3, 0.4};
  CHECK(ev::far_at(imp, 0.25) == doctest::Approx(0.5));
  CHECK(ev::far_at(imp, 0.1) == doctest::Approx(0.0));
  CHECK(ev::far_at(imp, 10.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ev::far_at({}, 0.5), advoice::ConfigError);
}
