#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"

#include "../src/linalg.hpp"
#include "advoice/error.hpp"
#include "advoice/features.hpp"
#include "advoice/models.hpp"
#include "advoice/prng.hpp"
#include "oracles.hpp"

using namespace advoice;
using features::ExtractorConfig;
using features::FeatureKind;
using features::FeatureMatrix;

namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "advoice_model_tests";
  fs::create_directories(dir);
  return dir / name;
}

FeatureMatrix random_feats(int frames, int coeffs, FeatureKind kind, Prng& rng, double scale = 1.0) {
  FeatureMatrix f(frames, coeffs, kind);
  for (double& v : f.values) v = scale * rng.normal();
  return f;
}

// Small LPMS front end (33 bins) to keep matrix-only tests light.
ExtractorConfig small_lpms_frontend() {
  ExtractorConfig c;
  c.fft_size = 64;
  return c;
}

// MFCC front end with 5 cepstra: raw embedding dimension 10.
ExtractorConfig small_mfcc_frontend() {
  ExtractorConfig c;
  c.n_ceps = 5;
  return c;
}

models::CmModel plain_linear_cm(int dim) {
  models::CmModel m;
  m.frontend = small_lpms_frontend();
  m.input_dim = dim;
  m.hidden_size = 0;
  m.feat_mean.assign(dim, 0.0);
  m.feat_scale.assign(dim, 1.0);
  m.w1.assign(dim, 0.0);
  m.b2 = 0.0;
  m.threshold = 0.0;
  return m;
}

models::AsvModel identity_asv(int n_ceps) {
  models::AsvModel m;
  m.frontend = small_mfcc_frontend();
  m.frontend.n_ceps = n_ceps;
  m.raw_dim = 2 * n_ceps;
  m.projection_dim = 0;
  m.threshold = 0.5;
  return m;
}

// Corpus where the spoof class has a +10 offset in one LPMS bin.
void separable_cm_corpus(int n_per_class, int dim, std::uint64_t seed,
                         std::vector<FeatureMatrix>* feats, std::vector<int>* labels) {
  Prng rng(seed, "cm-corpus");
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const int label = i % 2;
    FeatureMatrix f = random_feats(4, dim, FeatureKind::kLpms, rng);
    if (label == 1) {
      for (int t = 0; t < f.frames; ++t) f.at(t, 3) += 10.0;
    }
    feats->push_back(std::move(f));
    labels->push_back(label);
  }
}

// Speaker clusters: each speaker has a fixed random center, utterances are
// frames of center + noise.
void speaker_corpus(int n_speakers, int utt_per_speaker, int n_ceps, std::uint64_t seed,
                    std::vector<FeatureMatrix>* feats, std::vector<std::string>* speakers) {
  Prng rng(seed, "spk-corpus");
  for (int s = 0; s < n_speakers; ++s) {
    std::vector<double> center(n_ceps);
    for (double& c : center) c = 2.0 * rng.normal();
    for (int u = 0; u < utt_per_speaker; ++u) {
      FeatureMatrix f(12, n_ceps, FeatureKind::kMfcc);
      for (int t = 0; t < f.frames; ++t) {
        for (int k = 0; k < n_ceps; ++k) f.at(t, k) = center[k] + 0.3 * rng.normal();
      }
      feats->push_back(std::move(f));
      speakers->push_back("spk" + std::to_string(s));
    }
  }
}

template <class F>
double fd_entry(F&& phi, FeatureMatrix f, int t, int k, double h) {
  const double orig = f.at(t, k);
  f.at(t, k) = orig + h;
  const double fp = phi(f);
  f.at(t, k) = orig - h;
  const double fm = phi(f);
  return (fp - fm) / (2.0 * h);
}

}  // namespace

TEST_CASE("cm_score: zero weights give the bias for any input") {
  auto m = plain_linear_cm(33);
  m.b2 = 0.73;
  Prng rng(5, "t");
  for (int i = 0; i < 4; ++i) {
    auto f = random_feats(6, 33, FeatureKind::kLpms, rng, 3.0);
    CHECK(models::cm_score(m, f) == 0.73);
  }
}

TEST_CASE("cm_score: one-bin perturbation moves a linear score by w*delta/frames") {
  auto m = plain_linear_cm(33);
  Prng rng(6, "t");
  for (double& w : m.w1) w = rng.normal();
  auto f = random_feats(8, 33, FeatureKind::kLpms, rng);
  const double base = models::cm_score(m, f);
  auto g = f;
  const double delta = 0.37;
  g.at(5, 11) += delta;
  CHECK(models::cm_score(m, g) - base == doctest::Approx(m.w1[11] * delta / 8).epsilon(1e-10));
}

TEST_CASE("cm_score and cm_input_grad reject wrong feature kinds and widths") {
  auto m = plain_linear_cm(33);
  Prng rng(7, "t");
  auto mf = random_feats(6, 33, FeatureKind::kMfcc, rng);
  CHECK_THROWS_AS(models::cm_score(m, mf), ConfigError);
  CHECK_THROWS_AS(models::cm_input_grad(m, mf), ConfigError);
  auto narrow = random_feats(6, 20, FeatureKind::kLpms, rng);
  CHECK_THROWS_AS(models::cm_score(m, narrow), ConfigError);
}

TEST_CASE("cm_input_grad matches finite differences") {
  Prng rng(8, "t");
  const int dim = 33;
  std::vector<FeatureMatrix> feats;
  std::vector<int> labels;
  separable_cm_corpus(10, dim, 42, &feats, &labels);

  models::CmTrainConfig cc;
  cc.epochs = 40;
  for (int hidden : {0, 4}) {
    CAPTURE(hidden);
    cc.hidden_size = hidden;
    auto m = models::train_cm(feats, labels, small_lpms_frontend(), cc);
    auto f = random_feats(5, dim, FeatureKind::kLpms, rng);
    auto g = models::cm_input_grad(m, f);
    std::vector<double> got, want;
    for (int t = 0; t < f.frames; ++t) {
      for (int k = 0; k < f.coeffs; ++k) {
        got.push_back(g.at(t, k));
        want.push_back(
            fd_entry([&](const FeatureMatrix& x) { return models::cm_score(m, x); }, f, t, k,
                     1e-5));
      }
    }
    CHECK(oracle::rel_l2(got, want) < 1e-6);
  }
}

TEST_CASE("cm_input_grad of a linear scorer does not depend on the input point") {
  std::vector<FeatureMatrix> feats;
  std::vector<int> labels;
  separable_cm_corpus(10, 33, 43, &feats, &labels);
  models::CmTrainConfig cc;
  cc.epochs = 20;
  auto m = models::train_cm(feats, labels, small_lpms_frontend(), cc);

  Prng rng(9, "t");
  auto a = random_feats(5, 33, FeatureKind::kLpms, rng);
  auto b = random_feats(5, 33, FeatureKind::kLpms, rng, 7.0);
  auto ga = models::cm_input_grad(m, a);
  auto gb = models::cm_input_grad(m, b);
  CHECK(ga.values == gb.values);

  auto zero = plain_linear_cm(33);
  auto gz = models::cm_input_grad(zero, a);
  for (double v : gz.values) CHECK(v == 0.0);
}

TEST_CASE("train_cm: deterministic, and zero epochs returns data-independent init") {
  std::vector<FeatureMatrix> feats1, feats2;
  std::vector<int> labels1, labels2;
  separable_cm_corpus(8, 33, 44, &feats1, &labels1);
  separable_cm_corpus(8, 33, 45, &feats2, &labels2);

  models::CmTrainConfig cc;
  cc.hidden_size = 3;
  cc.epochs = 15;
  auto a = models::train_cm(feats1, labels1, small_lpms_frontend(), cc);
  auto b = models::train_cm(feats1, labels1, small_lpms_frontend(), cc);
  CHECK(a.w1 == b.w1);
  CHECK(a.b1 == b.b1);
  CHECK(a.w2 == b.w2);
  CHECK(a.b2 == b.b2);
  CHECK(a.threshold == b.threshold);

  cc.epochs = 0;
  auto i1 = models::train_cm(feats1, labels1, small_lpms_frontend(), cc);
  auto i2 = models::train_cm(feats2, labels2, small_lpms_frontend(), cc);
  CHECK(i1.w1 == i2.w1);
  CHECK(i1.b1 == i2.b1);
  CHECK(i1.w2 == i2.w2);
  CHECK(i1.b2 == 0.0);
  CHECK(i1.w1 != a.w1);  // training moved the weights
}

TEST_CASE("train_cm separates an offset-bin corpus") {
  std::vector<FeatureMatrix> feats;
  std::vector<int> labels;
  separable_cm_corpus(30, 33, 46, &feats, &labels);
  models::CmTrainConfig cc;
  auto m = models::train_cm(feats, labels, small_lpms_frontend(), cc);

  double bona_sum = 0.0, spoof_sum = 0.0;
  int bona_n = 0, spoof_n = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const double s = models::cm_score(m, feats[i]);
    if (labels[i] == 0) {
      bona_sum += s;
      ++bona_n;
    } else {
      spoof_sum += s;
      ++spoof_n;
    }
  }
  CHECK(bona_sum / bona_n < spoof_sum / spoof_n);

  std::vector<FeatureMatrix> eval_feats;
  std::vector<int> eval_labels;
  separable_cm_corpus(20, 33, 99, &eval_feats, &eval_labels);
  int correct = 0;
  for (std::size_t i = 0; i < eval_feats.size(); ++i) {
    const bool accept = models::cm_accept(m, models::cm_score(m, eval_feats[i]));
    if (accept == (eval_labels[i] == 0)) ++correct;
  }
  CHECK(static_cast<double>(correct) / eval_feats.size() > 0.95);
}

TEST_CASE("train_cm rejects a single-class corpus") {
  std::vector<FeatureMatrix> feats;
  std::vector<int> labels;
  separable_cm_corpus(6, 33, 47, &feats, &labels);
  std::vector<int> all_bona(labels.size(), 0);
  CHECK_THROWS_AS(models::train_cm(feats, all_bona, small_lpms_frontend(), models::CmTrainConfig{}),
                  ConfigError);
}

TEST_CASE("asv_embed: constant frames give exactly zero std and exact mean") {
  auto m = identity_asv(4);
  FeatureMatrix f(7, 4, FeatureKind::kMfcc);
  const double vals[4] = {0.1, -2.7, 3.3, 1.0 / 3.0};
  for (int t = 0; t < 7; ++t) {
    for (int k = 0; k < 4; ++k) f.at(t, k) = vals[k];
  }
  auto e = models::asv_embed(m, f);
  REQUIRE(e.size() == 8);
  for (int k = 0; k < 4; ++k) {
    CHECK(e[k] == vals[k]);
    CHECK(e[4 + k] == 0.0);
  }
}

TEST_CASE("asv_embed is invariant under frame permutation") {
  auto m = identity_asv(5);
  Prng rng(11, "t");
  auto f = random_feats(9, 5, FeatureKind::kMfcc, rng);
  FeatureMatrix p(9, 5, FeatureKind::kMfcc);
  const int perm[9] = {4, 7, 0, 8, 2, 6, 1, 3, 5};
  for (int t = 0; t < 9; ++t) {
    for (int k = 0; k < 5; ++k) p.at(t, k) = f.at(perm[t], k);
  }
  auto ef = models::asv_embed(m, f);
  auto ep = models::asv_embed(m, p);
  for (std::size_t i = 0; i < ef.size(); ++i) {
    CHECK(ef[i] == doctest::Approx(ep[i]).epsilon(1e-12));
  }
}

TEST_CASE("asv_embed matches a plain two-pass mean/std oracle") {
  auto m = identity_asv(6);
  Prng rng(12, "t");
  auto f = random_feats(14, 6, FeatureKind::kMfcc, rng, 2.5);
  auto e = models::asv_embed(m, f);
  for (int k = 0; k < 6; ++k) {
    double mean = 0.0;
    for (int t = 0; t < 14; ++t) mean += f.at(t, k);
    mean /= 14;
    double var = 0.0;
    for (int t = 0; t < 14; ++t) var += (f.at(t, k) - mean) * (f.at(t, k) - mean);
    const double sd = std::sqrt(var / 14);
    CHECK(e[k] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(e[6 + k] == doctest::Approx(sd).epsilon(1e-12));
  }
}

TEST_CASE("asv_embed input validation") {
  auto m = identity_asv(5);
  Prng rng(13, "t");
  auto one_frame = random_feats(1, 5, FeatureKind::kMfcc, rng);
  CHECK_THROWS_AS(models::asv_embed(m, one_frame), ConfigError);
  auto lpms = random_feats(6, 5, FeatureKind::kLpms, rng);
  CHECK_THROWS_AS(models::asv_embed(m, lpms), ConfigError);
  auto wide = random_feats(6, 7, FeatureKind::kMfcc, rng);
  CHECK_THROWS_AS(models::asv_embed(m, wide), ConfigError);
}

TEST_CASE("asv_loss: self-similarity is exactly zero, orthogonal embeddings give one") {
  auto m = identity_asv(5);
  Prng rng(14, "t");
  auto f = random_feats(8, 5, FeatureKind::kMfcc, rng);
  CHECK(models::asv_loss(m, f, f) == 0.0);

  // Constant frames: embedding is [mean; 0]. Disjoint nonzero coefficients
  // make the two embeddings exactly orthogonal.
  FeatureMatrix a(4, 5, FeatureKind::kMfcc), b(4, 5, FeatureKind::kMfcc);
  for (int t = 0; t < 4; ++t) {
    a.at(t, 0) = 1.0;
    b.at(t, 1) = 1.0;
  }
  CHECK(models::asv_loss(m, a, b) == 1.0);

  FeatureMatrix zero(4, 5, FeatureKind::kMfcc);
  CHECK_THROWS_AS(models::asv_loss(m, zero, f), ConfigError);
  CHECK_THROWS_AS(models::asv_loss(m, zero, zero), ConfigError);
}

TEST_CASE("asv_loss_grad matches finite differences, identity and trained projection") {
  Prng rng(15, "t");

  auto check_grad = [&](const models::AsvModel& m, int n_ceps) {
    auto x = random_feats(6, n_ceps, FeatureKind::kMfcc, rng);
    auto y = random_feats(6, n_ceps, FeatureKind::kMfcc, rng);
    auto g = models::asv_loss_grad(m, x, y);
    std::vector<double> got, want;
    for (int t = 0; t < x.frames; ++t) {
      for (int k = 0; k < x.coeffs; ++k) {
        got.push_back(g.at(t, k));
        want.push_back(fd_entry(
            [&](const FeatureMatrix& f) { return models::asv_loss(m, f, y); }, x, t, k, 1e-5));
      }
    }
    CHECK(oracle::rel_l2(got, want) < 1e-5);
  };

  check_grad(identity_asv(5), 5);

  std::vector<FeatureMatrix> feats;
  std::vector<std::string> speakers;
  speaker_corpus(4, 10, 5, 77, &feats, &speakers);
  models::AsvTrainConfig ac;
  ac.projection_dim = 6;
  auto trained = models::train_asv(feats, speakers, small_mfcc_frontend(), ac);
  REQUIRE(trained.projection_dim == 6);
  check_grad(trained, 5);
}

TEST_CASE("train_asv: deterministic, whitened spread, speaker separation") {
  std::vector<FeatureMatrix> feats;
  std::vector<std::string> speakers;
  speaker_corpus(4, 50, 5, 78, &feats, &speakers);

  models::AsvTrainConfig ac;
  ac.projection_dim = 6;
  auto m1 = models::train_asv(feats, speakers, small_mfcc_frontend(), ac);
  auto m2 = models::train_asv(feats, speakers, small_mfcc_frontend(), ac);
  CHECK(m1.proj == m2.proj);
  CHECK(m1.proj_mean == m2.proj_mean);
  CHECK(m1.threshold == m2.threshold);
  CHECK(std::isfinite(m1.threshold));

  // Whitening sanity: over the whole corpus, projected coordinates should be
  // roughly unit variance and weakly correlated (train/held halves are drawn
  // from the same distribution, so wide statistical tolerances suffice).
  const int d = m1.projection_dim;
  std::vector<std::vector<double>> emb;
  for (const auto& f : feats) emb.push_back(models::asv_embed(m1, f));
  std::vector<double> mu(d, 0.0);
  for (const auto& e : emb) {
    for (int i = 0; i < d; ++i) mu[i] += e[i];
  }
  for (double& x : mu) x /= emb.size();
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      double c = 0.0;
      for (const auto& e : emb) c += (e[i] - mu[i]) * (e[j] - mu[j]);
      c /= emb.size();
      if (i == j) {
        CHECK(c > 0.5);
        CHECK(c < 2.0);
      } else {
        CHECK(std::abs(c) < 0.5);
      }
    }
  }

  // Cross-speaker losses exceed same-speaker losses in at least 90% of random
  // trial pairs.
  Prng rng(16, "t");
  int wins = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    const auto a = rng.below(feats.size());
    auto b = rng.below(feats.size());
    while (speakers[b] != speakers[a] || b == a) b = rng.below(feats.size());
    auto c = rng.below(feats.size());
    while (speakers[c] == speakers[a]) c = rng.below(feats.size());
    const double same = models::asv_loss(m1, feats[a], feats[b]);
    const double cross = models::asv_loss(m1, feats[a], feats[c]);
    if (cross > same) ++wins;
  }
  CHECK(static_cast<double>(wins) / trials >= 0.9);
}

TEST_CASE("train_asv rejects a one-speaker corpus") {
  std::vector<FeatureMatrix> feats;
  std::vector<std::string> speakers;
  speaker_corpus(1, 8, 5, 79, &feats, &speakers);
  CHECK_THROWS_AS(models::train_asv(feats, speakers, small_mfcc_frontend(), models::AsvTrainConfig{}),
                  ConfigError);
}

TEST_CASE("jacobi_eigh: eigenpairs of a random symmetric matrix") {
  const int n = 12;
  Prng rng(17, "t");
  std::vector<double> a(n * n);
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      const double v = rng.normal();
      a[r * n + c] = v;
      a[c * n + r] = v;
    }
  }
  auto eig = linalg::jacobi_eigh(n, a);
  for (int i = 0; i + 1 < n; ++i) CHECK(eig.values[i] >= eig.values[i + 1]);
  for (int i = 0; i < n; ++i) {
    // A v = lambda v
    for (int r = 0; r < n; ++r) {
      double av = 0.0;
      for (int c = 0; c < n; ++c) av += a[r * n + c] * eig.vectors[i * n + c];
      CHECK(av == doctest::Approx(eig.values[i] * eig.vectors[i * n + r]).epsilon(1e-9).scale(1.0));
    }
    // Orthonormal rows.
    for (int j = i; j < n; ++j) {
      double dot = 0.0;
      for (int c = 0; c < n; ++c) dot += eig.vectors[i * n + c] * eig.vectors[j * n + c];
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("voiceprint store: enroll, duplicates, unknown users") {
  auto asv = identity_asv(20);
  asv.frontend = ExtractorConfig{};  // real MFCC front end
  asv.raw_dim = 40;
  asv.threshold = 1e-300;

  Prng rng(18, "t");
  signal::Waveform w{{}, signal::kCanonicalRateHz};
  w.samples.resize(3200);
  for (double& s : w.samples) s = 0.1 * rng.normal();

  models::VoiceprintStore store;
  store.enroll("alice", w, asv);
  CHECK(store.contains("alice"));
  CHECK(store.size() == 1);
  CHECK_THROWS_AS(store.enroll("alice", w, asv), ConfigError);
  store.enroll("alice", w, asv, /*overwrite=*/true);
  CHECK(store.size() == 1);
  CHECK_THROWS_AS(store.at("bob"), ConfigError);

  // The enrollment waveform itself is accepted at any positive threshold:
  // the self cosine loss is exactly zero.
  auto cm = plain_linear_cm(257);
  cm.frontend = ExtractorConfig{};
  cm.threshold = 1.0;
  auto v = models::decide(asv, cm, store, "alice", w);
  CHECK(v.asv_score == 0.0);
  CHECK(v.asv_accept);
  CHECK_THROWS_AS(models::decide(asv, cm, store, "bob", w), ConfigError);
}

TEST_CASE("decide: deterministic verdicts, conjunction, threshold monotonicity") {
  auto asv = identity_asv(20);
  asv.frontend = ExtractorConfig{};
  asv.raw_dim = 40;
  asv.threshold = 0.5;

  auto cm = plain_linear_cm(257);
  cm.frontend = ExtractorConfig{};

  Prng rng(19, "t");
  signal::Waveform enroll_w{{}, signal::kCanonicalRateHz};
  enroll_w.samples.resize(3200);
  for (double& s : enroll_w.samples) s = 0.1 * rng.normal();
  signal::Waveform probe{{}, signal::kCanonicalRateHz};
  probe.samples.resize(3200);
  for (double& s : probe.samples) s = 0.1 * rng.normal();

  models::VoiceprintStore store;
  store.enroll("u", enroll_w, asv);

  auto v1 = models::decide(asv, cm, store, "u", probe);
  auto v2 = models::decide(asv, cm, store, "u", probe);
  CHECK(v1.asv_score == v2.asv_score);
  CHECK(v1.cm_score == v2.cm_score);
  CHECK(v1.asv_accept == v2.asv_accept);
  CHECK(v1.cm_accept == v2.cm_accept);

  // CM rejects (score 0 is not < -1) so the joint verdict is false even when
  // ASV accepts.
  cm.threshold = -1.0;
  asv.threshold = 1e9;
  auto rej = models::decide(asv, cm, store, "u", probe);
  CHECK(rej.asv_accept);
  CHECK_FALSE(rej.cm_accept);
  CHECK_FALSE(rej.joint_accept());

  // Raising the CM threshold never flips an accept to a reject.
  bool prev_accept = false;
  for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    cm.threshold = t;
    const bool acc = models::decide(asv, cm, store, "u", probe).cm_accept;
    if (prev_accept) CHECK(acc);
    prev_accept = acc;
  }
}

TEST_CASE("model persistence round-trips scores bitwise and validates records") {
  std::vector<FeatureMatrix> cm_feats;
  std::vector<int> cm_labels;
  separable_cm_corpus(10, 33, 48, &cm_feats, &cm_labels);
  models::CmTrainConfig cc;
  cc.hidden_size = 3;
  cc.epochs = 25;
  auto cm = models::train_cm(cm_feats, cm_labels, small_lpms_frontend(), cc);

  std::vector<FeatureMatrix> asv_feats;
  std::vector<std::string> asv_speakers;
  speaker_corpus(3, 10, 5, 80, &asv_feats, &asv_speakers);
  models::AsvTrainConfig ac;
  ac.projection_dim = 4;
  auto asv = models::train_asv(asv_feats, asv_speakers, small_mfcc_frontend(), ac);

  const auto cm_path = temp_file("cm.json");
  const auto asv_path = temp_file("asv.json");
  models::save_cm(cm, cm_path);
  models::save_asv(asv, asv_path);
  auto cm2 = models::load_cm(cm_path);
  auto asv2 = models::load_asv(asv_path);

  Prng rng(20, "t");
  auto lf = random_feats(6, 33, FeatureKind::kLpms, rng);
  CHECK(models::cm_score(cm, lf) == models::cm_score(cm2, lf));
  CHECK(cm2.threshold == cm.threshold);
  CHECK(cm2.frontend.fft_size == 64);
  auto mx = random_feats(6, 5, FeatureKind::kMfcc, rng);
  auto my = random_feats(6, 5, FeatureKind::kMfcc, rng);
  CHECK(models::asv_loss(asv, mx, my) == models::asv_loss(asv2, mx, my));

  CHECK_THROWS_AS(models::load_cm(asv_path), FormatError);   // wrong type
  CHECK_THROWS_AS(models::load_asv(cm_path), FormatError);

  const auto bad_version = temp_file("bad_version.json");
  {
    std::ofstream out(bad_version);
    out << "{\"format_version\": 99, \"model_type\": \"cm\"}\n";
  }
  CHECK_THROWS_AS(models::load_cm(bad_version), FormatError);

  const auto garbage = temp_file("garbage.json");
  {
    std::ofstream out(garbage);
    out << "not json at all{{{\n";
  }
  CHECK_THROWS_AS(models::load_cm(garbage), FormatError);
  CHECK_THROWS_AS(models::load_cm(temp_file("missing.json")), IoError);
}
