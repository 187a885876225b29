#include "advoice/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "advoice/error.hpp"
#include "advoice/metrics.hpp"
#include "advoice/prng.hpp"
#include "linalg.hpp"

namespace advoice::models {

using features::ExtractorConfig;
using features::FeatureKind;
using features::FeatureMatrix;
using json = nlohmann::json;

namespace {

std::vector<double> mean_pool(const FeatureMatrix& feats) {
  std::vector<double> out(feats.coeffs, 0.0);
  for (int t = 0; t < feats.frames; ++t) {
    for (int k = 0; k < feats.coeffs; ++k) out[k] += feats.at(t, k);
  }
  for (double& x : out) x /= feats.frames;
  return out;
}

void shuffle_indices(std::vector<int>& idx, Prng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.below(i)]);
  }
}

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// Standardized pooled vector for one example.
std::vector<double> standardize(const CmModel& m, const std::vector<double>& pooled) {
  std::vector<double> z(pooled.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    z[k] = (pooled[k] - m.feat_mean[k]) * m.feat_scale[k];
  }
  return z;
}

double score_standardized(const CmModel& m, const std::vector<double>& z,
                          std::vector<double>* hidden_out = nullptr) {
  if (m.hidden_size == 0) {
    double s = m.b2;
    for (int k = 0; k < m.input_dim; ++k) s += m.w1[k] * z[k];
    return s;
  }
  std::vector<double> h(m.hidden_size);
  for (int j = 0; j < m.hidden_size; ++j) {
    double a = m.b1[j];
    const double* row = &m.w1[static_cast<std::size_t>(j) * m.input_dim];
    for (int k = 0; k < m.input_dim; ++k) a += row[k] * z[k];
    h[j] = std::tanh(a);
  }
  double s = m.b2;
  for (int j = 0; j < m.hidden_size; ++j) s += m.w2[j] * h[j];
  if (hidden_out) *hidden_out = std::move(h);
  return s;
}

// d(score)/dz for a standardized input.
std::vector<double> score_grad_z(const CmModel& m, const std::vector<double>& z) {
  std::vector<double> dz(m.input_dim, 0.0);
  if (m.hidden_size == 0) {
    for (int k = 0; k < m.input_dim; ++k) dz[k] = m.w1[k];
    return dz;
  }
  std::vector<double> h;
  score_standardized(m, z, &h);
  for (int j = 0; j < m.hidden_size; ++j) {
    const double da = m.w2[j] * (1.0 - h[j] * h[j]);
    const double* row = &m.w1[static_cast<std::size_t>(j) * m.input_dim];
    for (int k = 0; k < m.input_dim; ++k) dz[k] += da * row[k];
  }
  return dz;
}

void require_kind(const FeatureMatrix& f, FeatureKind kind, const char* what) {
  if (f.kind != kind) {
    throw ConfigError(std::string(what) + ": wrong feature kind");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Countermeasure
// ---------------------------------------------------------------------------

double cm_score(const CmModel& m, const FeatureMatrix& feats) {
  require_kind(feats, FeatureKind::kLpms, "cm_score");
  if (feats.coeffs != m.input_dim) {
    throw ConfigError("cm_score: feature width does not match model input_dim");
  }
  if (feats.frames < 1) throw ConfigError("cm_score: empty feature matrix");
  return score_standardized(m, standardize(m, mean_pool(feats)));
}

FeatureMatrix cm_input_grad(const CmModel& m, const FeatureMatrix& feats) {
  require_kind(feats, FeatureKind::kLpms, "cm_input_grad");
  if (feats.coeffs != m.input_dim) {
    throw ConfigError("cm_input_grad: feature width does not match model input_dim");
  }
  if (feats.frames < 1) throw ConfigError("cm_input_grad: empty feature matrix");
  const std::vector<double> dz = score_grad_z(m, standardize(m, mean_pool(feats)));
  FeatureMatrix grad(feats.frames, feats.coeffs, FeatureKind::kLpms);
  for (int k = 0; k < feats.coeffs; ++k) {
    const double g = dz[k] * m.feat_scale[k] / feats.frames;
    for (int t = 0; t < feats.frames; ++t) grad.at(t, k) = g;
  }
  return grad;
}

CmModel train_cm(const std::vector<FeatureMatrix>& lpms, const std::vector<int>& labels,
                 const ExtractorConfig& frontend, const CmTrainConfig& cfg) {
  if (lpms.size() != labels.size()) throw ConfigError("train_cm: feats/labels size mismatch");
  if (lpms.empty()) throw ConfigError("train_cm: empty corpus");
  if (cfg.epochs < 0 || cfg.learning_rate <= 0.0 || cfg.hidden_size < 0 || cfg.l2 < 0.0) {
    throw ConfigError("train_cm: bad hyperparameters");
  }
  if (!(cfg.heldout_fraction > 0.0 && cfg.heldout_fraction < 1.0)) {
    throw ConfigError("train_cm: heldout_fraction must be in (0, 1)");
  }
  const int dim = frontend.bins();
  std::vector<int> bona, spoof;
  for (std::size_t i = 0; i < lpms.size(); ++i) {
    require_kind(lpms[i], FeatureKind::kLpms, "train_cm");
    if (lpms[i].coeffs != dim) throw ConfigError("train_cm: feature width mismatch");
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("train_cm: labels must be 0 or 1");
    (labels[i] == 0 ? bona : spoof).push_back(static_cast<int>(i));
  }
  if (bona.empty() || spoof.empty()) {
    throw ConfigError("train_cm: single-class corpus (needs bonafide and spoof)");
  }
  if (bona.size() < 2 || spoof.size() < 2) {
    throw ConfigError("train_cm: each class needs at least 2 examples for a held-out split");
  }

  std::vector<std::vector<double>> pooled(lpms.size());
  for (std::size_t i = 0; i < lpms.size(); ++i) {
    if (lpms[i].frames < 1) throw ConfigError("train_cm: empty feature matrix");
    pooled[i] = mean_pool(lpms[i]);
  }

  Prng root(cfg.seed, "cm-train");
  Prng split_rng = root.substream("split");
  std::vector<int> train_idx, held_idx;
  for (std::vector<int>* cls : {&bona, &spoof}) {
    shuffle_indices(*cls, split_rng);
    const auto n = static_cast<long>(cls->size());
    long held = std::lround(cfg.heldout_fraction * static_cast<double>(n));
    held = std::clamp(held, 1L, n - 1);
    for (long i = 0; i < n; ++i) {
      (i < held ? held_idx : train_idx).push_back((*cls)[i]);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(held_idx.begin(), held_idx.end());

  CmModel m;
  m.frontend = frontend;
  m.input_dim = dim;
  m.hidden_size = cfg.hidden_size;
  m.feat_mean.assign(dim, 0.0);
  m.feat_scale.assign(dim, 1.0);
  for (int i : train_idx) {
    for (int k = 0; k < dim; ++k) m.feat_mean[k] += pooled[i][k];
  }
  for (double& x : m.feat_mean) x /= train_idx.size();
  std::vector<double> var(dim, 0.0);
  for (int i : train_idx) {
    for (int k = 0; k < dim; ++k) {
      const double d = pooled[i][k] - m.feat_mean[k];
      var[k] += d * d;
    }
  }
  for (int k = 0; k < dim; ++k) {
    m.feat_scale[k] = 1.0 / std::sqrt(var[k] / train_idx.size() + 1e-8);
  }

  // Weight init: zeros for the convex linear case, symmetric uniform for the
  // hidden layer. Depends only on the seed, never on the data.
  Prng init_rng = root.substream("init");
  if (cfg.hidden_size == 0) {
    m.w1.assign(dim, 0.0);
  } else {
    const double a1 = std::sqrt(6.0 / (dim + cfg.hidden_size));
    m.w1.resize(static_cast<std::size_t>(cfg.hidden_size) * dim);
    for (double& w : m.w1) w = init_rng.uniform(-a1, a1);
    m.b1.assign(cfg.hidden_size, 0.0);
    const double a2 = std::sqrt(6.0 / (cfg.hidden_size + 1));
    m.w2.resize(cfg.hidden_size);
    for (double& w : m.w2) w = init_rng.uniform(-a2, a2);
  }
  m.b2 = 0.0;

  std::vector<std::vector<double>> z_train;
  z_train.reserve(train_idx.size());
  for (int i : train_idx) z_train.push_back(standardize(m, pooled[i]));

  const double inv_n = 1.0 / static_cast<double>(train_idx.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<double> gw1(m.w1.size(), 0.0), gb1(m.b1.size(), 0.0), gw2(m.w2.size(), 0.0);
    double gb2 = 0.0;
    for (std::size_t e = 0; e < z_train.size(); ++e) {
      const std::vector<double>& z = z_train[e];
      const double y = labels[train_idx[e]];
      if (m.hidden_size == 0) {
        const double ds = (sigmoid(score_standardized(m, z)) - y) * inv_n;
        for (int k = 0; k < dim; ++k) gw1[k] += ds * z[k];
        gb2 += ds;
      } else {
        std::vector<double> h;
        const double ds = (sigmoid(score_standardized(m, z, &h)) - y) * inv_n;
        for (int j = 0; j < m.hidden_size; ++j) {
          gw2[j] += ds * h[j];
          const double da = ds * m.w2[j] * (1.0 - h[j] * h[j]);
          gb1[j] += da;
          double* row = &gw1[static_cast<std::size_t>(j) * dim];
          for (int k = 0; k < dim; ++k) row[k] += da * z[k];
        }
        gb2 += ds;
      }
    }
    for (std::size_t k = 0; k < m.w1.size(); ++k) {
      m.w1[k] -= cfg.learning_rate * (gw1[k] + cfg.l2 * m.w1[k]);
    }
    for (std::size_t j = 0; j < m.w2.size(); ++j) {
      m.w2[j] -= cfg.learning_rate * (gw2[j] + cfg.l2 * m.w2[j]);
    }
    for (std::size_t j = 0; j < m.b1.size(); ++j) m.b1[j] -= cfg.learning_rate * gb1[j];
    m.b2 -= cfg.learning_rate * gb2;
  }

  eval::ScoreSet held;
  for (int i : held_idx) {
    const double s = score_standardized(m, standardize(m, pooled[i]));
    (labels[i] == 0 ? held.genuine : held.imposter).push_back(s);
  }
  const eval::EerResult eer = eval::compute_eer(held);
  m.threshold = eer.threshold;
  m.training_eer = eer.eer;
  return m;
}

// ---------------------------------------------------------------------------
// Speaker verification
// ---------------------------------------------------------------------------

namespace {

// Raw statistics vector [mean; std] with a first-frame pivot so that
// constant-over-frames input produces an exactly zero std half.
std::vector<double> raw_embedding(const FeatureMatrix& feats) {
  const int T = feats.frames;
  const int C = feats.coeffs;
  std::vector<double> raw(2 * static_cast<std::size_t>(C));
  for (int k = 0; k < C; ++k) {
    const double pivot = feats.at(0, k);
    double acc = 0.0;
    for (int t = 0; t < T; ++t) acc += feats.at(t, k) - pivot;
    const double mean_dev = acc / T;
    double var = 0.0;
    for (int t = 0; t < T; ++t) {
      const double d = (feats.at(t, k) - pivot) - mean_dev;
      var += d * d;
    }
    raw[k] = pivot + mean_dev;
    raw[C + k] = std::sqrt(var / T);
  }
  return raw;
}

std::vector<double> project(const AsvModel& m, const std::vector<double>& raw) {
  if (m.projection_dim == 0) return raw;
  std::vector<double> e(m.projection_dim, 0.0);
  for (int i = 0; i < m.projection_dim; ++i) {
    const double* row = &m.proj[static_cast<std::size_t>(i) * m.raw_dim];
    double acc = 0.0;
    for (int k = 0; k < m.raw_dim; ++k) acc += row[k] * (raw[k] - m.proj_mean[k]);
    e[i] = acc;
  }
  return e;
}

void check_asv_input(const AsvModel& m, const FeatureMatrix& f, const char* what) {
  require_kind(f, FeatureKind::kMfcc, what);
  if (f.frames < 2) {
    throw ConfigError(std::string(what) + ": needs at least 2 frames (std undefined)");
  }
  if (2 * f.coeffs != m.raw_dim) {
    throw ConfigError(std::string(what) + ": feature width does not match model raw_dim");
  }
}

}  // namespace

std::vector<double> asv_embed(const AsvModel& m, const FeatureMatrix& feats) {
  check_asv_input(m, feats, "asv_embed");
  return project(m, raw_embedding(feats));
}

double cosine_loss(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("cosine_loss: dimension mismatch");
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    dot += a[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ConfigError("cosine_loss: zero-norm embedding");
  if (a == b) return 0.0;  // self-similarity holds exactly
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double asv_loss(const AsvModel& m, const FeatureMatrix& x, const FeatureMatrix& y) {
  check_asv_input(m, x, "asv_loss");
  check_asv_input(m, y, "asv_loss");
  return cosine_loss(asv_embed(m, x), asv_embed(m, y));
}

FeatureMatrix asv_loss_grad(const AsvModel& m, const FeatureMatrix& x, const FeatureMatrix& y) {
  check_asv_input(m, x, "asv_loss_grad");
  check_asv_input(m, y, "asv_loss_grad");
  const int T = x.frames;
  const int C = x.coeffs;
  const std::vector<double> raw = raw_embedding(x);
  const std::vector<double> ex = project(m, raw);
  const std::vector<double> ey = asv_embed(m, y);

  double nx2 = 0.0, ny2 = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    nx2 += ex[i] * ex[i];
    ny2 += ey[i] * ey[i];
    dot += ex[i] * ey[i];
  }
  if (nx2 == 0.0 || ny2 == 0.0) throw ConfigError("asv_loss_grad: zero-norm embedding");
  const double nx = std::sqrt(nx2);
  const double ny = std::sqrt(ny2);
  const double cosv = dot / (nx * ny);

  // loss = 1 - cos, so dloss/dex_i = -(ey_i / (nx*ny) - cos * ex_i / nx^2).
  std::vector<double> de(ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    de[i] = -(ey[i] / (nx * ny) - cosv * ex[i] / nx2);
  }

  std::vector<double> draw(m.raw_dim, 0.0);
  if (m.projection_dim == 0) {
    draw = de;
  } else {
    for (int i = 0; i < m.projection_dim; ++i) {
      const double* row = &m.proj[static_cast<std::size_t>(i) * m.raw_dim];
      for (int k = 0; k < m.raw_dim; ++k) draw[k] += de[i] * row[k];
    }
  }

  FeatureMatrix grad(T, C, FeatureKind::kMfcc);
  for (int k = 0; k < C; ++k) {
    const double mean_k = raw[k];
    const double std_k = raw[C + k];
    const double dmean = draw[k] / T;
    for (int t = 0; t < T; ++t) {
      double g = dmean;
      if (std_k > 0.0) {
        g += draw[C + k] * (x.at(t, k) - mean_k) / (T * std_k);
      }
      grad.at(t, k) = g;
    }
  }
  return grad;
}

AsvModel train_asv(const std::vector<FeatureMatrix>& mfcc, const std::vector<std::string>& speakers,
                   const ExtractorConfig& frontend, const AsvTrainConfig& cfg) {
  if (mfcc.size() != speakers.size()) throw ConfigError("train_asv: feats/speakers size mismatch");
  if (mfcc.empty()) throw ConfigError("train_asv: empty corpus");
  if (!(cfg.heldout_fraction > 0.0 && cfg.heldout_fraction < 1.0)) {
    throw ConfigError("train_asv: heldout_fraction must be in (0, 1)");
  }
  if (cfg.max_trials < 1) throw ConfigError("train_asv: max_trials must be >= 1");
  const int raw_dim = 2 * frontend.n_ceps;
  if (cfg.projection_dim < 0 || cfg.projection_dim > raw_dim) {
    throw ConfigError("train_asv: projection_dim must be in [0, 2*n_ceps]");
  }
  if (cfg.drop_energy && cfg.projection_dim > 0) {
    throw ConfigError("train_asv: drop_energy and projection_dim are mutually exclusive");
  }

  AsvModel m;
  m.frontend = frontend;
  m.raw_dim = raw_dim;
  m.projection_dim = 0;  // raw embeddings first; projection fitted below

  std::vector<std::vector<double>> raw(mfcc.size());
  for (std::size_t i = 0; i < mfcc.size(); ++i) {
    check_asv_input(m, mfcc[i], "train_asv");
    raw[i] = raw_embedding(mfcc[i]);
  }

  std::map<std::string, std::vector<int>> by_speaker;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    by_speaker[speakers[i]].push_back(static_cast<int>(i));
  }
  if (by_speaker.size() < 2) throw ConfigError("train_asv: needs at least 2 speakers");

  Prng root(cfg.seed, "asv-train");
  Prng split_rng = root.substream("split");
  std::vector<int> train_idx, held_idx;
  for (auto& [spk, idx] : by_speaker) {
    shuffle_indices(idx, split_rng);
    const auto n = static_cast<long>(idx.size());
    long held = (n >= 2) ? std::clamp(std::lround(cfg.heldout_fraction * static_cast<double>(n)),
                                      1L, n - 1)
                         : 0;
    for (long i = 0; i < n; ++i) (i < held ? held_idx : train_idx).push_back(idx[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(held_idx.begin(), held_idx.end());

  if (cfg.projection_dim > 0) {
    if (train_idx.size() < 2) {
      throw ConfigError("train_asv: projection needs at least 2 training utterances");
    }
    std::vector<double> mu(raw_dim, 0.0);
    for (int i : train_idx) {
      for (int k = 0; k < raw_dim; ++k) mu[k] += raw[i][k];
    }
    for (double& x : mu) x /= train_idx.size();
    std::vector<double> cov(static_cast<std::size_t>(raw_dim) * raw_dim, 0.0);
    for (int i : train_idx) {
      for (int r = 0; r < raw_dim; ++r) {
        const double dr = raw[i][r] - mu[r];
        for (int c = r; c < raw_dim; ++c) {
          cov[static_cast<std::size_t>(r) * raw_dim + c] += dr * (raw[i][c] - mu[c]);
        }
      }
    }
    for (int r = 0; r < raw_dim; ++r) {
      for (int c = r; c < raw_dim; ++c) {
        const double v = cov[static_cast<std::size_t>(r) * raw_dim + c] / train_idx.size();
        cov[static_cast<std::size_t>(r) * raw_dim + c] = v;
        cov[static_cast<std::size_t>(c) * raw_dim + r] = v;
      }
    }
    const linalg::Eigh eig = linalg::jacobi_eigh(raw_dim, cov);
    m.projection_dim = cfg.projection_dim;
    m.proj_mean = mu;
    m.proj.resize(static_cast<std::size_t>(cfg.projection_dim) * raw_dim);
    for (int i = 0; i < cfg.projection_dim; ++i) {
      const double scale = 1.0 / std::sqrt(std::max(eig.values[i], 0.0) + 1e-8);
      for (int k = 0; k < raw_dim; ++k) {
        m.proj[static_cast<std::size_t>(i) * raw_dim + k] =
            scale * eig.vectors[static_cast<std::size_t>(i) * raw_dim + k];
      }
    }
  } else if (cfg.drop_energy) {
    // Fixed selection matrix keeping every raw dimension except the mean and
    // std of coefficient 0 (raw indices 0 and n_ceps).
    const int C = frontend.n_ceps;
    m.projection_dim = raw_dim - 2;
    m.proj_mean.assign(static_cast<std::size_t>(raw_dim), 0.0);
    m.proj.assign(static_cast<std::size_t>(m.projection_dim) * raw_dim, 0.0);
    int out = 0;
    for (int k = 0; k < raw_dim; ++k) {
      if (k == 0 || k == C) continue;
      m.proj[static_cast<std::size_t>(out) * raw_dim + k] = 1.0;
      ++out;
    }
  }

  std::vector<std::vector<double>> held_emb;
  held_emb.reserve(held_idx.size());
  for (int i : held_idx) held_emb.push_back(project(m, raw[i]));

  std::vector<std::pair<int, int>> genuine_pairs, imposter_pairs;
  for (std::size_t a = 0; a < held_idx.size(); ++a) {
    for (std::size_t b = a + 1; b < held_idx.size(); ++b) {
      const bool same = speakers[held_idx[a]] == speakers[held_idx[b]];
      (same ? genuine_pairs : imposter_pairs).emplace_back(static_cast<int>(a),
                                                           static_cast<int>(b));
    }
  }
  if (genuine_pairs.empty() || imposter_pairs.empty()) {
    throw ConfigError("train_asv: held-out split lacks same-speaker or cross-speaker trials");
  }
  Prng trial_rng = root.substream("trials");
  for (auto* pairs : {&genuine_pairs, &imposter_pairs}) {
    if (pairs->size() > static_cast<std::size_t>(cfg.max_trials)) {
      for (std::size_t i = pairs->size(); i > 1; --i) {
        std::swap((*pairs)[i - 1], (*pairs)[trial_rng.below(i)]);
      }
      pairs->resize(cfg.max_trials);
    }
  }

  eval::ScoreSet trials;
  for (const auto& [a, b] : genuine_pairs) {
    trials.genuine.push_back(cosine_loss(held_emb[a], held_emb[b]));
  }
  for (const auto& [a, b] : imposter_pairs) {
    trials.imposter.push_back(cosine_loss(held_emb[a], held_emb[b]));
  }
  const eval::EerResult eer = eval::compute_eer(trials);
  m.threshold = eer.threshold;
  m.training_eer = eer.eer;
  return m;
}

// ---------------------------------------------------------------------------
// Store and decision
// ---------------------------------------------------------------------------

void VoiceprintStore::enroll(const std::string& user_id, const signal::Waveform& w,
                             const AsvModel& asv, bool overwrite) {
  if (!overwrite && prints_.count(user_id) != 0) {
    throw ConfigError("enroll: user already enrolled: " + user_id);
  }
  Voiceprint vp;
  vp.embedding = asv_embed(asv, features::mfcc_forward(w, asv.frontend));
  vp.enrollment = w;
  prints_[user_id] = std::move(vp);
}

const Voiceprint& VoiceprintStore::at(const std::string& user_id) const {
  auto it = prints_.find(user_id);
  if (it == prints_.end()) throw ConfigError("unknown user_id: " + user_id);
  return it->second;
}

Verdict decide(const AsvModel& asv, const CmModel& cm, const VoiceprintStore& store,
               const std::string& user_id, const signal::Waveform& w) {
  const Voiceprint& vp = store.at(user_id);
  Verdict v;
  v.asv_score = cosine_loss(asv_embed(asv, features::mfcc_forward(w, asv.frontend)), vp.embedding);
  v.cm_score = cm_score(cm, features::lpms_forward(w, cm.frontend));
  v.asv_accept = v.asv_score < asv.threshold;
  v.cm_accept = v.cm_score < cm.threshold;
  return v;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

constexpr int kFormatVersion = 1;

json config_to_json(const ExtractorConfig& c) {
  return json{{"frame_len", c.frame_len},
              {"hop", c.hop},
              {"fft_size", c.fft_size},
              {"n_mels", c.n_mels},
              {"n_ceps", c.n_ceps},
              {"window", c.window == features::Window::kHann ? "hann" : "rect"},
              {"log_floor", c.log_floor},
              {"mel_low_hz", c.mel_low_hz},
              {"mel_high_hz", c.mel_high_hz}};
}

ExtractorConfig config_from_json(const json& j) {
  ExtractorConfig c;
  c.frame_len = j.at("frame_len").get<int>();
  c.hop = j.at("hop").get<int>();
  c.fft_size = j.at("fft_size").get<int>();
  c.n_mels = j.at("n_mels").get<int>();
  c.n_ceps = j.at("n_ceps").get<int>();
  const std::string w = j.at("window").get<std::string>();
  if (w == "hann") {
    c.window = features::Window::kHann;
  } else if (w == "rect") {
    c.window = features::Window::kRect;
  } else {
    throw FormatError("model record: unknown window '" + w + "'");
  }
  c.log_floor = j.at("log_floor").get<double>();
  c.mel_low_hz = j.at("mel_low_hz").get<double>();
  c.mel_high_hz = j.at("mel_high_hz").get<double>();
  return c;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("bad model record " + path.string() + ": " + e.what());
  }
}

json check_record(const std::filesystem::path& path, const char* expected_type) {
  const json j = read_json(path);
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw FormatError("unsupported model format version in " + path.string());
    }
    if (j.at("model_type").get<std::string>() != expected_type) {
      throw FormatError("model record " + path.string() + " is not of type '" +
                        expected_type + "'");
    }
  } catch (const json::exception& e) {
    throw FormatError("bad model record " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace

void save_cm(const CmModel& m, const std::filesystem::path& path) {
  json j{{"format_version", kFormatVersion},
         {"model_type", "cm"},
         {"frontend", config_to_json(m.frontend)},
         {"input_dim", m.input_dim},
         {"hidden_size", m.hidden_size},
         {"feat_mean", m.feat_mean},
         {"feat_scale", m.feat_scale},
         {"w1", m.w1},
         {"b1", m.b1},
         {"w2", m.w2},
         {"b2", m.b2},
         {"threshold", m.threshold},
         {"training_eer", m.training_eer}};
  write_json(j, path);
}

CmModel load_cm(const std::filesystem::path& path) {
  const json j = check_record(path, "cm");
  try {
    CmModel m;
    m.frontend = config_from_json(j.at("frontend"));
    m.input_dim = j.at("input_dim").get<int>();
    m.hidden_size = j.at("hidden_size").get<int>();
    m.feat_mean = j.at("feat_mean").get<std::vector<double>>();
    m.feat_scale = j.at("feat_scale").get<std::vector<double>>();
    m.w1 = j.at("w1").get<std::vector<double>>();
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.w2 = j.at("w2").get<std::vector<double>>();
    m.b2 = j.at("b2").get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.training_eer = j.at("training_eer").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError("bad model record " + path.string() + ": " + e.what());
  }
}

void save_asv(const AsvModel& m, const std::filesystem::path& path) {
  json j{{"format_version", kFormatVersion},
         {"model_type", "asv"},
         {"frontend", config_to_json(m.frontend)},
         {"raw_dim", m.raw_dim},
         {"projection_dim", m.projection_dim},
         {"proj_mean", m.proj_mean},
         {"proj", m.proj},
         {"threshold", m.threshold},
         {"training_eer", m.training_eer}};
  write_json(j, path);
}

AsvModel load_asv(const std::filesystem::path& path) {
  const json j = check_record(path, "asv");
  try {
    AsvModel m;
    m.frontend = config_from_json(j.at("frontend"));
    m.raw_dim = j.at("raw_dim").get<int>();
    m.projection_dim = j.at("projection_dim").get<int>();
    m.proj_mean = j.at("proj_mean").get<std::vector<double>>();
    m.proj = j.at("proj").get<std::vector<double>>();
    m.threshold = j.at("threshold").get<double>();
    m.training_eer = j.at("training_eer").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError("bad model record " + path.string() + ": " + e.what());
  }
}

}  // namespace advoice::models
