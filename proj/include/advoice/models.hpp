#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "advoice/features.hpp"
#include "advoice/signal.hpp"

namespace advoice::models {

// ---------------------------------------------------------------------------
// Spoofing countermeasure: a logistic scorer over the mean-pooled LPMS, with
// an optional tanh hidden layer. Lower score means more bonafide; a sample is
// accepted when score < threshold.
// ---------------------------------------------------------------------------

struct CmTrainConfig {
  int hidden_size = 0;  // 0 = linear scorer
  double learning_rate = 0.5;
  int epochs = 200;
  double l2 = 1e-4;
  double heldout_fraction = 0.3;  // per-class fraction reserved for the threshold
  std::uint64_t seed = 1;
};

struct CmModel {
  features::ExtractorConfig frontend;  // LPMS front end used by decide()
  int input_dim = 0;
  int hidden_size = 0;  // 0 = linear
  std::vector<double> feat_mean;   // per-bin standardization offset
  std::vector<double> feat_scale;  // per-bin standardization factor
  std::vector<double> w1;          // hidden x input (1 x input when linear), row-major
  std::vector<double> b1;          // hidden biases (empty when linear)
  std::vector<double> w2;          // hidden -> output weights (empty when linear)
  double b2 = 0.0;                 // output bias
  double threshold = 0.0;          // accept (bonafide) iff score < threshold
  double training_eer = 0.0;       // held-out equal error rate at fit time
};

// Full-batch gradient descent on the cross-entropy of sigmoid(score) with
// labels 0 = bonafide, 1 = spoof. The corpus is split per class; the held-out
// part sets the standard threshold at the equal-error point. Deterministic
// given cfg.seed. Feature matrices must be LPMS with frontend.bins() columns.
CmModel train_cm(const std::vector<features::FeatureMatrix>& lpms, const std::vector<int>& labels,
                 const features::ExtractorConfig& frontend, const CmTrainConfig& cfg);

double cm_score(const CmModel& m, const features::FeatureMatrix& feats);

inline bool cm_accept(const CmModel& m, double score) { return score < m.threshold; }

// d(score)/d(feats), same shape as feats.
features::FeatureMatrix cm_input_grad(const CmModel& m, const features::FeatureMatrix& feats);

// ---------------------------------------------------------------------------
// Speaker verification: statistics pooling (per-coefficient mean and standard
// deviation over MFCC frames) followed by an optional whitening projection,
// scored with cosine distance. Lower loss means same speaker; a trial is
// accepted when loss < threshold.
// ---------------------------------------------------------------------------

struct AsvTrainConfig {
  int projection_dim = 16;  // 0 keeps the raw statistics vector
  // Drops the coefficient-0 (overall energy) mean/std dimensions via a fixed
  // selection projection. Loudness and broadband level offsets are channel
  // effects, not speaker identity, so discarding them makes the embedding
  // level-invariant. Mutually exclusive with projection_dim > 0.
  bool drop_energy = false;
  double heldout_fraction = 0.3;
  int max_trials = 2000;  // cap per trial class when thresholding
  std::uint64_t seed = 1;
};

struct AsvModel {
  features::ExtractorConfig frontend;  // MFCC front end
  int raw_dim = 0;                     // 2 * n_ceps
  int projection_dim = 0;              // 0 = identity (no projection)
  std::vector<double> proj_mean;       // raw_dim, subtracted before projecting
  std::vector<double> proj;            // projection_dim x raw_dim, row-major
  double threshold = 0.0;              // accept iff loss < threshold
  double training_eer = 0.0;           // held-out equal error rate at fit time
};

// Fits the whitening projection by PCA on the training-half embeddings and
// sets the threshold at the equal-error point of held-out same/cross-speaker
// trials. speakers[i] labels mfcc[i]. Deterministic given cfg.seed.
AsvModel train_asv(const std::vector<features::FeatureMatrix>& mfcc,
                   const std::vector<std::string>& speakers,
                   const features::ExtractorConfig& frontend, const AsvTrainConfig& cfg);

// Pooled embedding: [mean_0..mean_{C-1}, std_0..std_{C-1}], then projection if
// configured. Needs at least 2 frames. Constant-over-frames input yields an
// exactly zero std half (first-frame-pivoted two-pass moments).
std::vector<double> asv_embed(const AsvModel& m, const features::FeatureMatrix& feats);

// 1 - cosine similarity. Exactly 0 for bitwise-identical vectors; throws
// ConfigError when either vector has zero norm.
double cosine_loss(const std::vector<double>& a, const std::vector<double>& b);

// Pairwise loss 1 - cos(embed(x), embed(y)); exactly 0 when x == y bitwise.
double asv_loss(const AsvModel& m, const features::FeatureMatrix& x,
                const features::FeatureMatrix& y);

inline bool asv_accept(const AsvModel& m, double loss) { return loss < m.threshold; }

// d(asv_loss)/d(x) with y held fixed; same shape as x.
features::FeatureMatrix asv_loss_grad(const AsvModel& m, const features::FeatureMatrix& x,
                                      const features::FeatureMatrix& y);

// ---------------------------------------------------------------------------
// Enrollment and the joint decision.
// ---------------------------------------------------------------------------

struct Verdict {
  bool asv_accept = false;
  bool cm_accept = false;
  double asv_score = 0.0;  // cosine loss against the enrolled voiceprint
  double cm_score = 0.0;
  bool joint_accept() const { return asv_accept && cm_accept; }
};

struct Voiceprint {
  std::vector<double> embedding;
  signal::Waveform enrollment;
};

class VoiceprintStore {
 public:
  // Embeds w with the ASV front end and stores it under user_id. Re-enrolling
  // an existing id throws ConfigError unless overwrite is set.
  void enroll(const std::string& user_id, const signal::Waveform& w, const AsvModel& asv,
              bool overwrite = false);
  bool contains(const std::string& user_id) const { return prints_.count(user_id) != 0; }
  const Voiceprint& at(const std::string& user_id) const;  // ConfigError if unknown
  std::size_t size() const { return prints_.size(); }

 private:
  std::map<std::string, Voiceprint> prints_;
};

// Extracts MFCC and LPMS independently from w, scores both systems, and
// applies each threshold; the joint decision is their conjunction.
Verdict decide(const AsvModel& asv, const CmModel& cm, const VoiceprintStore& store,
               const std::string& user_id, const signal::Waveform& w);

// ---------------------------------------------------------------------------
// Persistence: versioned JSON records holding config, weights, and threshold.
// ---------------------------------------------------------------------------

void save_cm(const CmModel& m, const std::filesystem::path& path);
CmModel load_cm(const std::filesystem::path& path);
void save_asv(const AsvModel& m, const std::filesystem::path& path);
AsvModel load_asv(const std::filesystem::path& path);

}  // namespace advoice::models
