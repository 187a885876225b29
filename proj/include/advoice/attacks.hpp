#pragma once

#include <cstdint>
#include <vector>

#include "advoice/features.hpp"
#include "advoice/models.hpp"
#include "advoice/signal.hpp"

namespace advoice::attacks {

enum class Method { kAdvCm, kAdvSr, kAdvJoint, kCmSpec };

// Shared knobs for the sign-gradient descent loop. epsilon and alpha are in
// amplitude units for the time-domain methods and in log-power feature units
// for cmspec.
struct AttackConfig {
  Method method = Method::kAdvCm;
  double epsilon = 0.003;
  double alpha = 0.0;  // <= 0 selects the epsilon/10 default
  int iterations = 100;
  double lambda_cm = 1.0;   // advjoint weight on the CM score
  double lambda_asv = 1.0;  // advjoint weight on the ASV loss
  std::uint64_t seed = 1;
  bool early_stop = false;  // stop once the shadow decision flips to accept

  double effective_alpha() const { return alpha > 0.0 ? alpha : epsilon / 10.0; }
  // Throws ConfigError on bad values or when method != expected.
  void validate(Method expected) const;
};

struct AttackResult {
  signal::Waveform adversarial;
  std::vector<double> loss_trajectory;  // one entry per iteration actually run
  double final_linf = 0.0;
  int iterations_run = 0;
};

// Sign-gradient descent on the shadow CM score through the LPMS extractor,
// staying inside the L-infinity ball of radius epsilon around x. Starts from
// x + delta with delta ~ U(-eps, eps) drawn from the seeded generator.
AttackResult advcm(const models::CmModel& cm, const features::ExtractorConfig& cfg_feat,
                   const signal::Waveform& x, const AttackConfig& cfg);

// Descends the pairwise ASV loss between x' and the fixed bonafide reference
// y of the target identity; y is never modified.
AttackResult advsr(const models::AsvModel& asv, const features::ExtractorConfig& cfg_feat,
                   const signal::Waveform& x, const signal::Waveform& y, const AttackConfig& cfg);

// Joint attack: per iteration the combined gradient is
// lambda_cm * Grads_CM + lambda_asv * Grads_ASV and the recorded loss is
// lambda_asv * asv_loss + lambda_cm * cm_score. With one lambda zero the
// iterate sequence reduces exactly to the single-system attack.
AttackResult advjoint(const models::CmModel& cm, const models::AsvModel& asv,
                      const features::ExtractorConfig& cfg_feat_cm,
                      const features::ExtractorConfig& cfg_feat_asv, const signal::Waveform& x,
                      const signal::Waveform& y, const AttackConfig& cfg);

struct CmSpecResult {
  features::FeatureMatrix adv_features;  // perturbed LPMS
  bool direct_accept = false;            // CM decision on adv_features directly
  signal::Waveform reconstructed;        // modified magnitude + original phase
  std::vector<double> loss_trajectory;
  double final_linf = 0.0;  // feature-domain L-infinity
  int iterations_run = 0;
};

// Feature-domain baseline: perturbs the log-power magnitude inside a feature
// L-infinity ball, then reconstructs a waveform from the exponentiated
// magnitude and the original phase.
CmSpecResult cmspec(const models::CmModel& cm, const features::ExtractorConfig& cfg_feat,
                    const signal::Waveform& x, const AttackConfig& cfg);

}  // namespace advoice::attacks
