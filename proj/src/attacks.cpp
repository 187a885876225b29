#include "advoice/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "advoice/error.hpp"
#include "advoice/prng.hpp"

namespace advoice::attacks {

using features::ExtractorConfig;
using features::FeatureKind;
using features::FeatureMatrix;
using signal::Waveform;

namespace {

double sign(double g) { return (g > 0.0) - (g < 0.0); }

struct StepOut {
  double loss = 0.0;
  bool accept = false;
  std::vector<double> grad;  // w.r.t. waveform samples
};

// Shared PGD skeleton for the time-domain methods: uniform delta inside the
// ball, then iterations of loss/gradient evaluation, sign step, and ball
// projection. Stops early once the shadow decision flips, if requested.
AttackResult run_pgd(const Waveform& x, const AttackConfig& cfg,
                     const std::function<StepOut(const Waveform&)>& step) {
  const double eps = cfg.epsilon;
  const double alpha = cfg.effective_alpha();
  const signal::BallSpec ball{x, eps};

  Prng delta = Prng(cfg.seed, "attack").substream("delta");
  Waveform xp = x;
  for (double& s : xp.samples) s += delta.uniform(-eps, eps);
  xp = signal::clip_to_ball(xp, ball);

  AttackResult res;
  for (int t = 0; t < cfg.iterations; ++t) {
    StepOut out = step(xp);
    res.loss_trajectory.push_back(out.loss);
    if (cfg.early_stop && out.accept) break;
    for (std::size_t i = 0; i < xp.samples.size(); ++i) {
      xp.samples[i] -= alpha * sign(out.grad[i]);
    }
    xp = signal::clip_to_ball(xp, ball);
  }
  res.iterations_run = static_cast<int>(res.loss_trajectory.size());
  res.final_linf = signal::linf_distance(xp, x);
  res.adversarial = std::move(xp);
  return res;
}

}  // namespace

void AttackConfig::validate(Method expected) const {
  if (method != expected) {
    throw ConfigError("attack config method does not match the invoked attack");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("attack epsilon must be finite and >= 0");
  }
  if (iterations < 1) throw ConfigError("attack iterations must be >= 1");
  if (!std::isfinite(alpha)) throw ConfigError("attack alpha must be finite");
  if (alpha > 0.0 && epsilon > 0.0 && alpha > epsilon) {
    throw ConfigError("attack alpha must not exceed epsilon");
  }
  if (!std::isfinite(lambda_cm) || !std::isfinite(lambda_asv)) {
    throw ConfigError("attack lambda weights must be finite");
  }
}

AttackResult advcm(const models::CmModel& cm, const ExtractorConfig& cfg_feat, const Waveform& x,
                   const AttackConfig& cfg) {
  cfg.validate(Method::kAdvCm);
  return run_pgd(x, cfg, [&](const Waveform& xp) {
    StepOut out;
    const FeatureMatrix feats = features::lpms_forward(xp, cfg_feat);
    out.loss = models::cm_score(cm, feats);
    out.accept = models::cm_accept(cm, out.loss);
    out.grad = features::vjp(features::Extractor::kLpms, xp, cfg_feat,
                             models::cm_input_grad(cm, feats));
    return out;
  });
}

AttackResult advsr(const models::AsvModel& asv, const ExtractorConfig& cfg_feat, const Waveform& x,
                   const Waveform& y, const AttackConfig& cfg) {
  cfg.validate(Method::kAdvSr);
  const FeatureMatrix feats_y = features::mfcc_forward(y, cfg_feat);
  return run_pgd(x, cfg, [&](const Waveform& xp) {
    StepOut out;
    const FeatureMatrix feats = features::mfcc_forward(xp, cfg_feat);
    out.loss = models::asv_loss(asv, feats, feats_y);
    out.accept = models::asv_accept(asv, out.loss);
    out.grad = features::vjp(features::Extractor::kMfcc, xp, cfg_feat,
                             models::asv_loss_grad(asv, feats, feats_y));
    return out;
  });
}

AttackResult advjoint(const models::CmModel& cm, const models::AsvModel& asv,
                      const ExtractorConfig& cfg_feat_cm, const ExtractorConfig& cfg_feat_asv,
                      const Waveform& x, const Waveform& y, const AttackConfig& cfg) {
  cfg.validate(Method::kAdvJoint);
  const FeatureMatrix feats_y = features::mfcc_forward(y, cfg_feat_asv);
  return run_pgd(x, cfg, [&](const Waveform& xp) {
    StepOut out;
    const FeatureMatrix feats_cm = features::lpms_forward(xp, cfg_feat_cm);
    const FeatureMatrix feats_asv = features::mfcc_forward(xp, cfg_feat_asv);
    const double loss_cm = models::cm_score(cm, feats_cm);
    const double loss_asv = models::asv_loss(asv, feats_asv, feats_y);
    out.loss = cfg.lambda_asv * loss_asv + cfg.lambda_cm * loss_cm;
    out.accept = models::asv_accept(asv, loss_asv) && models::cm_accept(cm, loss_cm);
    const std::vector<double> g_cm = features::vjp(features::Extractor::kLpms, xp, cfg_feat_cm,
                                                   models::cm_input_grad(cm, feats_cm));
    const std::vector<double> g_asv =
        features::vjp(features::Extractor::kMfcc, xp, cfg_feat_asv,
                      models::asv_loss_grad(asv, feats_asv, feats_y));
    out.grad.resize(g_cm.size());
    for (std::size_t i = 0; i < g_cm.size(); ++i) {
      out.grad[i] = cfg.lambda_cm * g_cm[i] + cfg.lambda_asv * g_asv[i];
    }
    return out;
  });
}

CmSpecResult cmspec(const models::CmModel& cm, const ExtractorConfig& cfg_feat, const Waveform& x,
                    const AttackConfig& cfg) {
  cfg.validate(Method::kCmSpec);
  const double eps = cfg.epsilon;
  const double alpha = cfg.effective_alpha();

  const features::ComplexSpectrogram spec = features::stft(x, cfg_feat);
  const FeatureMatrix base = features::lpms_forward(x, cfg_feat);

  Prng delta = Prng(cfg.seed, "attack").substream("delta");
  FeatureMatrix adv = base;
  for (std::size_t i = 0; i < adv.values.size(); ++i) {
    adv.values[i] =
        std::clamp(adv.values[i] + delta.uniform(-eps, eps), base.values[i] - eps,
                   base.values[i] + eps);
  }

  CmSpecResult res;
  for (int t = 0; t < cfg.iterations; ++t) {
    const double loss = models::cm_score(cm, adv);
    res.loss_trajectory.push_back(loss);
    if (cfg.early_stop && models::cm_accept(cm, loss)) break;
    const FeatureMatrix grad = models::cm_input_grad(cm, adv);
    for (std::size_t i = 0; i < adv.values.size(); ++i) {
      adv.values[i] = std::clamp(adv.values[i] - alpha * sign(grad.values[i]),
                                 base.values[i] - eps, base.values[i] + eps);
    }
  }
  res.iterations_run = static_cast<int>(res.loss_trajectory.size());

  double linf = 0.0;
  for (std::size_t i = 0; i < adv.values.size(); ++i) {
    linf = std::max(linf, std::abs(adv.values[i] - base.values[i]));
  }
  res.final_linf = linf;
  res.direct_accept = models::cm_accept(cm, models::cm_score(cm, adv));

  // Back to linear magnitude: invert the log(power + floor) map, clamping the
  // power at zero since an adversarial log value may dip below log(floor).
  features::RealMatrix mag(adv.frames, adv.coeffs);
  for (int t = 0; t < adv.frames; ++t) {
    for (int k = 0; k < adv.coeffs; ++k) {
      mag.at(t, k) = std::sqrt(std::max(std::exp(adv.at(t, k)) - cfg_feat.log_floor, 0.0));
    }
  }
  res.reconstructed = features::reconstruct_with_phase(mag, spec.phase, cfg_feat);
  res.adv_features = std::move(adv);
  return res;
}

}  // namespace advoice::attacks
