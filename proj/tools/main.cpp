// advoice — command-line workbench for the adversarial voice attack engine.
//
// One binary, subcommand style:
//   synth      build the synthetic desk corpus
//   train      train shadow/target ASV+CM stacks, write model files + EER table
//   attack     craft adversarial audio for a batch of spoof trials
//   channel    apply the lossy telephony channel to a WAV offline
//   send       encode a WAV and transmit RTP-like packets over UDP
//   recv       receive RTP-like packets, decode, write the WAV
//   eval       run a named experiment preset and emit the report grid
//   gradcheck  finite-difference audit of the differentiable feature paths
//
// A key=value config file can preset any flag (--config, section per
// subcommand); flags given on the command line win. Every subcommand that
// owns an output directory writes a run_config.ini there echoing the fully
// resolved configuration, so any run can be reproduced from its artifacts.
//
// Exit codes: 0 success, 1 engine/config error, 3 missing external tool,
// CLI11's own codes (>= 100) for command-line parse errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "advoice/attacks.hpp"
#include "advoice/channel.hpp"
#include "advoice/corpus.hpp"
#include "advoice/error.hpp"
#include "advoice/experiment.hpp"
#include "advoice/features.hpp"
#include "advoice/metrics.hpp"
#include "advoice/models.hpp"
#include "advoice/prng.hpp"
#include "advoice/signal.hpp"

namespace fs = std::filesystem;
using advoice::ConfigError;
using advoice::Error;
using advoice::IoError;
using advoice::Prng;
using advoice::ToolUnavailableError;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitToolUnavailable = 3;

// Shortest round-trip decimal form, identical to the report serialization.
std::string fmt_num(double x) { return nlohmann::json(x).dump(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw IoError("cannot write " + path.string());
}

// Resolved-config manifest: a config file section that reproduces this run
// via `advoice --config <dir>/run_config.ini <subcommand>`.
void write_run_config(const CLI::App* sub, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "run_config.ini",
             "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false));
}

advoice::corpus::Corpus load_corpus(const fs::path& dir) {
  advoice::corpus::Corpus c;
  c.root = dir;
  c.shadow = advoice::corpus::load_external_manifest(dir / "manifest_train_shadow.tsv",
                                                     advoice::corpus::Split::kTrainShadow);
  c.target = advoice::corpus::load_external_manifest(dir / "manifest_train_target.tsv",
                                                     advoice::corpus::Split::kTrainTarget);
  c.eval = advoice::corpus::load_external_manifest(dir / "manifest_eval.tsv",
                                                   advoice::corpus::Split::kEval);
  c.validate();
  return c;
}

advoice::attacks::Method method_from_string(const std::string& s) {
  if (s == "advcm") return advoice::attacks::Method::kAdvCm;
  if (s == "advsr") return advoice::attacks::Method::kAdvSr;
  if (s == "advjoint") return advoice::attacks::Method::kAdvJoint;
  if (s == "cmspec") return advoice::attacks::Method::kCmSpec;
  throw ConfigError("unknown method '" + s + "' (expected advcm, advsr, advjoint or cmspec)");
}

advoice::channel::Codec codec_from_string(const std::string& s) {
  if (s == "surrogate") return advoice::channel::Codec::kSurrogate;
  if (s == "external") return advoice::channel::Codec::kExternal;
  throw ConfigError("unknown codec '" + s + "' (expected surrogate or external)");
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
  std::string out = "corpus";
  std::uint64_t seed = 1;
  int speakers = 20;
  int utts = 10;
  double duration = 1.0;
  std::string family = "A";
};

void run_synth(const CLI::App* sub, const SynthOpts& o) {
  advoice::corpus::BuildConfig cfg;
  cfg.n_speakers = o.speakers;
  cfg.utts_per_speaker = o.utts;
  cfg.duration_s = o.duration;
  cfg.seed = o.seed;
  cfg.target_family = advoice::corpus::family_from_string(o.family);
  cfg.validate();
  const auto c = advoice::corpus::build_corpus(cfg, o.out);
  write_run_config(sub, o.out);
  std::cout << "corpus: " << c.root.string() << "\n"
            << "  shadow " << c.shadow.entries.size() << " utterances, target "
            << c.target.entries.size() << ", eval " << c.eval.entries.size() << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string corpus = "corpus";
  std::string out = "models";
  std::uint64_t seed = 1;
};

void run_train(const CLI::App* sub, const TrainOpts& o) {
  const auto c = load_corpus(o.corpus);
  // Training seeds derive from the root seed exactly as the evaluation
  // presets derive them, so separately trained models match an eval run with
  // the same seed (the derivation does not depend on the preset name).
  const auto preset = advoice::eval::make_preset("whitebox-grid", o.seed);
  const auto shadow = advoice::eval::train_system(c.shadow, c.root, preset.shadow_cfg);
  const auto target = advoice::eval::train_system(c.target, c.root, preset.target_cfg);

  const fs::path out(o.out);
  fs::create_directories(out);
  advoice::models::save_asv(shadow.asv, out / "shadow_asv.json");
  advoice::models::save_cm(shadow.cm, out / "shadow_cm.json");
  advoice::models::save_asv(target.asv, out / "target_asv.json");
  advoice::models::save_cm(target.cm, out / "target_cm.json");

  std::ostringstream table;
  table << "model,held_out_eer,threshold\n";
  table << "shadow_asv," << fmt_num(shadow.asv.training_eer) << ","
        << fmt_num(shadow.asv.threshold) << "\n";
  table << "shadow_cm," << fmt_num(shadow.cm.training_eer) << ","
        << fmt_num(shadow.cm.threshold) << "\n";
  table << "target_asv," << fmt_num(target.asv.training_eer) << ","
        << fmt_num(target.asv.threshold) << "\n";
  table << "target_cm," << fmt_num(target.cm.training_eer) << ","
        << fmt_num(target.cm.threshold) << "\n";
  write_text(out / "eer_table.csv", table.str());
  write_run_config(sub, out);
  std::cout << table.str();
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

struct AttackOpts {
  std::string corpus = "corpus";
  std::string models = "models";
  std::string out = "attack_out";
  std::string method = "advcm";
  double epsilon = 0.003;
  double alpha = 0.0;
  int iters = 100;
  double lambda_cm = 1.0;
  double lambda_asv = 1.0;
  bool early_stop = false;
  bool codec_aware = false;
  int frame_ms = 20;
  int count = 20;
  std::uint64_t seed = 1;
};

void run_attack(const CLI::App* sub, const AttackOpts& o) {
  using advoice::attacks::AttackConfig;
  using advoice::attacks::AttackResult;
  using advoice::attacks::Method;

  const auto c = load_corpus(o.corpus);
  const auto asv = advoice::models::load_asv(fs::path(o.models) / "shadow_asv.json");
  const auto cm = advoice::models::load_cm(fs::path(o.models) / "shadow_cm.json");
  const Method method = method_from_string(o.method);

  AttackConfig base;
  base.method = method;
  base.epsilon = o.epsilon;
  base.alpha = o.alpha;
  base.iterations = o.iters;
  base.lambda_cm = o.lambda_cm;
  base.lambda_asv = o.lambda_asv;
  base.early_stop = o.early_stop;
  base.validate(method);
  if (o.codec_aware && method == Method::kCmSpec) {
    throw ConfigError("--codec-aware applies to the time-domain methods only");
  }

  const auto trials = advoice::eval::make_trials(c, o.count, o.seed);
  const fs::path out(o.out);
  fs::create_directories(out);

  // Per-trial seeds come from a named substream of the root seed so each
  // output is independently reproducible.
  Prng seeder(o.seed, "attack");

  std::ostringstream manifest;
  manifest << "utterance_id\tspeaker\tmethod\tepsilon\tfinal_linf\titerations_run\tpath\n";
  std::vector<std::string> audit_failures;
  int audited = 0;

  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    AttackConfig acfg = base;
    acfg.seed = seeder.substream(t.utterance_id).next_u64();

    const auto craft = [&](const advoice::signal::Waveform& x) -> AttackResult {
      switch (method) {
        case Method::kAdvCm:
          return advoice::attacks::advcm(cm, cm.frontend, x, acfg);
        case Method::kAdvSr:
          return advoice::attacks::advsr(asv, asv.frontend, x, t.reference, acfg);
        case Method::kAdvJoint:
          return advoice::attacks::advjoint(cm, asv, cm.frontend, asv.frontend, x,
                                            t.reference, acfg);
        case Method::kCmSpec:
          break;  // handled below; cmspec returns a different result type
      }
      throw ConfigError("unreachable method");
    };

    advoice::signal::Waveform adv;
    double final_linf = 0.0;
    int iterations_run = 0;
    if (method == Method::kCmSpec) {
      const auto r = advoice::attacks::cmspec(cm, cm.frontend, t.spoof, acfg);
      adv = r.reconstructed;
      final_linf = r.final_linf;  // feature-domain radius
      iterations_run = r.iterations_run;
      if (final_linf > o.epsilon + 1e-9) {
        audit_failures.push_back(t.utterance_id + ": feature linf " + fmt_num(final_linf) +
                                 " exceeds epsilon");
      }
    } else if (o.codec_aware) {
      advoice::channel::ChannelConfig ccfg;
      ccfg.frame_ms = o.frame_ms;
      adv = advoice::channel::codec_aware_craft(
          [&](const advoice::signal::Waveform& x) { return craft(x); }, t.spoof, o.epsilon,
          ccfg);
      final_linf = advoice::signal::linf_distance(adv, t.spoof);
      iterations_run = o.iters;
    } else {
      const AttackResult r = craft(t.spoof);
      adv = r.adversarial;
      final_linf = r.final_linf;
      iterations_run = r.iterations_run;
    }

    const std::string name = t.utterance_id + "_adv.wav";
    advoice::signal::write_wav(adv, out / name);
    manifest << t.utterance_id << "\t" << t.claimed_speaker << "\t" << o.method << "\t"
             << fmt_num(o.epsilon) << "\t" << fmt_num(final_linf) << "\t" << iterations_run
             << "\t" << name << "\n";

    // Built-in audit: the file on disk must stay inside the ball around the
    // source spoof (half a quantization step of slack for the 16-bit write);
    // epsilon 0 must reproduce the input file byte for byte.
    if (method != Method::kCmSpec) {
      ++audited;
      const auto* entry = [&]() -> const advoice::corpus::ManifestEntry* {
        for (const auto* m : {&c.shadow, &c.target, &c.eval}) {
          for (const auto& e : m->entries) {
            if (e.utterance_id == t.utterance_id) return &e;
          }
        }
        return nullptr;
      }();
      if (entry == nullptr) {
        audit_failures.push_back(t.utterance_id + ": source entry vanished from manifest");
        continue;
      }
      const fs::path src = c.root / entry->path;
      if (o.epsilon == 0.0) {
        std::ifstream fa(out / name, std::ios::binary);
        std::ifstream fb(src, std::ios::binary);
        std::ostringstream ba, bb;
        ba << fa.rdbuf();
        bb << fb.rdbuf();
        if (ba.str() != bb.str()) {
          audit_failures.push_back(t.utterance_id + ": epsilon 0 output differs from input");
        }
      } else {
        const auto back = advoice::signal::read_wav(out / name);
        const auto orig = advoice::signal::read_wav(src);
        const double d = advoice::signal::linf_distance(back, orig);
        const double tol = o.epsilon + 0.5 / 32768.0 + 1e-9;
        if (d > tol) {
          audit_failures.push_back(t.utterance_id + ": on-disk linf " + fmt_num(d) +
                                   " exceeds " + fmt_num(tol));
        }
      }
    }
  }

  write_text(out / "manifest.tsv", manifest.str());
  write_run_config(sub, out);
  std::cout << "crafted " << trials.size() << " adversarial utterances (" << o.method
            << ", epsilon " << fmt_num(o.epsilon) << ") into " << out.string() << "\n";
  if (!audit_failures.empty()) {
    std::cerr << "L-infinity audit FAILED for " << audit_failures.size() << " of " << audited
              << " outputs:\n";
    for (const auto& f : audit_failures) std::cerr << "  " << f << "\n";
    throw Error("attack output audit failed");
  }
  std::cout << "L-infinity audit passed on " << audited << " outputs\n";
}

// ---------------------------------------------------------------------------
// channel / send / recv
// ---------------------------------------------------------------------------

struct ChannelOpts {
  std::string in;
  std::string out = "channel_out";
  double loss_rate = 0.02;
  bool redundancy = false;
  std::string codec = "surrogate";
  std::uint64_t seed = 1;
  int frame_ms = 20;
  std::string encoder = "opusenc";
  std::string decoder = "opusdec";
};

void run_channel(const CLI::App* sub, const ChannelOpts& o) {
  advoice::channel::ChannelConfig cfg;
  cfg.codec = codec_from_string(o.codec);
  cfg.loss_rate = o.loss_rate;
  cfg.redundancy = o.redundancy;
  cfg.seed = o.seed;
  cfg.frame_ms = o.frame_ms;
  cfg.external_encoder = o.encoder;
  cfg.external_decoder = o.decoder;
  cfg.validate();
  const auto w = advoice::signal::read_wav(o.in);
  const auto y = advoice::channel::apply_channel(w, cfg);
  fs::create_directories(o.out);
  advoice::signal::write_wav(y, fs::path(o.out) / "channel.wav");
  write_run_config(sub, o.out);
  std::cout << "channel output: " << (fs::path(o.out) / "channel.wav").string() << "\n";
}

struct SendOpts {
  std::string in;
  std::string addr = "127.0.0.1";
  int port = 0;
  std::uint32_t ssrc = 1234;
  int frame_ms = 20;
  bool redundancy = false;
};

void run_send(const SendOpts& o) {
  advoice::channel::ChannelConfig cfg;
  cfg.frame_ms = o.frame_ms;
  cfg.redundancy = o.redundancy;
  cfg.validate();
  const auto w = advoice::signal::read_wav(o.in);
  const auto frames = advoice::channel::surrogate_encode(w, cfg);
  const auto packets =
      advoice::channel::packetize(frames, o.ssrc, cfg.frame_samples(w.sample_rate_hz));
  advoice::channel::send_udp(packets, o.addr, o.port);
  std::cout << "sent " << packets.size() << " packets to " << o.addr << ":" << o.port << "\n";
}

struct RecvOpts {
  std::string out = "recv_out";
  int port = 0;
  std::uint32_t ssrc = 1234;
  int timeout_ms = 2000;
  int frame_ms = 20;
  bool redundancy = false;
};

void run_recv(const CLI::App* sub, const RecvOpts& o) {
  advoice::channel::ChannelConfig cfg;
  cfg.frame_ms = o.frame_ms;
  cfg.redundancy = o.redundancy;
  cfg.validate();
  const auto packets = advoice::channel::recv_udp(o.port, o.ssrc, o.timeout_ms);
  const int spf = cfg.frame_samples(advoice::signal::kCanonicalRateHz);
  const auto res = advoice::channel::depacketize(packets, spf);
  const std::set<int> lost(res.lost.begin(), res.lost.end());
  const auto w = advoice::channel::surrogate_decode(res.frames, cfg, lost);
  fs::create_directories(o.out);
  advoice::signal::write_wav(w, fs::path(o.out) / "received.wav");
  write_run_config(sub, o.out);
  std::cout << "received " << packets.size() << " packets (" << res.lost.size()
            << " frames lost) -> " << (fs::path(o.out) / "received.wav").string() << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string preset;
  std::string out = "eval_out";
  std::uint64_t seed = 1;
  int samples = 0;  // 0 keeps the preset's per-cell sample count
};

void run_eval(const CLI::App* sub, const EvalOpts& o) {
  auto preset = advoice::eval::make_preset(o.preset, o.seed);
  const fs::path out(o.out);
  const auto c = advoice::corpus::build_corpus(preset.corpus_cfg, out / "corpus");

  advoice::eval::SystemSet systems;
  systems.shadow = advoice::eval::train_system(c.shadow, c.root, preset.shadow_cfg);
  systems.target = advoice::eval::train_system(c.target, c.root, preset.target_cfg);
  advoice::eval::enroll_all(systems.shadow, c);
  advoice::eval::enroll_all(systems.target, c);

  if (o.samples > 0) {
    for (auto& row : preset.rows) row.sample_count = o.samples;
  }
  const auto report = advoice::eval::run_grid(preset.rows, c, systems);
  advoice::eval::emit_report(report, out / "report.csv", out / "report.json");
  write_run_config(sub, out);

  std::cout << "epsilon";
  for (double e : report.epsilons) std::cout << "\t" << fmt_num(e);
  std::cout << "\n";
  for (const auto& row : report.rows) {
    std::cout << row.label;
    for (double r : row.rates) std::cout << "\t" << fmt_num(r);
    std::cout << "\n";
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "grid runtime " << fmt_num(report.runtime_s) << " s\n";
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckOpts {
  std::uint64_t seed = 1;
  int trials = 20;
  double duration = 0.5;
  std::string fault = "none";
  std::string out;
};

struct GradcheckRow {
  int trial = 0;
  double mfcc_err = 0.0;
  double lpms_err = 0.0;
};

// Central finite difference of L(x) = <upstream, features(x)> against the
// analytic vector-Jacobian product. Perturbing one sample only touches the
// frames whose window covers it, so the difference quotient is evaluated on
// the hop-aligned sub-span of those frames rather than the whole waveform.
double fd_rel_error(advoice::features::Extractor ex, const advoice::signal::Waveform& w,
                    const advoice::features::ExtractorConfig& cfg,
                    const advoice::features::FeatureMatrix& upstream,
                    const std::vector<double>& analytic) {
  const int n = static_cast<int>(w.samples.size());
  const int n_frames = upstream.frames;
  const double h = 1e-5;

  const auto forward = [&](const advoice::signal::Waveform& x) {
    return ex == advoice::features::Extractor::kMfcc
               ? advoice::features::mfcc_forward(x, cfg)
               : advoice::features::lpms_forward(x, cfg);
  };

  std::vector<double> fd(n, 0.0);
  advoice::signal::Waveform span;
  span.sample_rate_hz = w.sample_rate_hz;
  for (int i = 0; i < n; ++i) {
    const int f_last = std::min(i / cfg.hop, n_frames - 1);
    int f_first = (i - cfg.frame_len) / cfg.hop + 1;
    if (f_first < 0) f_first = 0;
    if (f_first > f_last) continue;  // tail samples no frame covers
    const int begin = f_first * cfg.hop;
    const int len = (f_last - f_first) * cfg.hop + cfg.frame_len;
    span.samples.assign(w.samples.begin() + begin, w.samples.begin() + begin + len);

    double diff = 0.0;
    for (const double sgn : {+1.0, -1.0}) {
      span.samples[i - begin] = w.samples[i] + sgn * h;
      const auto feats = forward(span);
      double dot = 0.0;
      for (int f = 0; f < feats.frames; ++f) {
        for (int k = 0; k < feats.coeffs; ++k) {
          dot += upstream.at(f_first + f, k) * feats.at(f, k);
        }
      }
      diff += sgn * dot;
    }
    span.samples[i - begin] = w.samples[i];
    fd[i] = diff / (2.0 * h);
  }

  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    num += (fd[i] - analytic[i]) * (fd[i] - analytic[i]);
    den += analytic[i] * analytic[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

void run_gradcheck(const CLI::App* sub, const GradcheckOpts& o) {
  using advoice::features::Extractor;
  advoice::features::VjpFault fault;
  if (o.fault == "none") {
    fault = advoice::features::VjpFault::kNone;
  } else if (o.fault == "dct-sign") {
    fault = advoice::features::VjpFault::kDctBackwardSign;
  } else {
    throw ConfigError("unknown fault '" + o.fault + "' (expected none or dct-sign)");
  }
  if (o.trials < 1) throw ConfigError("gradcheck: --trials must be >= 1");

  advoice::features::ExtractorConfig cfg;
  cfg.validate(advoice::signal::kCanonicalRateHz);
  const int n = static_cast<int>(o.duration * advoice::signal::kCanonicalRateHz);

  const auto run_trial = [&](int t) -> GradcheckRow {
    Prng rng(o.seed, "gradcheck");
    Prng wave = rng.substream("wave-" + std::to_string(t));
    advoice::signal::Waveform w;
    w.samples.resize(n);
    for (auto& s : w.samples) s = wave.uniform(-0.5, 0.5);

    GradcheckRow row;
    row.trial = t;
    for (const Extractor ex : {Extractor::kMfcc, Extractor::kLpms}) {
      const bool is_mfcc = ex == Extractor::kMfcc;
      const auto feats = is_mfcc ? advoice::features::mfcc_forward(w, cfg)
                                 : advoice::features::lpms_forward(w, cfg);
      Prng up = rng.substream(std::string(is_mfcc ? "mfcc" : "lpms") + "-up-" +
                              std::to_string(t));
      advoice::features::FeatureMatrix upstream(feats.frames, feats.coeffs, feats.kind);
      for (auto& v : upstream.values) v = up.uniform(-1.0, 1.0);

      const auto analytic = advoice::features::vjp(ex, w, cfg, upstream, fault);
      const double err = fd_rel_error(ex, w, cfg, upstream, analytic);
      (is_mfcc ? row.mfcc_err : row.lpms_err) = err;
    }
    return row;
  };

  std::vector<std::future<GradcheckRow>> futures;
  futures.reserve(o.trials);
  for (int t = 0; t < o.trials; ++t) {
    futures.push_back(std::async(std::launch::async, run_trial, t));
  }
  std::vector<GradcheckRow> rows;
  rows.reserve(o.trials);
  for (auto& f : futures) rows.push_back(f.get());

  double max_err = 0.0;
  std::ostringstream report;
  report << "trial,mfcc_rel_l2,lpms_rel_l2\n";
  for (const auto& r : rows) {
    max_err = std::max({max_err, r.mfcc_err, r.lpms_err});
    report << r.trial << "," << fmt_num(r.mfcc_err) << "," << fmt_num(r.lpms_err) << "\n";
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "gradcheck.csv", report.str());
    write_run_config(sub, o.out);
  }

  const double threshold = 1e-4;
  std::cout << report.str();
  std::cout << "max relative L2 error " << fmt_num(max_err) << " (threshold "
            << fmt_num(threshold) << ")\n";
  if (!(max_err < threshold)) {
    throw Error("gradient audit failed: max relative error " + fmt_num(max_err));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial voice attack workbench"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; command-line flags win");
  app.get_config_ptr()->configurable(false);

  SynthOpts synth;
  auto* s_synth = app.add_subcommand("synth", "build the synthetic desk corpus");
  s_synth->add_option("--out", synth.out, "output corpus directory")->capture_default_str();
  s_synth->add_option("--seed", synth.seed, "root seed")->capture_default_str();
  s_synth->add_option("--speakers", synth.speakers, "number of speakers (>= 6)")
      ->capture_default_str();
  s_synth->add_option("--utts", synth.utts, "utterances per speaker")->capture_default_str();
  s_synth->add_option("--duration", synth.duration, "utterance length in seconds")
      ->capture_default_str();
  s_synth->add_option("--family", synth.family, "target-split artefact family (A or B)")
      ->capture_default_str();

  TrainOpts train;
  auto* s_train = app.add_subcommand("train", "train shadow and target ASV+CM stacks");
  s_train->add_option("--corpus", train.corpus, "corpus directory")->capture_default_str();
  s_train->add_option("--out", train.out, "model output directory")->capture_default_str();
  s_train->add_option("--seed", train.seed, "root seed")->capture_default_str();

  AttackOpts attack;
  auto* s_attack = app.add_subcommand("attack", "craft adversarial audio for spoof trials");
  s_attack->add_option("--corpus", attack.corpus, "corpus directory")->capture_default_str();
  s_attack->add_option("--models", attack.models, "directory with shadow model files")
      ->capture_default_str();
  s_attack->add_option("--out", attack.out, "output directory")->capture_default_str();
  s_attack->add_option("--method", attack.method, "advcm, advsr, advjoint or cmspec")
      ->capture_default_str();
  s_attack->add_option("--epsilon", attack.epsilon, "perturbation budget")
      ->capture_default_str();
  s_attack->add_option("--alpha", attack.alpha, "step size (0 = epsilon/10)")
      ->capture_default_str();
  s_attack->add_option("--iters", attack.iters, "iteration count")->capture_default_str();
  s_attack->add_option("--lambda-cm", attack.lambda_cm, "joint weight on the CM score")
      ->capture_default_str();
  s_attack->add_option("--lambda-asv", attack.lambda_asv, "joint weight on the ASV loss")
      ->capture_default_str();
  s_attack->add_flag("--early-stop", attack.early_stop, "stop once the shadow decision flips");
  s_attack->add_flag("--codec-aware", attack.codec_aware,
                     "craft against the loss-free surrogate codec");
  s_attack->add_option("--frame-ms", attack.frame_ms, "codec frame length (codec-aware mode)")
      ->capture_default_str();
  s_attack->add_option("--count", attack.count, "number of spoof trials")
      ->capture_default_str();
  s_attack->add_option("--seed", attack.seed, "root seed")->capture_default_str();

  ChannelOpts channel;
  auto* s_channel = app.add_subcommand("channel", "apply the lossy channel to a WAV offline");
  s_channel->add_option("--in", channel.in, "input WAV")->required();
  s_channel->add_option("--out", channel.out, "output directory")->capture_default_str();
  s_channel->add_option("--loss-rate", channel.loss_rate, "per-frame loss probability")
      ->capture_default_str();
  s_channel->add_flag("--redundancy", channel.redundancy,
                      "each frame carries a copy of the previous one");
  s_channel->add_option("--codec", channel.codec, "surrogate or external")
      ->capture_default_str();
  s_channel->add_option("--seed", channel.seed, "loss-pattern seed")->capture_default_str();
  s_channel->add_option("--frame-ms", channel.frame_ms, "frame length in ms")
      ->capture_default_str();
  s_channel->add_option("--encoder", channel.encoder, "external encoder executable")
      ->capture_default_str();
  s_channel->add_option("--decoder", channel.decoder, "external decoder executable")
      ->capture_default_str();

  SendOpts send;
  auto* s_send = app.add_subcommand("send", "encode a WAV and send RTP-like packets over UDP");
  s_send->add_option("--in", send.in, "input WAV")->required();
  s_send->add_option("--addr", send.addr, "destination address")->capture_default_str();
  s_send->add_option("--port", send.port, "destination UDP port")->required();
  s_send->add_option("--ssrc", send.ssrc, "stream identifier")->capture_default_str();
  s_send->add_option("--frame-ms", send.frame_ms, "frame length in ms")->capture_default_str();
  s_send->add_flag("--redundancy", send.redundancy,
                   "each frame carries a copy of the previous one");

  RecvOpts recv;
  auto* s_recv = app.add_subcommand("recv", "receive RTP-like packets, decode, write WAV");
  s_recv->add_option("--port", recv.port, "UDP port to bind")->required();
  s_recv->add_option("--out", recv.out, "output directory")->capture_default_str();
  s_recv->add_option("--ssrc", recv.ssrc, "expected stream identifier")->capture_default_str();
  s_recv->add_option("--timeout-ms", recv.timeout_ms, "stop after this idle time")
      ->capture_default_str();
  s_recv->add_option("--frame-ms", recv.frame_ms, "frame length in ms")->capture_default_str();
  s_recv->add_flag("--redundancy", recv.redundancy, "decode with redundant-copy recovery");

  EvalOpts evalo;
  auto* s_eval = app.add_subcommand("eval", "run an experiment preset and emit the report");
  s_eval->add_option("--preset", evalo.preset, "preset name")->required();
  s_eval->add_option("--out", evalo.out, "output directory")->capture_default_str();
  s_eval->add_option("--seed", evalo.seed, "root seed")->capture_default_str();
  s_eval->add_option("--samples", evalo.samples, "per-cell sample count (0 = preset default)")
      ->capture_default_str();

  GradcheckOpts grad;
  auto* s_grad = app.add_subcommand("gradcheck", "finite-difference audit of feature VJPs");
  s_grad->add_option("--seed", grad.seed, "root seed")->capture_default_str();
  s_grad->add_option("--trials", grad.trials, "number of random waveforms")
      ->capture_default_str();
  s_grad->add_option("--duration", grad.duration, "waveform length in seconds")
      ->capture_default_str();
  s_grad->add_option("--inject-fault", grad.fault, "none or dct-sign (audit self-test)")
      ->capture_default_str();
  s_grad->add_option("--out", grad.out, "optional report directory")->capture_default_str();

  s_synth->callback([&] { run_synth(s_synth, synth); });
  s_train->callback([&] { run_train(s_train, train); });
  s_attack->callback([&] { run_attack(s_attack, attack); });
  s_channel->callback([&] { run_channel(s_channel, channel); });
  s_send->callback([&] { run_send(send); });
  s_recv->callback([&] { run_recv(s_recv, recv); });
  s_eval->callback([&] { run_eval(s_eval, evalo); });
  s_grad->callback([&] { run_gradcheck(s_grad, grad); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ToolUnavailableError& e) {
    std::cerr << "advoice: external tool unavailable: " << e.what() << "\n";
    return kExitToolUnavailable;
  } catch (const Error& e) {
    std::cerr << "advoice: error: " << e.what() << "\n"
              << "(run 'advoice " << (argc > 1 ? argv[1] : "") << " --help' for usage)\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "advoice: unexpected error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
