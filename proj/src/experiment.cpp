#include "advoice/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "advoice/error.hpp"
#include "advoice/prng.hpp"

namespace advoice::eval {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string method_name(attacks::Method m) {
  switch (m) {
    case attacks::Method::kAdvCm: return "advcm";
    case attacks::Method::kAdvSr: return "advsr";
    case attacks::Method::kAdvJoint: return "advjoint";
    case attacks::Method::kCmSpec: return "cmspec";
  }
  throw ConfigError("experiment: unknown attack method");
}

// Shortest decimal form that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw ConfigError("experiment: number formatting failed");
  return std::string(buf, end);
}

double parse_double(std::string_view s, const fs::path& path, int lineno) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" +
                      std::string(s) + "'");
  }
  return v;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  return Prng(root, "experiment").substream(label).next_u64();
}

const System& resolve_system(const SystemSet& systems, const std::string& id) {
  if (id == "shadow") return systems.shadow;
  if (id == "target") return systems.target;
  throw ConfigError("experiment: system id must be 'shadow' or 'target', got '" + id + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Training and enrollment
// ---------------------------------------------------------------------------

SystemConfig::SystemConfig() {
  asv_frontend.mel_low_hz = 300.0;   // telephone band: the attack's channel
  asv_frontend.mel_high_hz = 3400.0;
  asv.projection_dim = 0;  // desk-scale training sets overfit a whitening PCA
  asv.drop_energy = true;  // level-invariant embedding: loudness is not identity
}

System train_system(const corpus::CorpusManifest& split, const fs::path& root,
                    const SystemConfig& cfg) {
  std::vector<features::FeatureMatrix> mfccs, lpms;
  std::vector<std::string> speakers;
  std::vector<int> labels;
  for (const auto& e : split.entries) {
    const signal::Waveform w = corpus::load_entry(root, e);
    lpms.push_back(features::lpms_forward(w, cfg.cm_frontend));
    labels.push_back(e.label == corpus::Label::kSpoof ? 1 : 0);
    if (e.label == corpus::Label::kBonafide) {
      mfccs.push_back(features::mfcc_forward(w, cfg.asv_frontend));
      speakers.push_back(e.speaker_id);
    }
  }
  System sys;
  sys.asv = models::train_asv(mfccs, speakers, cfg.asv_frontend, cfg.asv);
  sys.cm = models::train_cm(lpms, labels, cfg.cm_frontend, cfg.cm);
  return sys;
}

std::map<std::string, corpus::ManifestEntry> enrollment_map(const corpus::Corpus& c) {
  std::map<std::string, corpus::ManifestEntry> out;
  for (const auto* m : {&c.shadow, &c.target, &c.eval}) {
    for (const auto& e : m->entries) {
      if (e.label != corpus::Label::kBonafide) continue;
      if (!out.count(e.speaker_id)) out.emplace(e.speaker_id, e);
    }
  }
  return out;
}

void enroll_all(System& sys, const corpus::Corpus& c) {
  for (const auto& [speaker, entry] : enrollment_map(c)) {
    sys.store.enroll(speaker, corpus::load_entry(c.root, entry), sys.asv);
  }
}

// ---------------------------------------------------------------------------
// Trials and the success-rate metric
// ---------------------------------------------------------------------------

std::vector<Trial> make_trials(const corpus::Corpus& c, int sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw ConfigError("experiment: sample_count must be >= 1");
  const auto enrolled = enrollment_map(c);

  std::vector<const corpus::ManifestEntry*> spoofs;
  std::map<std::string, std::vector<const corpus::ManifestEntry*>> bona_by_speaker;
  for (const auto* m : {&c.shadow, &c.target, &c.eval}) {
    for (const auto& e : m->entries) {
      if (e.label == corpus::Label::kSpoof) {
        spoofs.push_back(&e);
      } else {
        const auto it = enrolled.find(e.speaker_id);
        if (it != enrolled.end() && it->second.utterance_id == e.utterance_id) continue;
        bona_by_speaker[e.speaker_id].push_back(&e);
      }
    }
  }
  if (spoofs.empty()) throw ConfigError("experiment: corpus has no spoof utterances");

  Prng shuffle(seed, "trials");
  for (std::size_t i = spoofs.size(); i > 1; --i) {
    std::swap(spoofs[i - 1], spoofs[shuffle.below(i)]);
  }
  const std::size_t keep = std::min<std::size_t>(spoofs.size(), sample_count);

  std::vector<Trial> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& e = *spoofs[i];
    const auto refs = bona_by_speaker.find(e.speaker_id);
    if (refs == bona_by_speaker.end() || refs->second.empty()) {
      throw ConfigError("experiment: speaker " + e.speaker_id +
                        " has no bonafide reference besides the enrollment utterance");
    }
    // Keyed by utterance id, so the reference pick is independent of batch
    // composition and sample count.
    Prng pick = Prng(seed, "reference").substream(e.utterance_id);
    const auto& ref = *refs->second[pick.below(refs->second.size())];
    Trial t;
    t.utterance_id = e.utterance_id;
    t.claimed_speaker = e.speaker_id;
    t.family = e.family;
    t.spoof = corpus::load_entry(c.root, e);
    t.reference = corpus::load_entry(c.root, ref);
    out.push_back(std::move(t));
  }
  return out;
}

double attack_success_rate(const std::vector<AdversarialTrial>& batch, const System& sys) {
  if (batch.empty()) throw ConfigError("experiment: success rate of an empty batch is undefined");
  int accepted = 0;
  for (const auto& t : batch) {
    if (!sys.store.contains(t.claimed_speaker)) {
      throw ConfigError("experiment: claimed speaker " + t.claimed_speaker + " is not enrolled");
    }
    accepted += models::decide(sys.asv, sys.cm, sys.store, t.claimed_speaker, t.audio)
                    .joint_accept();
  }
  return static_cast<double>(accepted) / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Spec and report validation
// ---------------------------------------------------------------------------

void ExperimentSpec::validate() const {
  if (shadow_id != "shadow" && shadow_id != "target") {
    throw ConfigError("experiment: shadow_id must be 'shadow' or 'target'");
  }
  if (target_id != "shadow" && target_id != "target") {
    throw ConfigError("experiment: target_id must be 'shadow' or 'target'");
  }
  if (epsilons.empty()) throw ConfigError("experiment: epsilon grid is empty");
  bool has_zero = false;
  for (double e : epsilons) {
    if (!(e >= 0.0) || !std::isfinite(e)) {
      throw ConfigError("experiment: epsilons must be finite and >= 0");
    }
    if (e == 0.0) has_zero = true;
  }
  if (!has_zero) throw ConfigError("experiment: the epsilon grid must contain the 0 baseline");
  if (sample_count < 1) throw ConfigError("experiment: sample_count must be >= 1");
  if (!(step_fraction >= 0.0 && step_fraction <= 1.0)) {
    throw ConfigError("experiment: step_fraction must be in [0, 1] (alpha cannot exceed epsilon)");
  }
  if (codec_aware && !channel) {
    throw ConfigError("experiment: codec-aware crafting needs a channel configuration");
  }
  if (channel) channel->validate();
}

void EvalReport::validate() const {
  if (std::find(epsilons.begin(), epsilons.end(), 0.0) == epsilons.end()) {
    throw ConfigError("experiment report: epsilon 0 baseline column missing");
  }
  for (const auto& row : rows) {
    if (row.rates.size() != epsilons.size()) {
      throw ConfigError("experiment report: row '" + row.label + "' is not rectangular");
    }
    for (double r : row.rates) {
      if (!(r >= 0.0 && r <= 1.0)) {
        throw ConfigError("experiment report: rate outside [0, 1] in row '" + row.label + "'");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Grid execution
// ---------------------------------------------------------------------------

namespace {

std::string row_suffix(const ExperimentSpec& spec) {
  std::string s = " " + spec.shadow_id + "->" + spec.target_id;
  if (spec.channel) s += spec.codec_aware ? " (channel, codec-aware)" : " (channel)";
  return s;
}

// Crafting seed and channel seed for one grid cell, keyed so parallel rows
// with equal spec seeds stay sample-paired.
std::uint64_t cell_seed(std::uint64_t root, const char* what, std::size_t eps_index,
                        std::size_t trial_index) {
  const std::string label =
      std::string(what) + "-e" + std::to_string(eps_index) + "-t" + std::to_string(trial_index);
  return Prng(root, "cells").substream(label).next_u64();
}

signal::Waveform judged_view(const signal::Waveform& w, const ExperimentSpec& spec,
                             std::size_t eps_index, std::size_t trial_index) {
  if (!spec.channel) return w;
  channel::ChannelConfig cfg = *spec.channel;
  cfg.seed = cell_seed(spec.seed, "channel", eps_index, trial_index);
  return channel::apply_channel(w, cfg);
}

// Each method's row reports acceptance by the subsystem it attacks: the CM
// for advcm, the ASV for advsr, and the conjunction for advjoint — the same
// semantics the attack tables use.
bool row_success(attacks::Method m, const models::Verdict& v) {
  switch (m) {
    case attacks::Method::kAdvCm: return v.cm_accept;
    case attacks::Method::kAdvSr: return v.asv_accept;
    default: return v.joint_accept();
  }
}

EvalReport run_time_domain(const ExperimentSpec& spec, const std::vector<Trial>& trials,
                           const System& crafter, const System& judge) {
  EvalReport report;
  report.epsilons = spec.epsilons;
  ReportRow row;
  row.label = method_name(spec.method) + row_suffix(spec);

  // Crafting from the judged system itself means full knowledge, voiceprints
  // included, so the verifier-side attacks descend straight toward the
  // enrollment utterance; a transfer row only gets a non-enrollment bonafide.
  const bool self_transfer = spec.shadow_id == spec.target_id;

  for (std::size_t e = 0; e < spec.epsilons.size(); ++e) {
    const double eps = spec.epsilons[e];
    int accepted = 0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const Trial& t = trials[i];
      const signal::Waveform& reference =
          self_transfer ? crafter.store.at(t.claimed_speaker).enrollment : t.reference;
      signal::Waveform adv;
      if (eps == 0.0) {
        adv = t.spoof;  // baseline: the unperturbed spoof, no attack invoked
      } else {
        attacks::AttackConfig acfg = spec.attack;
        acfg.method = spec.method;
        acfg.epsilon = eps;
        if (spec.step_fraction > 0.0) acfg.alpha = spec.step_fraction * eps;
        acfg.seed = cell_seed(spec.seed, "attack", e, i);
        const auto craft = [&](const signal::Waveform& x) {
          switch (spec.method) {
            case attacks::Method::kAdvCm:
              return attacks::advcm(crafter.cm, crafter.cm.frontend, x, acfg);
            case attacks::Method::kAdvSr:
              return attacks::advsr(crafter.asv, crafter.asv.frontend, x, reference, acfg);
            case attacks::Method::kAdvJoint:
              return attacks::advjoint(crafter.cm, crafter.asv, crafter.cm.frontend,
                                       crafter.asv.frontend, x, reference, acfg);
            default:
              throw ConfigError("experiment: cmspec has no time-domain crafting path");
          }
        };
        if (spec.codec_aware) {
          adv = channel::codec_aware_craft(craft, t.spoof, eps, *spec.channel);
        } else {
          adv = craft(t.spoof).adversarial;
        }
      }
      const signal::Waveform scored = judged_view(adv, spec, e, i);
      const models::Verdict v =
          models::decide(judge.asv, judge.cm, judge.store, t.claimed_speaker, scored);
      accepted += row_success(spec.method, v);
    }
    row.rates.push_back(static_cast<double>(accepted) / static_cast<double>(trials.size()));
  }
  report.rows.push_back(std::move(row));
  return report;
}

// cmspec attacks the countermeasure alone, so its two rows report CM-only
// acceptance: once on the perturbed features, once after waveform
// reconstruction with the original phase.
EvalReport run_cmspec(const ExperimentSpec& spec, const std::vector<Trial>& trials,
                      const System& crafter, const System& judge) {
  EvalReport report;
  report.epsilons = spec.epsilons;
  ReportRow direct, recon;
  direct.label = "cmspec-direct" + row_suffix(spec);
  recon.label = "cmspec-recon" + row_suffix(spec);

  for (std::size_t e = 0; e < spec.epsilons.size(); ++e) {
    const double eps = spec.epsilons[e];
    int direct_acc = 0, recon_acc = 0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const Trial& t = trials[i];
      bool direct_ok = false;
      signal::Waveform reconstructed;
      if (eps == 0.0) {
        const auto feats = features::lpms_forward(t.spoof, crafter.cm.frontend);
        direct_ok = models::cm_accept(crafter.cm, models::cm_score(crafter.cm, feats));
        reconstructed = t.spoof;  // the epsilon-0 reconstruction is exact
      } else {
        attacks::AttackConfig acfg = spec.attack;
        acfg.method = attacks::Method::kCmSpec;
        acfg.epsilon = eps;
        if (spec.step_fraction > 0.0) acfg.alpha = spec.step_fraction * eps;
        acfg.seed = cell_seed(spec.seed, "attack", e, i);
        auto res = attacks::cmspec(crafter.cm, crafter.cm.frontend, t.spoof, acfg);
        direct_ok = res.direct_accept;
        reconstructed = std::move(res.reconstructed);
      }
      direct_acc += direct_ok;
      const signal::Waveform scored = judged_view(reconstructed, spec, e, i);
      const auto feats = features::lpms_forward(scored, judge.cm.frontend);
      recon_acc += models::cm_accept(judge.cm, models::cm_score(judge.cm, feats));
    }
    direct.rates.push_back(static_cast<double>(direct_acc) / static_cast<double>(trials.size()));
    recon.rates.push_back(static_cast<double>(recon_acc) / static_cast<double>(trials.size()));
  }
  report.rows.push_back(std::move(direct));
  report.rows.push_back(std::move(recon));
  return report;
}

}  // namespace

EvalReport run_experiment(const ExperimentSpec& spec, const corpus::Corpus& c,
                          const SystemSet& systems) {
  const auto start = std::chrono::steady_clock::now();
  spec.validate();
  const System& crafter = resolve_system(systems, spec.shadow_id);
  const System& judge = resolve_system(systems, spec.target_id);

  const std::vector<Trial> trials = make_trials(c, spec.sample_count, spec.seed);

  EvalReport report = spec.method == attacks::Method::kCmSpec
                          ? run_cmspec(spec, trials, crafter, judge)
                          : run_time_domain(spec, trials, crafter, judge);
  if (spec.black_box && spec.shadow_id == spec.target_id) {
    report.warnings.push_back("black-box spec crafts and judges the same system (" +
                              spec.shadow_id + ")");
  }
  report.specs.push_back(spec);
  report.validate();
  report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

EvalReport run_grid(const std::vector<ExperimentSpec>& specs, const corpus::Corpus& c,
                    const SystemSet& systems) {
  if (specs.empty()) throw ConfigError("experiment: grid needs at least one spec");
  for (const auto& s : specs) {
    if (s.epsilons != specs.front().epsilons) {
      throw ConfigError("experiment: grid rows must share one epsilon column set");
    }
  }
  EvalReport combined;
  combined.epsilons = specs.front().epsilons;
  for (const auto& s : specs) {
    EvalReport part = run_experiment(s, c, systems);
    for (auto& row : part.rows) combined.rows.push_back(std::move(row));
    for (auto& w : part.warnings) combined.warnings.push_back(std::move(w));
    combined.specs.push_back(s);
    combined.runtime_s += part.runtime_s;
  }
  combined.validate();
  return combined;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"whitebox-grid", "blackbox-grid", "telephony-grid", "appendixB-grid", "cmspec-grid"};
}

Preset make_preset(const std::string& name, std::uint64_t seed) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string all;
    for (const auto& n : names) all += (all.empty() ? "" : ", ") + n;
    throw ConfigError("experiment: unknown preset '" + name + "'; available: " + all);
  }

  Preset p;
  p.name = name;
  p.corpus_cfg.seed = seed;
  p.shadow_cfg.asv.seed = derive_seed(seed, "shadow-asv");
  p.shadow_cfg.cm.seed = derive_seed(seed, "shadow-cm");
  p.target_cfg.asv.seed = derive_seed(seed, "target-asv");
  p.target_cfg.cm.seed = derive_seed(seed, "target-cm");

  const auto base_row = [&](attacks::Method m, const char* label) {
    ExperimentSpec s;
    s.method = m;
    s.attack.iterations = 50;
    s.seed = derive_seed(seed, label);
    return s;
  };

  if (name == "whitebox-grid") {
    for (auto m : {attacks::Method::kAdvCm, attacks::Method::kAdvSr, attacks::Method::kAdvJoint}) {
      ExperimentSpec s = base_row(m, method_name(m).c_str());
      s.shadow_id = s.target_id = "shadow";
      s.attack.early_stop = true;  // saturation, not transfer: stop at the flip
      // A verifier-side attacker can afford to polish: fine steps with a large
      // budget settle near the ball optimum; the early stop keeps the common
      // case cheap.
      s.attack.iterations = 300;
      s.step_fraction = 1.0 / 30.0;
      // The CM operates in log-power nats and its gradients dwarf the cosine
      // loss's by orders of magnitude; this weight hands most sign-step
      // coordinates to the ASV objective, and the few the CM keeps are enough
      // to flip it (joint acceptance then tracks the pure ASV attack).
      s.attack.lambda_asv = 1e5;
      p.rows.push_back(std::move(s));
    }
  } else if (name == "blackbox-grid") {
    for (auto m : {attacks::Method::kAdvCm, attacks::Method::kAdvSr, attacks::Method::kAdvJoint}) {
      ExperimentSpec s = base_row(m, method_name(m).c_str());
      s.black_box = true;
      p.rows.push_back(std::move(s));
    }
  } else if (name == "telephony-grid") {
    channel::ChannelConfig ch;
    ch.loss_rate = 0.02;
    ch.redundancy = true;
    for (bool aware : {false, true}) {
      ExperimentSpec s = base_row(attacks::Method::kAdvJoint, "telephony");
      s.black_box = true;
      s.channel = ch;
      s.codec_aware = aware;  // same seed for both rows: sample-paired
      p.rows.push_back(std::move(s));
    }
  } else if (name == "appendixB-grid") {
    p.corpus_cfg.target_family = corpus::ArtefactFamily::kB;
    ExperimentSpec s = base_row(attacks::Method::kAdvJoint, "appendixB");
    s.black_box = true;
    p.rows.push_back(std::move(s));
  } else {  // cmspec-grid: the epsilon columns are log-power feature units
    ExperimentSpec s = base_row(attacks::Method::kCmSpec, "cmspec");
    s.shadow_id = s.target_id = "shadow";
    s.epsilons = {0.0, 0.5, 1.0, 2.0, 4.0};
    p.rows.push_back(std::move(s));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

namespace {

json channel_to_json(const channel::ChannelConfig& c) {
  return json{{"codec", c.codec == channel::Codec::kSurrogate ? "surrogate" : "external"},
              {"loss_rate", c.loss_rate},
              {"redundancy", c.redundancy},
              {"seed", c.seed},
              {"frame_ms", c.frame_ms},
              {"external_encoder", c.external_encoder},
              {"external_decoder", c.external_decoder}};
}

json spec_to_json(const ExperimentSpec& s) {
  json j{{"shadow", s.shadow_id},
         {"target", s.target_id},
         {"method", method_name(s.method)},
         {"epsilons", s.epsilons},
         {"codec_aware", s.codec_aware},
         {"black_box", s.black_box},
         {"sample_count", s.sample_count},
         {"seed", s.seed},
         {"step_fraction", s.step_fraction},
         {"attack",
          {{"alpha", s.attack.alpha},
           {"iterations", s.attack.iterations},
           {"lambda_cm", s.attack.lambda_cm},
           {"lambda_asv", s.attack.lambda_asv},
           {"early_stop", s.attack.early_stop}}}};
  j["channel"] = s.channel ? channel_to_json(*s.channel) : json();
  return j;
}

}  // namespace

void emit_report(const EvalReport& r, const fs::path& csv_path, const fs::path& sidecar_path) {
  r.validate();

  std::ostringstream csv;
  csv << "config";
  for (double e : r.epsilons) csv << ",eps=" << format_double(e);
  csv << '\n';
  for (const auto& row : r.rows) {
    csv << row.label;
    for (double rate : row.rates) csv << ',' << format_double(rate);
    csv << '\n';
  }
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + csv_path.string());
  out << csv.str();
  if (!out) throw IoError("write failed: " + csv_path.string());
  out.close();

  json rows = json::array();
  for (const auto& row : r.rows) rows.push_back(json{{"label", row.label}, {"rates", row.rates}});
  json specs = json::array();
  for (const auto& s : r.specs) specs.push_back(spec_to_json(s));
  const json sidecar{{"format_version", 1},
                     {"epsilons", r.epsilons},
                     {"rows", rows},
                     {"warnings", r.warnings},
                     {"specs", specs}};
  std::ofstream side(sidecar_path, std::ios::binary);
  if (!side) throw IoError("cannot open for write: " + sidecar_path.string());
  side << sidecar.dump(2) << '\n';
  if (!side) throw IoError("write failed: " + sidecar_path.string());
}

ParsedGrid parse_report_csv(const fs::path& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + csv_path.string());
  std::string line;
  ParsedGrid grid;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (lineno == 1) {
      if (cells.empty() || cells[0] != "config") {
        throw FormatError(csv_path.string() + ":1: expected a 'config' header column");
      }
      for (std::size_t k = 1; k < cells.size(); ++k) {
        if (cells[k].rfind("eps=", 0) != 0) {
          throw FormatError(csv_path.string() + ":1: malformed epsilon header '" + cells[k] + "'");
        }
        grid.epsilons.push_back(parse_double(cells[k].substr(4), csv_path, lineno));
      }
      continue;
    }
    if (cells.size() != grid.epsilons.size() + 1) {
      throw FormatError(csv_path.string() + ":" + std::to_string(lineno) +
                        ": wrong number of columns");
    }
    ReportRow row;
    row.label = cells[0];
    for (std::size_t k = 1; k < cells.size(); ++k) {
      row.rates.push_back(parse_double(cells[k], csv_path, lineno));
    }
    grid.rows.push_back(std::move(row));
  }
  if (grid.epsilons.empty()) throw FormatError(csv_path.string() + ": empty report");
  return grid;
}

}  // namespace advoice::eval
