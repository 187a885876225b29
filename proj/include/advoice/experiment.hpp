#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "advoice/attacks.hpp"
#include "advoice/channel.hpp"
#include "advoice/corpus.hpp"
#include "advoice/metrics.hpp"
#include "advoice/models.hpp"

namespace advoice::eval {

// ---------------------------------------------------------------------------
// Trained verification stacks (one ASV + one CM + enrolled voiceprints).
// ---------------------------------------------------------------------------

struct SystemConfig {
  features::ExtractorConfig asv_frontend;  // telephone band (300-3400 Hz mel)
  features::ExtractorConfig cm_frontend;   // full-band LPMS
  models::AsvTrainConfig asv;              // projection_dim 0: raw stats vector
  models::CmTrainConfig cm;

  SystemConfig();
};

struct System {
  models::AsvModel asv;
  models::CmModel cm;
  models::VoiceprintStore store;  // victims enrolled against this ASV
};

// Trains the ASV on the split's bonafide utterances (speaker labels) and the
// CM on bonafide-vs-spoof; the voiceprint store starts empty.
System train_system(const corpus::CorpusManifest& split, const std::filesystem::path& root,
                    const SystemConfig& cfg);

// Enrollment policy: every speaker's first bonafide utterance in manifest
// order (splits scanned shadow, target, eval). Keyed by speaker id.
std::map<std::string, corpus::ManifestEntry> enrollment_map(const corpus::Corpus& c);

// Enrolls every speaker of the corpus into sys.store under the policy above.
void enroll_all(System& sys, const corpus::Corpus& c);

// ---------------------------------------------------------------------------
// Attack batches and the success-rate metric.
// ---------------------------------------------------------------------------

// One spoofed utterance claiming its source speaker, with a bonafide
// reference of that speaker for the verifier-side attacks.
struct Trial {
  std::string utterance_id;
  std::string claimed_speaker;
  corpus::ArtefactFamily family = corpus::ArtefactFamily::kNone;
  signal::Waveform spoof;
  signal::Waveform reference;  // non-enrollment bonafide of the claimed speaker
};

// Deterministic batch: all spoof entries of the corpus (manifest order,
// splits shadow/target/eval), seeded shuffle, first min(sample_count, total)
// kept. The reference is a seeded pick among the claimed speaker's bonafides
// excluding the enrollment utterance.
std::vector<Trial> make_trials(const corpus::Corpus& c, int sample_count, std::uint64_t seed);

struct AdversarialTrial {
  signal::Waveform audio;
  std::string claimed_speaker;
};

// Fraction of the batch the joint system accepts (ASV and CM must both
// accept). ConfigError on an empty batch or an unenrolled claimed speaker.
double attack_success_rate(const std::vector<AdversarialTrial>& batch, const System& sys);

// ---------------------------------------------------------------------------
// Experiment grid.
// ---------------------------------------------------------------------------

struct ExperimentSpec {
  std::string shadow_id = "shadow";  // which system crafts: "shadow" or "target"
  std::string target_id = "target";  // which system judges
  attacks::Method method = attacks::Method::kAdvJoint;
  std::vector<double> epsilons{0.0, 0.001, 0.003, 0.005, 0.007};
  attacks::AttackConfig attack;  // epsilon/method overwritten per grid cell
  // When > 0, each cell's step size is step_fraction * epsilon; 0 keeps the
  // attack default (epsilon/10). Finer steps settle closer to the ball optimum
  // at the cost of more iterations.
  double step_fraction = 0.0;
  std::optional<channel::ChannelConfig> channel;  // judging-side channel
  bool codec_aware = false;  // craft against the loss-free surrogate codec
  bool black_box = false;    // declared intent; shadow==target then warns
  int sample_count = 200;
  std::uint64_t seed = 1;

  void validate() const;  // ConfigError on empty/negative grids or bad ids
};

struct ReportRow {
  std::string label;
  std::vector<double> rates;  // parallel to the report's epsilon columns
};

struct EvalReport {
  std::vector<double> epsilons;
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;
  std::vector<ExperimentSpec> specs;  // one per contributing spec, in order
  double runtime_s = 0.0;  // in-memory only; never written to report files

  void validate() const;  // rates in [0,1], grid rectangular, eps 0 present
};

struct SystemSet {
  System shadow;
  System target;
};

// Runs one spec: for every epsilon, craft with the crafting system's models
// (epsilon 0 leaves the spoof untouched), pass through the channel when
// configured, and score the judged fraction accepted. Time-domain methods
// yield one row; cmspec yields a direct-acceptance and a reconstructed row.
EvalReport run_experiment(const ExperimentSpec& spec, const corpus::Corpus& c,
                          const SystemSet& systems);

// Concatenates the rows of several specs sharing one epsilon grid.
EvalReport run_grid(const std::vector<ExperimentSpec>& specs, const corpus::Corpus& c,
                    const SystemSet& systems);

// ---------------------------------------------------------------------------
// Presets.
// ---------------------------------------------------------------------------

struct Preset {
  std::string name;
  corpus::BuildConfig corpus_cfg;
  SystemConfig shadow_cfg;  // differently seeded from target_cfg
  SystemConfig target_cfg;
  std::vector<ExperimentSpec> rows;
};

std::vector<std::string> preset_names();

// ConfigError listing the valid names when unknown. The root seed feeds the
// corpus, both training configs, and every row's crafting seed.
Preset make_preset(const std::string& name, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Report files: CSV grid plus a JSON sidecar with the full configuration.
// Both are deterministic functions of the report (runtime is not written).
// ---------------------------------------------------------------------------

void emit_report(const EvalReport& r, const std::filesystem::path& csv_path,
                 const std::filesystem::path& sidecar_path);

struct ParsedGrid {
  std::vector<double> epsilons;
  std::vector<ReportRow> rows;
};

// Reads back an emitted CSV; numbers round-trip exactly (shortest-form
// serialization both ways).
ParsedGrid parse_report_csv(const std::filesystem::path& csv_path);

}  // namespace advoice::eval
