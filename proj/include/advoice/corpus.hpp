#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "advoice/signal.hpp"

namespace advoice::corpus {

// A synthetic "speaker": glottal pitch, three vocal-tract resonances, and the
// noise/irregularity character of the voice.
struct SpeakerParams {
  std::string id;
  double f0_hz = 0.0;                          // fundamental, in [80, 300]
  std::array<double, 3> formant_freqs_hz{};    // strictly increasing, < 8000
  std::array<double, 3> formant_bandwidths_hz{};
  double jitter_pct = 0.0;     // per-period pitch perturbation, percent
  double breathiness = 0.0;    // aspiration noise mix, in [0, 1]

  void validate() const;  // ConfigError on any violated range or ordering
};

enum class Label { kBonafide, kSpoof };
enum class ArtefactFamily { kNone, kA, kB };
enum class Split { kTrainShadow, kTrainTarget, kEval };

std::string to_string(Label l);
std::string to_string(ArtefactFamily f);
std::string to_string(Split s);
Label label_from_string(const std::string& s);           // FormatError if unknown
ArtefactFamily family_from_string(const std::string& s); // FormatError if unknown

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  Label label = Label::kBonafide;
  ArtefactFamily family = ArtefactFamily::kNone;
  std::string path;  // relative to the corpus root

  bool operator==(const ManifestEntry&) const = default;
};

// One split's worth of utterances.
struct CorpusManifest {
  Split split = Split::kEval;
  std::vector<ManifestEntry> entries;

  std::vector<std::string> speakers() const;  // sorted unique speaker ids
  // Checks id uniqueness and label/family consistency (ConfigError) and that
  // every referenced file exists under root (IoError listing all missing).
  void validate(const std::filesystem::path& root) const;
};

// The full desk dataset: three speaker-disjoint splits rooted at one
// directory.
struct Corpus {
  std::filesystem::path root;
  CorpusManifest shadow;
  CorpusManifest target;
  CorpusManifest eval;

  void validate() const;  // per-split checks plus speaker disjointness
};

struct BuildConfig {
  int n_speakers = 20;
  int utts_per_speaker = 10;
  double duration_s = 1.0;
  std::uint64_t seed = 1;
  // Artefact family used for the target split's spoofs. The shadow split
  // always uses family A; the preset with target_family B reproduces the
  // attacker-trained-on-a-different-algorithm configuration.
  ArtefactFamily target_family = ArtefactFamily::kA;

  void validate() const;  // >= 6 speakers, >= 1 utt, >= 0.5 s, family A or B
};

// Deterministic draw of speaker parameters from fixed ranges.
SpeakerParams synth_speaker(std::uint64_t seed);

// Jittered glottal pulse train through cascaded formant resonators plus
// breath noise, peak-normalized to 0.5. Duration below 0.5 s is an error.
signal::Waveform synth_bonafide(const SpeakerParams& sp, double duration_s, std::uint64_t seed);

// The bonafide signal with a vocoder-style artefact: family A discards phase
// and rebuilds it with 30 Griffin-Lim iterations; family B smooths the
// spectral envelope and randomizes the phase. Same speaker, machine fingerprint.
signal::Waveform synth_spoof(const SpeakerParams& sp, double duration_s, std::uint64_t seed,
                             ArtefactFamily family);

// Synthesizes the full dataset under out_dir (WAV files plus one manifest TSV
// per split) and returns the validated corpus. Deterministic per cfg.seed.
Corpus build_corpus(const BuildConfig& cfg, const std::filesystem::path& out_dir);

// One record per line, tab-separated: id, speaker, label, artefact_family,
// relative path.
void write_manifest(const CorpusManifest& m, const std::filesystem::path& path);

// Parses the TSV format above; malformed lines raise FormatError naming
// "<path>:<line>". Paths resolve against the manifest's directory.
CorpusManifest load_external_manifest(const std::filesystem::path& path,
                                      Split split = Split::kEval);

signal::Waveform load_entry(const std::filesystem::path& root, const ManifestEntry& e);

}  // namespace advoice::corpus
