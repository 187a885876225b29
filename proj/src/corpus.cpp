#include "advoice/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "advoice/error.hpp"
#include "advoice/features.hpp"
#include "advoice/prng.hpp"

namespace advoice::corpus {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string speaker_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%03d", index);
  return buf;
}

void peak_normalize(std::vector<double>& v, double peak) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  if (m <= 0.0) throw ConfigError("synthesis produced a silent signal");
  const double g = peak / m;
  for (double& x : v) x *= g;
}

// Two-pole resonator at (freq, bandwidth), applied in place.
void resonate(std::vector<double>& v, double freq_hz, double bw_hz, int fs) {
  const double r = std::exp(-kPi * bw_hz / fs);
  const double a1 = 2.0 * r * std::cos(2.0 * kPi * freq_hz / fs);
  const double a2 = -r * r;
  const double g = 1.0 - r;
  double y1 = 0.0, y2 = 0.0;
  for (double& x : v) {
    const double y = g * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    x = y;
  }
}

}  // namespace

void SpeakerParams::validate() const {
  if (id.empty()) throw ConfigError("speaker: empty id");
  if (!(f0_hz >= 80.0 && f0_hz <= 300.0))
    throw ConfigError("speaker: f0 must lie in [80, 300] Hz");
  double prev = 0.0;
  for (double f : formant_freqs_hz) {
    if (!(f > prev && f < 8000.0))
      throw ConfigError("speaker: formants must be strictly increasing and below 8000 Hz");
    prev = f;
  }
  for (double b : formant_bandwidths_hz) {
    if (!(b > 0.0)) throw ConfigError("speaker: formant bandwidths must be positive");
  }
  if (!(jitter_pct >= 0.0)) throw ConfigError("speaker: jitter must be non-negative");
  if (!(breathiness >= 0.0 && breathiness <= 1.0))
    throw ConfigError("speaker: breathiness must lie in [0, 1]");
}

std::string to_string(Label l) { return l == Label::kBonafide ? "bonafide" : "spoof"; }

std::string to_string(ArtefactFamily f) {
  switch (f) {
    case ArtefactFamily::kA: return "A";
    case ArtefactFamily::kB: return "B";
    default: return "none";
  }
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrainShadow: return "train_shadow";
    case Split::kTrainTarget: return "train_target";
    default: return "eval";
  }
}

Label label_from_string(const std::string& s) {
  if (s == "bonafide") return Label::kBonafide;
  if (s == "spoof") return Label::kSpoof;
  throw FormatError("unknown label '" + s + "'");
}

ArtefactFamily family_from_string(const std::string& s) {
  if (s == "A") return ArtefactFamily::kA;
  if (s == "B") return ArtefactFamily::kB;
  if (s == "none") return ArtefactFamily::kNone;
  throw FormatError("unknown artefact family '" + s + "'");
}

std::vector<std::string> CorpusManifest::speakers() const {
  std::set<std::string> ids;
  for (const auto& e : entries) ids.insert(e.speaker_id);
  return {ids.begin(), ids.end()};
}

void CorpusManifest::validate(const fs::path& root) const {
  std::set<std::string> ids;
  std::string missing;
  for (const auto& e : entries) {
    if (!ids.insert(e.utterance_id).second)
      throw ConfigError("manifest: duplicate utterance id '" + e.utterance_id + "'");
    const bool spoofed = e.label == Label::kSpoof;
    if (spoofed != (e.family != ArtefactFamily::kNone))
      throw ConfigError("manifest: entry '" + e.utterance_id +
                        "': spoof entries need artefact family A or B, bonafide entries none");
    if (!fs::exists(root / e.path)) missing += "\n  " + (root / e.path).string();
  }
  if (!missing.empty()) throw IoError("manifest: missing audio files:" + missing);
}

void Corpus::validate() const {
  shadow.validate(root);
  target.validate(root);
  eval.validate(root);
  auto a = shadow.speakers(), b = target.speakers(), c = eval.speakers();
  auto overlap = [](const std::vector<std::string>& x, const std::vector<std::string>& y) {
    std::vector<std::string> out;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
    return !out.empty();
  };
  if (overlap(a, b) || overlap(a, c) || overlap(b, c))
    throw ConfigError("corpus: splits must be speaker-disjoint");
}

void BuildConfig::validate() const {
  if (n_speakers < 6) throw ConfigError("corpus: need at least 6 speakers for disjoint splits");
  if (utts_per_speaker < 1) throw ConfigError("corpus: need at least 1 utterance per speaker");
  if (duration_s < 0.5) throw ConfigError("corpus: utterance duration must be at least 0.5 s");
  if (target_family == ArtefactFamily::kNone)
    throw ConfigError("corpus: target artefact family must be A or B");
}

SpeakerParams synth_speaker(std::uint64_t seed) {
  Prng rng(seed, "speaker");
  SpeakerParams sp;
  sp.id = "spk-" + std::to_string(seed);
  sp.f0_hz = rng.uniform(80.0, 300.0);
  const double f1 = rng.uniform(300.0, 900.0);
  const double f2 = f1 + rng.uniform(400.0, 1400.0);
  const double f3 = f2 + rng.uniform(500.0, 1700.0);
  sp.formant_freqs_hz = {f1, f2, f3};
  sp.formant_bandwidths_hz = {rng.uniform(60.0, 120.0), rng.uniform(80.0, 160.0),
                              rng.uniform(100.0, 220.0)};
  sp.jitter_pct = rng.uniform(0.5, 2.0);
  sp.breathiness = rng.uniform(0.03, 0.08);
  sp.validate();
  return sp;
}

// session_spread scales the per-take parameter drift: 1 is a normal field
// recording, 0 a controlled take at the speaker's nominal voice (used by
// generate() for each speaker's enrollment utterance). The random draws happen
// regardless so the other substreams stay aligned across spread values.
static signal::Waveform synth_bonafide_scaled(const SpeakerParams& sp, double duration_s,
                                              std::uint64_t seed, double session_spread) {
  sp.validate();
  if (duration_s < 0.5) throw ConfigError("corpus: utterance duration must be at least 0.5 s");
  const int fs = signal::kCanonicalRateHz;
  const int n = static_cast<int>(std::lround(duration_s * fs));

  Prng rng(seed, "utt");
  Prng session = rng.substream("session");
  Prng source = rng.substream("source");
  Prng breath = rng.substream("breath");

  // Per-utterance session drift keeps utterances of one speaker distinct
  // without moving the voice off its identity.
  const double f0 = sp.f0_hz * (1.0 + session_spread * (session.uniform(0.94, 1.06) - 1.0));
  std::array<double, 3> freqs{};
  for (int i = 0; i < 3; ++i)
    freqs[i] = sp.formant_freqs_hz[i] * (1.0 + session_spread * (session.uniform(0.96, 1.04) - 1.0));

  // Band-limited sawtooth-like glottal source with per-period jitter. The
  // source stops at a fixed cutoff well below Nyquist, so natural speech
  // carries only the formant-filtered noise tail up there; vocoder round
  // trips, by contrast, leave a broadband reconstruction-error floor.
  constexpr double kSourceCutoffHz = 5000.0;
  std::vector<double> v(static_cast<std::size_t>(n));
  double phase = 0.0;
  double f_cur = f0;
  for (int i = 0; i < n; ++i) {
    const int harmonics =
        std::max(1, std::min(static_cast<int>(kSourceCutoffHz / f_cur), 40));
    double s = 0.0;
    for (int k = 1; k <= harmonics; ++k) s += std::sin(2.0 * kPi * k * phase) / k;
    v[static_cast<std::size_t>(i)] = s + 0.8 * sp.breathiness * breath.normal();
    phase += f_cur / fs;
    if (phase >= 1.0) {
      phase -= 1.0;
      f_cur = f0 * (1.0 + sp.jitter_pct / 100.0 * source.normal());
      f_cur = std::clamp(f_cur, 60.0, 400.0);
    }
  }

  for (int i = 0; i < 3; ++i) resonate(v, freqs[i], sp.formant_bandwidths_hz[i], fs);

  // Syllable-like amplitude envelope: a slow raised-cosine train with a
  // nonzero floor, so the take breathes like speech and carries quiet frames
  // (the floor keeps them above the feature log floor).
  Prng envelope = rng.substream("envelope");
  const double syllable_hz = envelope.uniform(2.5, 4.5);
  const double syllable_phase = envelope.uniform(0.0, 1.0);
  const double envelope_floor = envelope.uniform(0.08, 0.15);
  for (int i = 0; i < n; ++i) {
    const double c =
        0.5 - 0.5 * std::cos(2.0 * kPi * (syllable_hz * i / fs + syllable_phase));
    v[static_cast<std::size_t>(i)] *= envelope_floor + (1.0 - envelope_floor) * c;
  }
  peak_normalize(v, 0.5);

  // Fixed-level recording hiss in a narrow band above the source cutoff.
  // Every take shares the same high-band noise floor regardless of the voice,
  // which is where vocoder round trips betray themselves: their overlap-add
  // reconstruction error shifts that otherwise constant reference level.
  Prng mic = rng.substream("mic");
  std::vector<double> hiss(static_cast<std::size_t>(n));
  for (double& h : hiss) h = mic.normal();
  resonate(hiss, 5800.0, 800.0, fs);
  resonate(hiss, 6600.0, 800.0, fs);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] += 0.01 * hiss[static_cast<std::size_t>(i)];
  peak_normalize(v, 0.5);

  signal::Waveform w;
  w.samples = std::move(v);
  w.sample_rate_hz = fs;
  return w;
}

signal::Waveform synth_bonafide(const SpeakerParams& sp, double duration_s, std::uint64_t seed) {
  return synth_bonafide_scaled(sp, duration_s, seed, 1.0);
}

static signal::Waveform synth_spoof_scaled(const SpeakerParams& sp, double duration_s,
                                           std::uint64_t seed, ArtefactFamily family,
                                           double session_spread) {
  if (family == ArtefactFamily::kNone)
    throw ConfigError("corpus: spoof synthesis needs artefact family A or B");
  signal::Waveform x = synth_bonafide_scaled(sp, duration_s, seed, session_spread);
  const std::size_t n = x.samples.size();

  // Vocoder grid: 50% overlap leaves the phase estimate under-determined, so
  // the round trip smears energy into the inter-harmonic troughs -- a
  // fingerprint the fine-grained spectrum shows clearly while the mel-pooled
  // envelope (the speaker identity) barely moves.
  features::ExtractorConfig fe;
  fe.frame_len = 512;
  fe.hop = 320;
  fe.fft_size = 512;

  // Reflect-pad before analysis and trim after synthesis: overlap-add divides
  // by the squared analysis window, which is near zero at the signal edges,
  // so inconsistent spectrograms (re-estimated or jittered phase) blow up
  // there. The pad keeps that instability outside the retained span.
  const std::size_t pad = 2 * static_cast<std::size_t>(fe.frame_len);
  signal::Waveform xp;
  xp.sample_rate_hz = x.sample_rate_hz;
  xp.samples.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) xp.samples.push_back(x.samples[i]);
  xp.samples.insert(xp.samples.end(), x.samples.begin(), x.samples.end());
  for (std::size_t i = 2; i <= pad + 1; ++i) xp.samples.push_back(x.samples[n - i]);

  auto spec = features::stft(xp, fe);

  signal::Waveform y;
  if (family == ArtefactFamily::kA) {
    // Magnitude-only round trip: the phase is discarded and re-estimated.
    y = features::griffin_lim(spec.magnitude, fe, 30).waveform;
  } else {
    // Envelope smoothing (moving average over frequency) plus random phase.
    // The smoothing stays narrow so the mel envelope -- the speaker identity
    // -- survives; the incoherent overlap-add is the machine fingerprint.
    features::RealMatrix smooth(spec.magnitude.rows, spec.magnitude.cols);
    const int half = 1;
    for (int f = 0; f < smooth.rows; ++f) {
      for (int b = 0; b < smooth.cols; ++b) {
        const int lo = std::max(0, b - half);
        const int hi = std::min(smooth.cols - 1, b + half);
        double acc = 0.0;
        for (int k = lo; k <= hi; ++k) acc += spec.magnitude.at(f, k);
        smooth.at(f, b) = acc / (hi - lo + 1);
      }
    }
    Prng prng(seed, "spoof-b");
    features::RealMatrix ph = spec.phase;
    for (double& p : ph.v) p += prng.uniform(-1.5, 1.5);
    y = features::reconstruct_with_phase(smooth, ph, fe);
  }

  y.samples = std::vector<double>(y.samples.begin() + static_cast<std::ptrdiff_t>(pad),
                                  y.samples.begin() + static_cast<std::ptrdiff_t>(pad + n));
  peak_normalize(y.samples, 0.5);
  y.sample_rate_hz = x.sample_rate_hz;
  return y;
}

signal::Waveform synth_spoof(const SpeakerParams& sp, double duration_s, std::uint64_t seed,
                             ArtefactFamily family) {
  return synth_spoof_scaled(sp, duration_s, seed, family, 1.0);
}

Corpus build_corpus(const BuildConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir / "wav");

  Prng root(cfg.seed, "corpus");
  Prng speaker_seeds = root.substream("speaker-seeds");
  Prng utt_seeds = root.substream("utt-seeds");

  const int n_shadow = std::max(2, 3 * cfg.n_speakers / 10);
  const int n_target = std::max(2, 3 * cfg.n_speakers / 10);

  Corpus c;
  c.root = out_dir;
  c.shadow.split = Split::kTrainShadow;
  c.target.split = Split::kTrainTarget;
  c.eval.split = Split::kEval;

  for (int i = 0; i < cfg.n_speakers; ++i) {
    SpeakerParams sp = synth_speaker(speaker_seeds.next_u64());
    sp.id = speaker_id(i);
    CorpusManifest* split = i < n_shadow                ? &c.shadow
                            : i < n_shadow + n_target   ? &c.target
                                                        : &c.eval;
    fs::create_directories(out_dir / "wav" / sp.id);

    for (int j = 0; j < cfg.utts_per_speaker; ++j) {
      const std::uint64_t useed = utt_seeds.next_u64();
      ArtefactFamily fam;
      if (split == &c.shadow) {
        fam = ArtefactFamily::kA;
      } else if (split == &c.target) {
        fam = cfg.target_family;
      } else {
        fam = (j % 2 == 0) ? ArtefactFamily::kA : ArtefactFamily::kB;
      }

      const std::string bona_id = sp.id + "-b" + std::to_string(j);
      const std::string spoof_id = sp.id + "-s" + to_string(fam) + std::to_string(j);
      const std::string bona_rel = "wav/" + sp.id + "/" + bona_id + ".wav";
      const std::string spoof_rel = "wav/" + sp.id + "/" + spoof_id + ".wav";

      // Utterance 0 is each speaker's enrollment take: recorded in a
      // controlled session at the speaker's nominal voice, so enrollment
      // never lands on a drift outlier. Its paired spoof is the clone of
      // that same controlled take.
      const double spread = (j == 0) ? 0.0 : 1.0;
      signal::write_wav(synth_bonafide_scaled(sp, cfg.duration_s, useed, spread),
                        out_dir / bona_rel);
      signal::write_wav(synth_spoof_scaled(sp, cfg.duration_s, useed, fam, spread),
                        out_dir / spoof_rel);

      split->entries.push_back({bona_id, sp.id, Label::kBonafide, ArtefactFamily::kNone, bona_rel});
      split->entries.push_back({spoof_id, sp.id, Label::kSpoof, fam, spoof_rel});
    }
  }

  write_manifest(c.shadow, out_dir / "manifest_train_shadow.tsv");
  write_manifest(c.target, out_dir / "manifest_train_target.tsv");
  write_manifest(c.eval, out_dir / "manifest_eval.tsv");
  c.validate();
  return c;
}

void write_manifest(const CorpusManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  for (const auto& e : m.entries) {
    out << e.utterance_id << '\t' << e.speaker_id << '\t' << to_string(e.label) << '\t'
        << to_string(e.family) << '\t' << e.path << '\n';
  }
  if (!out.flush()) throw IoError("cannot write manifest: " + path.string());
}

CorpusManifest load_external_manifest(const fs::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path.string());

  CorpusManifest m;
  m.split = split;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (fields.size() != 5)
      throw FormatError(where + "expected 5 tab-separated fields (id, speaker, label, "
                                "artefact_family, path), got " +
                        std::to_string(fields.size()));
    ManifestEntry e;
    e.utterance_id = fields[0];
    e.speaker_id = fields[1];
    try {
      e.label = label_from_string(fields[2]);
      e.family = family_from_string(fields[3]);
    } catch (const FormatError& err) {
      throw FormatError(where + err.what());
    }
    e.path = fields[4];
    if (e.utterance_id.empty() || e.speaker_id.empty() || e.path.empty())
      throw FormatError(where + "empty field");
    m.entries.push_back(std::move(e));
  }
  m.validate(path.parent_path());
  return m;
}

signal::Waveform load_entry(const fs::path& root, const ManifestEntry& e) {
  return signal::read_wav(root / e.path);
}

}  // namespace advoice::corpus
