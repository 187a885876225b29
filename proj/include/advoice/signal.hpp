#pragma once

#include <filesystem>
#include <vector>

namespace advoice::signal {

inline constexpr int kCanonicalRateHz = 16000;

// Mono waveform, samples in [-1, 1] nominal full scale. Values may leave the
// nominal range during processing; clamping happens only on file write.
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kCanonicalRateHz;
};

// L-infinity ball around a center waveform.
struct BallSpec {
  Waveform center;
  double epsilon = 0.0;  // >= 0
};

// Reads a RIFF/WAVE file. Accepts only PCM, 16-bit, mono, 16 kHz; anything
// else raises FormatError. Samples are scaled by 1/32768.
Waveform read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono. Samples are clamped to [-1, 1], scaled by 32768,
// rounded to nearest (ties away from zero) and clamped to int16 range, so
// +1.0 stores 32767 and -1.0 stores -32768.
void write_wav(const Waveform& w, const std::filesystem::path& path);

// Max absolute sample difference; lengths and rates must match.
double linf_distance(const Waveform& a, const Waveform& b);

// Per-sample projection onto the ball. Idempotent; epsilon 0 returns the
// center bit-exactly.
Waveform clip_to_ball(const Waveform& candidate, const BallSpec& ball);

}  // namespace advoice::signal
