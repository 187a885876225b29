#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "advoice/signal.hpp"

namespace advoice::features {

enum class Window { kHann, kRect };

// Framing and filterbank parameters shared by every extractor.
struct ExtractorConfig {
  int frame_len = 400;
  int hop = 160;
  int fft_size = 512;
  int n_mels = 26;
  int n_ceps = 20;
  Window window = Window::kHann;
  double log_floor = 1e-10;
  double mel_low_hz = 20.0;
  double mel_high_hz = 8000.0;

  int bins() const { return fft_size / 2 + 1; }
  void validate(int sample_rate_hz) const;
  // 1 + floor((n - frame_len) / hop); throws if n < frame_len.
  int frame_count(std::size_t n_samples) const;
};

struct RealMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  RealMatrix() = default;
  RealMatrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

enum class FeatureKind { kLpms, kMfcc };

// Row per frame, column per coefficient (LPMS: fft bins, MFCC: cepstra).
struct FeatureMatrix {
  int frames = 0;
  int coeffs = 0;
  FeatureKind kind = FeatureKind::kLpms;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(int f, int c, FeatureKind k)
      : frames(f), coeffs(c), kind(k), values(static_cast<std::size_t>(f) * c, 0.0) {}
  double& at(int f, int c) { return values[static_cast<std::size_t>(f) * coeffs + c]; }
  double at(int f, int c) const { return values[static_cast<std::size_t>(f) * coeffs + c]; }
};

struct ComplexSpectrogram {
  RealMatrix magnitude;  // frames x bins
  RealMatrix phase;      // radians
};

ComplexSpectrogram stft(const signal::Waveform& w, const ExtractorConfig& cfg);

// log(|X|^2 + log_floor) per frame and bin.
FeatureMatrix lpms_forward(const signal::Waveform& w, const ExtractorConfig& cfg);

// Power spectrum -> mel filterbank -> log(+log_floor) -> orthonormal DCT-II,
// first n_ceps coefficients kept.
FeatureMatrix mfcc_forward(const signal::Waveform& w, const ExtractorConfig& cfg);

enum class Extractor { kLpms, kMfcc };

// Fault injection for the gradient audit tool; kNone in normal use.
enum class VjpFault { kNone, kDctBackwardSign };

// Vector-Jacobian product: gradient of <features(w), upstream> with respect
// to the waveform samples. upstream must match the extractor's output shape.
std::vector<double> vjp(Extractor ex, const signal::Waveform& w, const ExtractorConfig& cfg,
                        const FeatureMatrix& upstream, VjpFault fault = VjpFault::kNone);

// Overlap-add synthesis with squared-window normalization. Output length is
// (rows - 1) * hop + frame_len, the span the frames cover.
signal::Waveform reconstruct_with_phase(const RealMatrix& magnitude, const RealMatrix& phase,
                                        const ExtractorConfig& cfg);

struct GriffinLimResult {
  signal::Waveform waveform;
  std::vector<double> convergence;  // spectral-convergence error per iteration
};

// Phase retrieval from magnitude alone. Initial phase is all zero unless
// phase_seed is given, in which case it is uniform in (-pi, pi).
GriffinLimResult griffin_lim(const RealMatrix& magnitude, const ExtractorConfig& cfg,
                             int iterations,
                             std::optional<std::uint64_t> phase_seed = std::nullopt);

// Triangular filters on the mel scale, n_mels x bins.
RealMatrix mel_filterbank(const ExtractorConfig& cfg, int sample_rate_hz);

// Orthonormal DCT-II matrix, n_ceps x n_mels.
RealMatrix dct_matrix(int n_ceps, int n_mels);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Comma-separated export, one frame per row, header row names coefficients.
void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path);

}  // namespace advoice::features
