#include "advoice/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <string>

#include "advoice/error.hpp"
#include "advoice/prng.hpp"
#include "fft.hpp"

namespace advoice::features {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> make_window(const ExtractorConfig& cfg) {
  std::vector<double> w(static_cast<std::size_t>(cfg.frame_len), 1.0);
  if (cfg.window == Window::kHann) {
    for (int n = 0; n < cfg.frame_len; ++n)
      w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / cfg.frame_len);
  }
  return w;
}

struct FrameSpectra {
  int frames = 0;
  int bins = 0;
  std::vector<std::complex<double>> x;  // frames * bins, one-sided
};

FrameSpectra analyze(const signal::Waveform& w, const ExtractorConfig& cfg) {
  cfg.validate(w.sample_rate_hz);
  const int frames = cfg.frame_count(w.samples.size());
  const int bins = cfg.bins();
  const auto win = make_window(cfg);

  FrameSpectra out;
  out.frames = frames;
  out.bins = bins;
  out.x.resize(static_cast<std::size_t>(frames) * bins);

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_size));
  for (int f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const std::size_t base = static_cast<std::size_t>(f) * cfg.hop;
    for (int n = 0; n < cfg.frame_len; ++n) buf[n] = w.samples[base + n] * win[n];
    detail::fft_radix2(buf, false);
    for (int k = 0; k < bins; ++k) out.x[static_cast<std::size_t>(f) * bins + k] = buf[k];
  }
  return out;
}

// Overlap-add synthesis shared by reconstruct_with_phase and griffin_lim.
signal::Waveform synthesize(const RealMatrix& mag, const RealMatrix& phase,
                            const ExtractorConfig& cfg) {
  const int frames = mag.rows;
  const int bins = mag.cols;
  const int N = cfg.fft_size;
  const std::size_t out_len =
      static_cast<std::size_t>(frames - 1) * cfg.hop + cfg.frame_len;
  const auto win = make_window(cfg);

  std::vector<double> num(out_len, 0.0), den(out_len, 0.0);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(N));
  for (int f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int k = 0; k < bins; ++k) buf[k] = std::polar(mag.at(f, k), phase.at(f, k));
    for (int k = 1; k < N / 2; ++k) buf[N - k] = std::conj(buf[k]);
    detail::fft_radix2(buf, true);
    const std::size_t base = static_cast<std::size_t>(f) * cfg.hop;
    for (int n = 0; n < cfg.frame_len; ++n) {
      double y = buf[n].real() / N;
      num[base + n] += y * win[n];
      den[base + n] += win[n] * win[n];
    }
  }

  signal::Waveform out;
  out.sample_rate_hz = signal::kCanonicalRateHz;
  out.samples.resize(out_len);
  for (std::size_t m = 0; m < out_len; ++m)
    out.samples[m] = den[m] > 1e-12 ? num[m] / den[m] : 0.0;
  return out;
}

void check_grid(const RealMatrix& m, const ExtractorConfig& cfg, const char* what) {
  if (m.rows < 1) throw ConfigError(std::string(what) + ": needs at least one frame");
  if (m.cols != cfg.bins())
    throw ConfigError(std::string(what) + ": expected " + std::to_string(cfg.bins()) +
                      " bins, got " + std::to_string(m.cols));
  if (m.v.size() != static_cast<std::size_t>(m.rows) * m.cols)
    throw ConfigError(std::string(what) + ": storage size mismatch");
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

void ExtractorConfig::validate(int sample_rate_hz) const {
  if (sample_rate_hz <= 0) throw ConfigError("extractor: nonpositive sample rate");
  if (frame_len <= 0 || hop <= 0) throw ConfigError("extractor: frame_len and hop must be > 0");
  if (hop > frame_len) throw ConfigError("extractor: hop must not exceed frame_len");
  if (fft_size < frame_len) throw ConfigError("extractor: fft_size must be >= frame_len");
  if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
    throw ConfigError("extractor: fft_size must be a power of two");
  if (n_mels < 2) throw ConfigError("extractor: n_mels must be >= 2");
  if (n_ceps < 1 || n_ceps > n_mels)
    throw ConfigError("extractor: n_ceps must be in [1, n_mels]");
  if (!(log_floor > 0.0)) throw ConfigError("extractor: log_floor must be > 0");
  if (!(mel_low_hz >= 0.0) || !(mel_low_hz < mel_high_hz) ||
      mel_high_hz > sample_rate_hz / 2.0 + 1e-9)
    throw ConfigError("extractor: mel band must satisfy 0 <= low < high <= nyquist");
}

int ExtractorConfig::frame_count(std::size_t n_samples) const {
  if (n_samples < static_cast<std::size_t>(frame_len))
    throw ConfigError("waveform shorter than one analysis frame (" +
                      std::to_string(n_samples) + " < " + std::to_string(frame_len) + ")");
  return 1 + static_cast<int>((n_samples - frame_len) / hop);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

RealMatrix mel_filterbank(const ExtractorConfig& cfg, int sample_rate_hz) {
  cfg.validate(sample_rate_hz);
  const int bins = cfg.bins();
  const double m_lo = hz_to_mel(cfg.mel_low_hz);
  const double m_hi = hz_to_mel(cfg.mel_high_hz);

  std::vector<double> edge(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edge[i] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (cfg.n_mels + 1));

  RealMatrix fb(cfg.n_mels, bins);
  const double df = static_cast<double>(sample_rate_hz) / cfg.fft_size;
  for (int j = 0; j < cfg.n_mels; ++j) {
    const double l = edge[j], c = edge[j + 1], r = edge[j + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = k * df;
      double wgt = 0.0;
      if (f > l && f <= c)
        wgt = (f - l) / (c - l);
      else if (f > c && f < r)
        wgt = (r - f) / (r - c);
      fb.at(j, k) = wgt;
    }
  }
  return fb;
}

RealMatrix dct_matrix(int n_ceps, int n_mels) {
  if (n_ceps < 1 || n_mels < 1 || n_ceps > n_mels)
    throw ConfigError("dct_matrix: need 1 <= n_ceps <= n_mels");
  RealMatrix d(n_ceps, n_mels);
  const double s0 = std::sqrt(1.0 / n_mels);
  const double s = std::sqrt(2.0 / n_mels);
  for (int c = 0; c < n_ceps; ++c)
    for (int j = 0; j < n_mels; ++j)
      d.at(c, j) = (c == 0 ? s0 : s) * std::cos(kPi * c * (2 * j + 1) / (2.0 * n_mels));
  return d;
}

ComplexSpectrogram stft(const signal::Waveform& w, const ExtractorConfig& cfg) {
  const auto fs = analyze(w, cfg);
  ComplexSpectrogram out;
  out.magnitude = RealMatrix(fs.frames, fs.bins);
  out.phase = RealMatrix(fs.frames, fs.bins);
  for (int f = 0; f < fs.frames; ++f) {
    for (int k = 0; k < fs.bins; ++k) {
      const auto& z = fs.x[static_cast<std::size_t>(f) * fs.bins + k];
      out.magnitude.at(f, k) = std::sqrt(z.real() * z.real() + z.imag() * z.imag());
      out.phase.at(f, k) = std::atan2(z.imag(), z.real());
    }
  }
  return out;
}

FeatureMatrix lpms_forward(const signal::Waveform& w, const ExtractorConfig& cfg) {
  const auto fs = analyze(w, cfg);
  FeatureMatrix out(fs.frames, fs.bins, FeatureKind::kLpms);
  for (int f = 0; f < fs.frames; ++f) {
    for (int k = 0; k < fs.bins; ++k) {
      const auto& z = fs.x[static_cast<std::size_t>(f) * fs.bins + k];
      out.at(f, k) = std::log(z.real() * z.real() + z.imag() * z.imag() + cfg.log_floor);
    }
  }
  return out;
}

FeatureMatrix mfcc_forward(const signal::Waveform& w, const ExtractorConfig& cfg) {
  const auto fs = analyze(w, cfg);
  const auto fb = mel_filterbank(cfg, w.sample_rate_hz);
  const auto dct = dct_matrix(cfg.n_ceps, cfg.n_mels);

  FeatureMatrix out(fs.frames, cfg.n_ceps, FeatureKind::kMfcc);
  std::vector<double> p(static_cast<std::size_t>(fs.bins));
  std::vector<double> g(static_cast<std::size_t>(cfg.n_mels));
  for (int f = 0; f < fs.frames; ++f) {
    for (int k = 0; k < fs.bins; ++k) {
      const auto& z = fs.x[static_cast<std::size_t>(f) * fs.bins + k];
      p[k] = z.real() * z.real() + z.imag() * z.imag();
    }
    for (int j = 0; j < cfg.n_mels; ++j) {
      double m = 0.0;
      for (int k = 0; k < fs.bins; ++k) m += fb.at(j, k) * p[k];
      g[j] = std::log(m + cfg.log_floor);
    }
    for (int c = 0; c < cfg.n_ceps; ++c) {
      double acc = 0.0;
      for (int j = 0; j < cfg.n_mels; ++j) acc += dct.at(c, j) * g[j];
      out.at(f, c) = acc;
    }
  }
  return out;
}

std::vector<double> vjp(Extractor ex, const signal::Waveform& w, const ExtractorConfig& cfg,
                        const FeatureMatrix& upstream, VjpFault fault) {
  cfg.validate(w.sample_rate_hz);
  const int frames = cfg.frame_count(w.samples.size());
  const int bins = cfg.bins();
  const int want = ex == Extractor::kLpms ? bins : cfg.n_ceps;
  if (upstream.frames != frames || upstream.coeffs != want)
    throw ConfigError("vjp: upstream shape " + std::to_string(upstream.frames) + "x" +
                      std::to_string(upstream.coeffs) + " does not match extractor output " +
                      std::to_string(frames) + "x" + std::to_string(want));

  const auto fs = analyze(w, cfg);
  const auto win = make_window(cfg);
  RealMatrix fb, dct;
  if (ex == Extractor::kMfcc) {
    fb = mel_filterbank(cfg, w.sample_rate_hz);
    dct = dct_matrix(cfg.n_ceps, cfg.n_mels);
  }

  std::vector<double> grad(w.samples.size(), 0.0);
  std::vector<std::complex<double>> h(static_cast<std::size_t>(cfg.fft_size));
  std::vector<double> p(static_cast<std::size_t>(bins));
  std::vector<double> dp(static_cast<std::size_t>(bins));
  std::vector<double> mel_e(static_cast<std::size_t>(cfg.n_mels));
  std::vector<double> dg(static_cast<std::size_t>(cfg.n_mels));

  for (int f = 0; f < frames; ++f) {
    const std::complex<double>* X = &fs.x[static_cast<std::size_t>(f) * bins];
    if (ex == Extractor::kLpms) {
      for (int k = 0; k < bins; ++k) {
        const double pw = X[k].real() * X[k].real() + X[k].imag() * X[k].imag();
        dp[k] = upstream.at(f, k) / (pw + cfg.log_floor);
      }
    } else {
      for (int k = 0; k < bins; ++k)
        p[k] = X[k].real() * X[k].real() + X[k].imag() * X[k].imag();
      for (int j = 0; j < cfg.n_mels; ++j) {
        double m = 0.0;
        for (int k = 0; k < bins; ++k) m += fb.at(j, k) * p[k];
        mel_e[j] = m;
      }
      const double dct_sign = fault == VjpFault::kDctBackwardSign ? -1.0 : 1.0;
      for (int j = 0; j < cfg.n_mels; ++j) {
        double acc = 0.0;
        for (int c = 0; c < cfg.n_ceps; ++c) acc += dct.at(c, j) * upstream.at(f, c);
        dg[j] = dct_sign * acc / (mel_e[j] + cfg.log_floor);
      }
      for (int k = 0; k < bins; ++k) {
        double acc = 0.0;
        for (int j = 0; j < cfg.n_mels; ++j) acc += fb.at(j, k) * dg[j];
        dp[k] = acc;
      }
    }

    // d<loss>/dX[k] as a complex carrier, then one unscaled inverse FFT gives
    // the gradient with respect to the windowed frame.
    std::fill(h.begin(), h.end(), std::complex<double>(0.0, 0.0));
    for (int k = 0; k < bins; ++k) h[k] = 2.0 * dp[k] * X[k];
    detail::fft_radix2(h, true);
    const std::size_t base = static_cast<std::size_t>(f) * cfg.hop;
    for (int n = 0; n < cfg.frame_len; ++n) grad[base + n] += h[n].real() * win[n];
  }
  return grad;
}

signal::Waveform reconstruct_with_phase(const RealMatrix& magnitude, const RealMatrix& phase,
                                        const ExtractorConfig& cfg) {
  cfg.validate(signal::kCanonicalRateHz);
  check_grid(magnitude, cfg, "reconstruct_with_phase magnitude");
  check_grid(phase, cfg, "reconstruct_with_phase phase");
  if (magnitude.rows != phase.rows)
    throw ConfigError("reconstruct_with_phase: magnitude and phase frame counts differ");
  return synthesize(magnitude, phase, cfg);
}

GriffinLimResult griffin_lim(const RealMatrix& magnitude, const ExtractorConfig& cfg,
                             int iterations, std::optional<std::uint64_t> phase_seed) {
  cfg.validate(signal::kCanonicalRateHz);
  check_grid(magnitude, cfg, "griffin_lim magnitude");
  if (iterations < 1) throw ConfigError("griffin_lim: iterations must be >= 1");

  RealMatrix phase(magnitude.rows, magnitude.cols);
  if (phase_seed) {
    Prng g(*phase_seed, "griffinlim.phase");
    for (auto& x : phase.v) x = g.uniform(-kPi, kPi);
  }

  double mag_norm = 0.0;
  for (double x : magnitude.v) mag_norm += x * x;
  mag_norm = std::sqrt(mag_norm);

  GriffinLimResult res;
  for (int it = 0; it < iterations; ++it) {
    res.waveform = synthesize(magnitude, phase, cfg);
    const auto spec = stft(res.waveform, cfg);
    phase = spec.phase;
    double diff = 0.0;
    for (std::size_t i = 0; i < magnitude.v.size(); ++i) {
      const double d = spec.magnitude.v[i] - magnitude.v[i];
      diff += d * d;
    }
    res.convergence.push_back(mag_norm > 0.0 ? std::sqrt(diff) / mag_norm : 0.0);
  }
  return res;
}

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create " + path.string());
  const char* prefix = m.kind == FeatureKind::kMfcc ? "mfcc" : "lpms";
  for (int c = 0; c < m.coeffs; ++c) {
    if (c) f << ',';
    f << prefix << c;
  }
  f << '\n';
  for (int r = 0; r < m.frames; ++r) {
    for (int c = 0; c < m.coeffs; ++c) {
      if (c) f << ',';
      f << format_double(m.at(r, c));
    }
    f << '\n';
  }
  if (!f) throw IoError("write failure on " + path.string());
}

}  // namespace advoice::features
