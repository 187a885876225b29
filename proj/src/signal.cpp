#include "advoice/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "advoice/error.hpp"

namespace advoice::signal {
namespace {

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::uint32_t v, std::string& out) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16le(std::uint16_t v, std::string& out) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::int16_t quantize(double x) {
  x = std::clamp(x, -1.0, 1.0);
  double scaled = std::round(x * 32768.0);  // ties away from zero
  scaled = std::clamp(scaled, -32768.0, 32767.0);
  return static_cast<std::int16_t>(scaled);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();

  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw FormatError(path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const unsigned char* hdr = p + pos;
    std::uint32_t chunk_len = read_u32le(hdr + 4);
    std::size_t body = pos + 8;
    if (body + chunk_len > n)
      throw FormatError(path.string() + ": truncated chunk at byte " + std::to_string(pos));
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw FormatError(path.string() + ": fmt chunk too short");
      format = read_u16le(p + body);
      channels = read_u16le(p + body + 2);
      rate = read_u32le(p + body + 4);
      bits = read_u16le(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = p + body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr)
    throw FormatError(path.string() + ": missing fmt or data chunk");
  if (format != 1)
    throw FormatError(path.string() + ": only PCM format supported (got format tag " +
                      std::to_string(format) + ")");
  if (channels != 1)
    throw FormatError(path.string() + ": only mono supported (got " + std::to_string(channels) +
                      " channels)");
  if (bits != 16)
    throw FormatError(path.string() + ": only 16-bit samples supported (got " +
                      std::to_string(bits) + ")");
  if (rate != kCanonicalRateHz)
    throw FormatError(path.string() + ": unsupported sample rate " + std::to_string(rate) +
                      " (expected " + std::to_string(kCanonicalRateHz) + ")");

  Waveform w;
  w.sample_rate_hz = static_cast<int>(rate);
  w.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    std::int16_t s = static_cast<std::int16_t>(read_u16le(data + 2 * i));
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

void write_wav(const Waveform& w, const std::filesystem::path& path) {
  if (w.sample_rate_hz <= 0) throw ConfigError("write_wav: nonpositive sample rate");
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
  const std::uint32_t rate = static_cast<std::uint32_t>(w.sample_rate_hz);

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32le(36 + data_len, out);
  out += "WAVE";
  out += "fmt ";
  put_u32le(16, out);
  put_u16le(1, out);  // PCM
  put_u16le(1, out);  // mono
  put_u32le(rate, out);
  put_u32le(rate * 2, out);  // byte rate
  put_u16le(2, out);         // block align
  put_u16le(16, out);        // bits per sample
  out += "data";
  put_u32le(data_len, out);
  for (double x : w.samples) {
    put_u16le(static_cast<std::uint16_t>(quantize(x)), out);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failure on " + path.string());
}

double linf_distance(const Waveform& a, const Waveform& b) {
  if (a.sample_rate_hz != b.sample_rate_hz)
    throw ConfigError("linf_distance: sample rate mismatch");
  if (a.samples.size() != b.samples.size())
    throw ConfigError("linf_distance: length mismatch (" + std::to_string(a.samples.size()) +
                      " vs " + std::to_string(b.samples.size()) + ")");
  double d = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    d = std::max(d, std::abs(a.samples[i] - b.samples[i]));
  return d;
}

Waveform clip_to_ball(const Waveform& candidate, const BallSpec& ball) {
  if (ball.epsilon < 0) throw ConfigError("clip_to_ball: negative epsilon");
  if (candidate.sample_rate_hz != ball.center.sample_rate_hz)
    throw ConfigError("clip_to_ball: sample rate mismatch");
  if (candidate.samples.size() != ball.center.samples.size())
    throw ConfigError("clip_to_ball: length mismatch");
  Waveform out = candidate;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    double c = ball.center.samples[i];
    out.samples[i] = std::clamp(out.samples[i], c - ball.epsilon, c + ball.epsilon);
  }
  return out;
}

}  // namespace advoice::signal
