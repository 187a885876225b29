#include "advoice/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include "advoice/error.hpp"
#include "advoice/prng.hpp"

namespace advoice::channel {

using signal::Waveform;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kFirTaps = 129;  // ~410 Hz transition band at 16 kHz
constexpr double kBandLowHz = 300.0;
constexpr double kBandHighHz = 3400.0;
constexpr double kConcealGain = 0.7079457843841379;  // -3 dB
constexpr std::uint16_t kHeaderWord = 0x8000;

// Hamming-windowed sinc band-pass taps.
std::vector<double> bandpass_taps(int sample_rate_hz) {
  const double f1 = kBandLowHz / sample_rate_hz;
  const double f2 = kBandHighHz / sample_rate_hz;
  const int mid = kFirTaps / 2;
  std::vector<double> h(kFirTaps);
  for (int n = 0; n < kFirTaps; ++n) {
    const int k = n - mid;
    double v;
    if (k == 0) {
      v = 2.0 * (f2 - f1);
    } else {
      v = (std::sin(2.0 * kPi * f2 * k) - std::sin(2.0 * kPi * f1 * k)) / (kPi * k);
    }
    h[n] = v * (0.54 - 0.46 * std::cos(2.0 * kPi * n / (kFirTaps - 1)));
  }
  return h;
}

// Zero-padded convolution with the group delay compensated, so the output is
// time-aligned with the input and has the same length.
std::vector<double> band_limit(const std::vector<double>& x, int sample_rate_hz) {
  const std::vector<double> h = bandpass_taps(sample_rate_hz);
  const int mid = kFirTaps / 2;
  const auto n = static_cast<long>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < kFirTaps; ++k) {
      const long j = i + mid - k;
      if (j >= 0 && j < n) acc += h[k] * x[j];
    }
    y[i] = acc;
  }
  return y;
}

std::uint8_t mulaw_encode(double x) {
  x = std::clamp(x, -1.0, 1.0);
  const double mag = std::log1p(255.0 * std::abs(x)) / std::log(256.0);
  const double y = x < 0.0 ? -mag : mag;
  return static_cast<std::uint8_t>(std::lround((y + 1.0) * 0.5 * 255.0));
}

double mulaw_decode(std::uint8_t b) {
  const double y = b / 255.0 * 2.0 - 1.0;
  const double mag = (std::exp(std::abs(y) * std::log(256.0)) - 1.0) / 255.0;
  return y < 0.0 ? -mag : mag;
}

std::vector<double> decode_payload(const std::vector<std::uint8_t>& payload) {
  std::vector<double> s(payload.size());
  for (std::size_t i = 0; i < payload.size(); ++i) s[i] = mulaw_decode(payload[i]);
  return s;
}

void require_canonical_rate(const Waveform& w, const char* what) {
  if (w.sample_rate_hz != signal::kCanonicalRateHz) {
    throw ConfigError(std::string(what) + ": expects a 16 kHz waveform");
  }
}

void push_u16(std::uint16_t v, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void push_u32(std::uint32_t v, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = (std::uint16_t(b_[pos_]) << 8) | b_[pos_ + 1];
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | b_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(b_.begin() + pos_, b_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("packet truncated");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

void ChannelConfig::validate() const {
  if (!(loss_rate >= 0.0 && loss_rate <= 1.0)) {
    throw ConfigError("channel loss_rate must be in [0, 1]");
  }
  if (frame_ms <= 0) throw ConfigError("channel frame_ms must be positive");
}

int ChannelConfig::frame_samples(int sample_rate_hz) const {
  const long long per_frame = static_cast<long long>(sample_rate_hz) * frame_ms;
  if (per_frame % 1000 != 0) {
    throw ConfigError("frame_ms does not give a whole number of samples at this rate");
  }
  return static_cast<int>(per_frame / 1000);
}

std::vector<EncodedFrame> surrogate_encode(const Waveform& w, const ChannelConfig& cfg) {
  cfg.validate();
  require_canonical_rate(w, "surrogate_encode");
  const int spf = cfg.frame_samples(w.sample_rate_hz);
  const std::vector<double> filtered = band_limit(w.samples, w.sample_rate_hz);
  const auto n_frames = static_cast<int>((filtered.size() + spf - 1) / spf);

  std::vector<EncodedFrame> frames(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    frames[i].index = i;
    frames[i].payload.resize(spf);
    for (int j = 0; j < spf; ++j) {
      const std::size_t pos = static_cast<std::size_t>(i) * spf + j;
      frames[i].payload[j] = mulaw_encode(pos < filtered.size() ? filtered[pos] : 0.0);
    }
    if (cfg.redundancy && i > 0) {
      frames[i].redundant_copy_of_prev = frames[i - 1].payload;
    }
  }
  return frames;
}

Waveform surrogate_decode(const std::vector<EncodedFrame>& frames, const ChannelConfig& cfg,
                          const std::set<int>& lost) {
  cfg.validate();
  if (frames.empty()) throw ConfigError("surrogate_decode: empty frame stream");
  int max_index = -1;
  std::map<int, const EncodedFrame*> present;
  for (const EncodedFrame& f : frames) {
    if (f.index <= max_index) {
      throw FormatError("surrogate_decode: frame indices must be strictly increasing");
    }
    max_index = f.index;
    if (lost.count(f.index) == 0) present[f.index] = &f;
  }
  if (!lost.empty()) max_index = std::max(max_index, *lost.rbegin());
  const int spf = static_cast<int>(frames.front().payload.size());

  Waveform out{{}, signal::kCanonicalRateHz};
  out.samples.reserve(static_cast<std::size_t>(max_index + 1) * spf);
  std::vector<double> prev(spf, 0.0);
  for (int i = 0; i <= max_index; ++i) {
    std::vector<double> samples;
    auto it = present.find(i);
    if (it != present.end()) {
      samples = decode_payload(it->second->payload);
    } else {
      auto next = present.find(i + 1);
      if (cfg.redundancy && next != present.end() &&
          next->second->redundant_copy_of_prev.has_value()) {
        samples = decode_payload(*next->second->redundant_copy_of_prev);
      } else {
        samples = prev;
        for (double& s : samples) s *= kConcealGain;
      }
    }
    out.samples.insert(out.samples.end(), samples.begin(), samples.end());
    prev = std::move(samples);
  }
  return out;
}

std::vector<int> draw_losses(int n_frames, const ChannelConfig& cfg) {
  cfg.validate();
  Prng rng = Prng(cfg.seed, "channel").substream("loss");
  std::vector<int> lost;
  for (int i = 0; i < n_frames; ++i) {
    if (rng.uniform01() < cfg.loss_rate) lost.push_back(i);
  }
  return lost;
}

Waveform apply_channel(const Waveform& w, const ChannelConfig& cfg) {
  cfg.validate();
  if (w.samples.empty()) throw ConfigError("apply_channel: empty waveform");
  if (cfg.codec == Codec::kExternal) {
    Waveform out = external_codec_adapter(w, {cfg.external_encoder, cfg.external_decoder}, cfg);
    out.samples.resize(w.samples.size(), 0.0);
    return out;
  }
  const std::vector<EncodedFrame> frames = surrogate_encode(w, cfg);
  const std::vector<int> lost = draw_losses(static_cast<int>(frames.size()), cfg);
  Waveform out = surrogate_decode(frames, cfg, std::set<int>(lost.begin(), lost.end()));
  out.samples.resize(w.samples.size(), 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// RTP-like transport
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> serialize_packet(const RtpLikePacket& p) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + p.payload.size());
  push_u16(kHeaderWord, out);
  push_u16(p.sequence, out);
  push_u32(p.timestamp, out);
  push_u32(p.ssrc, out);
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

RtpLikePacket parse_packet(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw FormatError("packet shorter than the 12-byte header");
  ByteReader r(bytes);
  if (r.u16() != kHeaderWord) throw FormatError("bad packet header word");
  RtpLikePacket p;
  p.sequence = r.u16();
  p.timestamp = r.u32();
  p.ssrc = r.u32();
  p.payload = r.bytes(r.remaining());
  return p;
}

namespace {

std::vector<std::uint8_t> serialize_frame_body(const EncodedFrame& f) {
  std::vector<std::uint8_t> out;
  push_u32(static_cast<std::uint32_t>(f.payload.size()), out);
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  out.push_back(f.redundant_copy_of_prev.has_value() ? 1 : 0);
  if (f.redundant_copy_of_prev) {
    push_u32(static_cast<std::uint32_t>(f.redundant_copy_of_prev->size()), out);
    out.insert(out.end(), f.redundant_copy_of_prev->begin(), f.redundant_copy_of_prev->end());
  }
  return out;
}

EncodedFrame parse_frame_body(const std::vector<std::uint8_t>& bytes, int index) {
  ByteReader r(bytes);
  EncodedFrame f;
  f.index = index;
  f.payload = r.bytes(r.u32());
  const std::uint8_t has_red = r.u8();
  if (has_red == 1) {
    f.redundant_copy_of_prev = r.bytes(r.u32());
  } else if (has_red != 0) {
    throw FormatError("bad redundancy flag in frame body");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in frame body");
  return f;
}

}  // namespace

std::vector<RtpLikePacket> packetize(const std::vector<EncodedFrame>& frames, std::uint32_t ssrc,
                                     int samples_per_frame) {
  if (samples_per_frame <= 0) throw ConfigError("packetize: samples_per_frame must be positive");
  std::vector<RtpLikePacket> out;
  out.reserve(frames.size());
  int prev_index = -1;
  for (const EncodedFrame& f : frames) {
    if (f.index <= prev_index || f.index < 0) {
      throw FormatError("packetize: frame indices must be strictly increasing");
    }
    prev_index = f.index;
    RtpLikePacket p;
    p.sequence = static_cast<std::uint16_t>(f.index & 0xffff);
    p.timestamp = static_cast<std::uint32_t>(f.index) * static_cast<std::uint32_t>(samples_per_frame);
    p.ssrc = ssrc;
    p.payload = serialize_frame_body(f);
    out.push_back(std::move(p));
  }
  return out;
}

DepacketizeResult depacketize(const std::vector<RtpLikePacket>& packets, int samples_per_frame) {
  if (samples_per_frame <= 0) throw ConfigError("depacketize: samples_per_frame must be positive");
  std::map<int, EncodedFrame> by_index;
  for (const RtpLikePacket& p : packets) {
    if (p.timestamp % static_cast<std::uint32_t>(samples_per_frame) != 0) {
      throw FormatError("depacketize: timestamp not a multiple of the frame size");
    }
    const int index = static_cast<int>(p.timestamp / samples_per_frame);
    by_index.emplace(index, parse_frame_body(p.payload, index));  // keeps first arrival
  }
  DepacketizeResult res;
  if (by_index.empty()) return res;
  const int max_index = by_index.rbegin()->first;
  for (int i = 0; i <= max_index; ++i) {
    auto it = by_index.find(i);
    if (it == by_index.end()) {
      res.lost.push_back(i);
    } else {
      res.frames.push_back(std::move(it->second));
    }
  }
  return res;
}

void send_udp(const std::vector<RtpLikePacket>& packets, const std::string& address, int port) {
  const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) throw NetError("socket() failed");
  sockaddr_in dst{};
  dst.sin_family = AF_INET;
  dst.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, address.c_str(), &dst.sin_addr) != 1) {
    ::close(fd);
    throw NetError("bad IPv4 address: " + address);
  }
  for (const RtpLikePacket& p : packets) {
    const std::vector<std::uint8_t> bytes = serialize_packet(p);
    const ssize_t sent = ::sendto(fd, bytes.data(), bytes.size(), 0,
                                  reinterpret_cast<const sockaddr*>(&dst), sizeof(dst));
    if (sent != static_cast<ssize_t>(bytes.size())) {
      ::close(fd);
      throw NetError("sendto() failed");
    }
  }
  ::close(fd);
}

std::vector<RtpLikePacket> recv_udp(int port, std::uint32_t expected_ssrc, int idle_timeout_ms) {
  const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) throw NetError("socket() failed");
  const int yes = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw NetError("bind() failed on port " + std::to_string(port));
  }
  timeval tv{};
  tv.tv_sec = idle_timeout_ms / 1000;
  tv.tv_usec = (idle_timeout_ms % 1000) * 1000;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));

  std::vector<RtpLikePacket> out;
  std::vector<std::uint8_t> buf(65536);
  for (;;) {
    const ssize_t n = ::recvfrom(fd, buf.data(), buf.size(), 0, nullptr, nullptr);
    if (n < 0) break;  // idle timeout (EAGAIN) or error: stop collecting
    try {
      RtpLikePacket p = parse_packet({buf.begin(), buf.begin() + n});
      if (p.ssrc == expected_ssrc) out.push_back(std::move(p));
    } catch (const FormatError&) {
      // Malformed datagram: ignore and keep listening.
    }
  }
  ::close(fd);
  if (out.empty()) throw NetError("recv_udp: no packets before idle timeout");
  return out;
}

// ---------------------------------------------------------------------------
// External codec and crafting helpers
// ---------------------------------------------------------------------------

namespace {

bool is_executable(const std::filesystem::path& p) {
  std::error_code ec;
  return std::filesystem::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

// PATH lookup for bare names; direct check for anything with a slash.
void require_tool(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    if (is_executable(name)) return;
    throw ToolUnavailableError("external codec tool not found: " + name);
  }
  const char* path = std::getenv("PATH");
  if (path != nullptr) {
    std::string dirs(path);
    std::size_t start = 0;
    while (start <= dirs.size()) {
      const std::size_t end = dirs.find(':', start);
      const std::string dir = dirs.substr(start, end == std::string::npos ? end : end - start);
      if (!dir.empty() && is_executable(std::filesystem::path(dir) / name)) return;
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  throw ToolUnavailableError("external codec tool not found: " + name);
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

void run_or_throw(const std::string& cmd, const char* what) {
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    throw IoError(std::string(what) + " failed (exit status " + std::to_string(rc) + ")");
  }
}

}  // namespace

Waveform external_codec_adapter(const Waveform& w, const ToolPaths& tools,
                                const ChannelConfig& cfg) {
  cfg.validate();
  require_canonical_rate(w, "external_codec_adapter");
  require_tool(tools.encoder);
  require_tool(tools.decoder);

  static int invocation = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("advoice_codec_" + std::to_string(::getpid()) + "_" +
                    std::to_string(invocation++));
  std::filesystem::create_directories(dir);
  const auto in_wav = dir / "in.wav";
  const auto encoded = dir / "encoded.opus";
  const auto out_wav = dir / "out.wav";
  signal::write_wav(w, in_wav);

  std::string enc_cmd = shell_quote(tools.encoder) + " --quiet";
  if (cfg.loss_rate > 0.0) {
    enc_cmd += " --expect-loss " + std::to_string(static_cast<int>(std::lround(cfg.loss_rate * 100)));
  }
  enc_cmd += " " + shell_quote(in_wav.string()) + " " + shell_quote(encoded.string());
  run_or_throw(enc_cmd, "external encoder");

  const std::string dec_cmd = shell_quote(tools.decoder) + " --quiet --rate 16000 " +
                              shell_quote(encoded.string()) + " " + shell_quote(out_wav.string());
  run_or_throw(dec_cmd, "external decoder");

  Waveform out = signal::read_wav(out_wav);
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  return out;
}

double commutation_ratio(const Waveform& x, const Waveform& delta, ChannelConfig cfg) {
  if (x.samples.size() != delta.samples.size()) {
    throw ConfigError("commutation_ratio: length mismatch");
  }
  double dnorm2 = 0.0;
  for (double d : delta.samples) dnorm2 += d * d;
  if (dnorm2 == 0.0) throw ConfigError("commutation_ratio: delta must be nonzero");

  cfg.loss_rate = 0.0;  // the ratio measures codec distortion only
  Waveform xd = x;
  for (std::size_t i = 0; i < xd.samples.size(); ++i) xd.samples[i] += delta.samples[i];
  const Waveform a = apply_channel(xd, cfg);
  const Waveform b = apply_channel(x, cfg);
  double num2 = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double r = a.samples[i] - b.samples[i] - delta.samples[i];
    num2 += r * r;
  }
  return std::sqrt(num2 / dnorm2);
}

Waveform codec_aware_craft(const AttackFn& attack, const ChannelFn& eta, const Waveform& x,
                           double epsilon) {
  if (epsilon < 0.0) throw ConfigError("codec_aware_craft: epsilon must be >= 0");
  const Waveform base = eta(x);
  if (base.samples.size() != x.samples.size()) {
    throw ConfigError("codec_aware_craft: channel changed the waveform length");
  }
  const attacks::AttackResult res = attack(base);
  Waveform forwarded = x;
  for (std::size_t i = 0; i < forwarded.samples.size(); ++i) {
    forwarded.samples[i] += res.adversarial.samples[i] - base.samples[i];
  }
  return signal::clip_to_ball(forwarded, {x, epsilon});
}

Waveform codec_aware_craft(const AttackFn& attack, const Waveform& x, double epsilon,
                           ChannelConfig cfg) {
  cfg.loss_rate = 0.0;
  return codec_aware_craft(
      attack, [&cfg](const Waveform& w) { return apply_channel(w, cfg); }, x, epsilon);
}

}  // namespace advoice::channel
