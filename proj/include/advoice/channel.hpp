#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "advoice/attacks.hpp"
#include "advoice/signal.hpp"

namespace advoice::channel {

enum class Codec { kSurrogate, kExternal };

struct ChannelConfig {
  Codec codec = Codec::kSurrogate;
  double loss_rate = 0.02;  // per-frame Bernoulli loss probability
  bool redundancy = false;  // each frame carries a full copy of the previous one
  std::uint64_t seed = 1;
  int frame_ms = 20;
  std::string external_encoder = "opusenc";  // used when codec == kExternal
  std::string external_decoder = "opusdec";

  void validate() const;
  int frame_samples(int sample_rate_hz) const;  // e.g. 320 at 20 ms / 16 kHz
};

struct EncodedFrame {
  int index = 0;
  std::vector<std::uint8_t> payload;  // one mu-law byte per sample
  std::optional<std::vector<std::uint8_t>> redundant_copy_of_prev;
};

// Surrogate codec: 300-3400 Hz windowed-sinc band-limit across the whole
// waveform, then per-frame mu-law companding (mu = 255, 8 bit). The last
// frame is zero-padded to full length. Deterministic.
std::vector<EncodedFrame> surrogate_encode(const signal::Waveform& w, const ChannelConfig& cfg);

// Decodes an ordered frame stream. Frames whose index is in `lost` (or that
// are simply absent from the list) are recovered from the next surviving
// frame's redundant copy when redundancy is on; otherwise they are concealed
// by repeating the previous decoded frame attenuated by 3 dB. The copy a
// frame carries travels in its own packet, so of two consecutive losses only
// the second is recoverable.
signal::Waveform surrogate_decode(const std::vector<EncodedFrame>& frames,
                                  const ChannelConfig& cfg, const std::set<int>& lost);

// Seeded Bernoulli(loss_rate) draw per frame index; the loss pattern used by
// apply_channel.
std::vector<int> draw_losses(int n_frames, const ChannelConfig& cfg);

// Full channel: encode -> seeded frame loss -> decode, trimmed/padded to the
// input length. With codec == kExternal, defers to external_codec_adapter.
signal::Waveform apply_channel(const signal::Waveform& w, const ChannelConfig& cfg);

// ---------------------------------------------------------------------------
// RTP-like transport
// ---------------------------------------------------------------------------

struct RtpLikePacket {
  std::uint16_t sequence = 0;
  std::uint32_t timestamp = 0;  // in samples
  std::uint32_t ssrc = 0;
  std::vector<std::uint8_t> payload;
};

// 12-byte big-endian header (0x8000, sequence, timestamp, ssrc) + payload.
std::vector<std::uint8_t> serialize_packet(const RtpLikePacket& p);
RtpLikePacket parse_packet(const std::vector<std::uint8_t>& bytes);

// One packet per frame: sequence = index mod 2^16, timestamp = index *
// samples_per_frame. The frame (payload + optional redundant copy) is
// serialized into the packet payload.
std::vector<RtpLikePacket> packetize(const std::vector<EncodedFrame>& frames, std::uint32_t ssrc,
                                     int samples_per_frame);

struct DepacketizeResult {
  std::vector<EncodedFrame> frames;  // ordered by frame index, duplicates dropped
  std::vector<int> lost;             // missing indices in [0, max index seen]
};

// Accepts any arrival order; frame index is recovered from the timestamp.
DepacketizeResult depacketize(const std::vector<RtpLikePacket>& packets, int samples_per_frame);

// One datagram per packet, sent to address:port. Throws NetError on socket
// failure.
void send_udp(const std::vector<RtpLikePacket>& packets, const std::string& address, int port);

// Binds the loopback port and collects datagrams until no packet arrives for
// idle_timeout_ms. Packets with a different ssrc or a malformed header are
// ignored. Throws NetError on bind failure or if nothing was received.
std::vector<RtpLikePacket> recv_udp(int port, std::uint32_t expected_ssrc, int idle_timeout_ms);

// ---------------------------------------------------------------------------
// External codec and crafting helpers
// ---------------------------------------------------------------------------

struct ToolPaths {
  std::string encoder = "opusenc";
  std::string decoder = "opusdec";
};

// Round trip through external encoder/decoder subprocesses via temporary WAV
// files. Throws ToolUnavailableError when a tool is not installed; the
// decoder is asked for 16 kHz output and the encoder for loss robustness when
// cfg.loss_rate > 0.
signal::Waveform external_codec_adapter(const signal::Waveform& w, const ToolPaths& tools,
                                        const ChannelConfig& cfg);

// r(delta) = ||eta(x+delta) - eta(x) - delta||_2 / ||delta||_2 with the
// loss-free codec as eta. Finite for any nonzero delta.
double commutation_ratio(const signal::Waveform& x, const signal::Waveform& delta,
                         ChannelConfig cfg);

using AttackFn = std::function<attacks::AttackResult(const signal::Waveform&)>;
using ChannelFn = std::function<signal::Waveform(const signal::Waveform&)>;

// Codec-aware crafting: runs the attack on eta(x), takes delta = adversarial
// - eta(x), and returns x + delta projected onto the epsilon ball around x.
signal::Waveform codec_aware_craft(const AttackFn& attack, const ChannelFn& eta,
                                   const signal::Waveform& x, double epsilon);

// Convenience overload: eta = apply_channel with loss_rate forced to zero
// (codec distortion only; stochastic loss is handled by redundancy, not
// crafting).
signal::Waveform codec_aware_craft(const AttackFn& attack, const signal::Waveform& x,
                                   double epsilon, ChannelConfig cfg);

}  // namespace advoice::channel
