#pragma once

// 112-byte synchrophasor data frame, big-endian on the wire.
//
//   off  size  field
//     0     2  sync        0xAA01
//     2     2  frame_size  112
//     4     2  id_code
//     6     4  soc         seconds of century
//    10     4  frac_sec    bits 27..24 time quality, bits 23..0 fraction of second
//    14     2  stat        bit 15 = anomaly flag
//    16    80  phasors     10 x (real f32, imag f32)
//    96     4  freq        f32 Hz deviation
//   100     4  dfreq       f32 Hz/s
//   104     4  analog      f32
//   108     2  digital
//   110     2  chk         CRC-CCITT (poly 0x1021, init 0xFFFF) over bytes 0..109

#include <array>
#include <bit>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmufog::codec {

inline constexpr std::size_t kFrameSize = 112;
inline constexpr std::uint16_t kSync = 0xAA01;
inline constexpr std::size_t kPhasorCount = 10;
inline constexpr std::uint16_t kAnomalyBit = 0x8000;

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

inline std::uint16_t crc_ccitt(std::span<const std::uint8_t> data, std::uint16_t crc = 0xFFFF) {
    for (const std::uint8_t byte : data) {
        crc ^= static_cast<std::uint16_t>(byte) << 8;
        for (int bit = 0; bit < 8; ++bit) {
            crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : static_cast<std::uint16_t>(crc << 1);
        }
    }
    return crc;
}

struct Phasor {
    float real = 0.0f;
    float imag = 0.0f;
    bool operator==(const Phasor&) const = default;
};

struct DataFrame {
    std::uint16_t sync = kSync;
    std::uint16_t frame_size = kFrameSize;
    std::uint16_t id_code = 0;
    std::uint32_t soc = 0;
    std::uint32_t fraction = 0;      // 24 bits
    std::uint8_t time_quality = 0;   // 4 bits
    std::uint16_t stat = 0;
    std::array<Phasor, kPhasorCount> phasors{};
    float freq = 0.0f;
    float dfreq = 0.0f;
    float analog = 0.0f;
    std::uint16_t digital = 0;

    bool anomaly() const { return (stat & kAnomalyBit) != 0; }
    void set_anomaly(bool on) { stat = on ? (stat | kAnomalyBit) : (stat & ~kAnomalyBit); }

    bool operator==(const DataFrame&) const = default;
};

class EncodeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class DecodeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};
class BadLengthError : public DecodeError {
  public:
    using DecodeError::DecodeError;
};
class BadSyncError : public DecodeError {
  public:
    using DecodeError::DecodeError;
};
class BadFrameSizeError : public DecodeError {
  public:
    using DecodeError::DecodeError;
};
class CrcMismatchError : public DecodeError {
  public:
    using DecodeError::DecodeError;
};

namespace detail {

struct Writer {
    FrameBytes& out;
    std::size_t pos = 0;
    void u16(std::uint16_t v) {
        out[pos++] = static_cast<std::uint8_t>(v >> 8);
        out[pos++] = static_cast<std::uint8_t>(v);
    }
    void u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v >> 16));
        u16(static_cast<std::uint16_t>(v));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
};

struct Reader {
    std::span<const std::uint8_t> in;
    std::size_t pos = 0;
    std::uint16_t u16() {
        const auto v = static_cast<std::uint16_t>((in[pos] << 8) | in[pos + 1]);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        const std::uint32_t hi = u16();
        return (hi << 16) | u16();
    }
    float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace detail

inline FrameBytes encode(const DataFrame& f) {
    if (f.sync != kSync) throw EncodeError("encode: sync must be 0xAA01");
    if (f.frame_size != kFrameSize) throw EncodeError("encode: frame_size must be 112");
    if (f.fraction > 0xFFFFFFu) throw EncodeError("encode: fraction exceeds 24 bits");
    if (f.time_quality > 0xF) throw EncodeError("encode: time_quality exceeds 4 bits");

    FrameBytes out{};
    detail::Writer w{out};
    w.u16(f.sync);
    w.u16(f.frame_size);
    w.u16(f.id_code);
    w.u32(f.soc);
    w.u32((static_cast<std::uint32_t>(f.time_quality) << 24) | f.fraction);
    w.u16(f.stat);
    for (const Phasor& p : f.phasors) {
        w.f32(p.real);
        w.f32(p.imag);
    }
    w.f32(f.freq);
    w.f32(f.dfreq);
    w.f32(f.analog);
    w.u16(f.digital);
    w.u16(crc_ccitt(std::span<const std::uint8_t>(out.data(), kFrameSize - 2)));
    return out;
}

/// Checks length, then CRC, then sync and frame_size. Any corrupted byte
/// therefore surfaces as a CRC mismatch.
inline DataFrame decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kFrameSize) {
        throw BadLengthError("decode: expected 112 bytes, got " + std::to_string(bytes.size()));
    }
    const std::uint16_t expected = crc_ccitt(bytes.first(kFrameSize - 2));
    const auto carried = static_cast<std::uint16_t>((bytes[kFrameSize - 2] << 8) | bytes[kFrameSize - 1]);
    if (expected != carried) throw CrcMismatchError("decode: CRC mismatch");

    detail::Reader r{bytes};
    DataFrame f;
    f.sync = r.u16();
    if (f.sync != kSync) throw BadSyncError("decode: bad sync word");
    f.frame_size = r.u16();
    if (f.frame_size != kFrameSize) throw BadFrameSizeError("decode: frame_size field is not 112");
    f.id_code = r.u16();
    f.soc = r.u32();
    const std::uint32_t frac = r.u32();
    f.time_quality = static_cast<std::uint8_t>((frac >> 24) & 0xF);
    f.fraction = frac & 0xFFFFFFu;
    f.stat = r.u16();
    for (Phasor& p : f.phasors) {
        p.real = r.f32();
        p.imag = r.f32();
    }
    f.freq = r.f32();
    f.dfreq = r.f32();
    f.analog = r.f32();
    f.digital = r.u16();
    return f;
}

}  // namespace pmufog::codec
