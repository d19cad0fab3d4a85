#include <gtest/gtest.h>

#include <bit>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "pmufog/frame_codec.hpp"

using namespace pmufog::codec;

namespace {

FrameBytes load_golden() {
    std::ifstream is(std::string(PMUFOG_FIXTURES) + "/golden_frame.hex");
    FrameBytes b{};
    std::size_t i = 0;
    unsigned v = 0;
    while (is >> std::hex >> v) {
        if (i < b.size()) b[i] = static_cast<std::uint8_t>(v);
        ++i;
    }
    EXPECT_EQ(i, kFrameSize);
    return b;
}

DataFrame golden_fields() {
    DataFrame f;
    f.id_code = 7;
    f.soc = 1000000000;
    f.fraction = 500000;
    f.time_quality = 3;
    f.stat = 0x8002;
    for (int i = 0; i < 10; ++i) f.phasors[static_cast<std::size_t>(i)] = {1.0f + 0.5f * i, -0.25f * i};
    f.freq = 0.01f;
    f.dfreq = -0.5f;
    f.analog = 230.5f;
    f.digital = 0x00F1;
    return f;
}

DataFrame random_frame(std::mt19937_64& rng) {
    DataFrame f;
    f.id_code = static_cast<std::uint16_t>(rng());
    f.soc = static_cast<std::uint32_t>(rng());
    f.fraction = static_cast<std::uint32_t>(rng() & 0xFFFFFF);
    f.time_quality = static_cast<std::uint8_t>(rng() & 0xF);
    f.stat = static_cast<std::uint16_t>(rng());
    auto any_float = [&] { return std::bit_cast<float>(static_cast<std::uint32_t>(rng())); };
    for (auto& p : f.phasors) p = {any_float(), any_float()};
    f.freq = any_float();
    f.dfreq = any_float();
    f.analog = any_float();
    f.digital = static_cast<std::uint16_t>(rng());
    return f;
}

bool same_bits(const DataFrame& a, const DataFrame& b) {
    auto bits = [](float x) { return std::bit_cast<std::uint32_t>(x); };
    if (a.sync != b.sync || a.frame_size != b.frame_size || a.id_code != b.id_code || a.soc != b.soc ||
        a.fraction != b.fraction || a.time_quality != b.time_quality || a.stat != b.stat || a.digital != b.digital) {
        return false;
    }
    for (std::size_t i = 0; i < kPhasorCount; ++i) {
        if (bits(a.phasors[i].real) != bits(b.phasors[i].real) || bits(a.phasors[i].imag) != bits(b.phasors[i].imag)) {
            return false;
        }
    }
    return bits(a.freq) == bits(b.freq) && bits(a.dfreq) == bits(b.dfreq) && bits(a.analog) == bits(b.analog);
}

}  // namespace

TEST(Crc, CheckValue) {
    const std::string s = "123456789";
    EXPECT_EQ(crc_ccitt(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
              0x29B1);
    EXPECT_EQ(crc_ccitt(std::span<const std::uint8_t>{}), 0xFFFF);
}

TEST(Codec, GoldenFrameBytes) {
    const auto golden = load_golden();
    EXPECT_EQ(encode(golden_fields()), golden);
    EXPECT_EQ(golden[110], 0xC7);
    EXPECT_EQ(golden[111], 0x3C);
    EXPECT_TRUE(same_bits(decode(golden), golden_fields()));
}

TEST(Codec, ZeroPayloadFrame) {
    const auto b = encode(DataFrame{});
    EXPECT_EQ(b[0], 0xAA);
    EXPECT_EQ(b[1], 0x01);
    EXPECT_EQ(b[2], 0x00);
    EXPECT_EQ(b[3], 0x70);
    for (std::size_t i = 4; i < 110; ++i) EXPECT_EQ(b[i], 0);
    EXPECT_EQ(b[110], 0xC9);
    EXPECT_EQ(b[111], 0x24);
}

TEST(Codec, RandomRoundTrip) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 2000; ++i) {
        const auto f = random_frame(rng);
        const auto b = encode(f);
        ASSERT_EQ(b.size(), kFrameSize);
        ASSERT_TRUE(same_bits(decode(b), f));
    }
}

TEST(Codec, EverySingleByteCorruptionRejected) {
    const auto golden = load_golden();
    for (std::size_t i = 0; i < kFrameSize; ++i) {
        for (int delta = 1; delta < 256; ++delta) {
            auto b = golden;
            b[i] = static_cast<std::uint8_t>(b[i] ^ delta);
            EXPECT_THROW(decode(b), CrcMismatchError) << "byte " << i << " xor " << delta;
        }
    }
}

TEST(Codec, TypedDecodeErrors) {
    const auto golden = load_golden();
    EXPECT_THROW(decode(std::span<const std::uint8_t>(golden.data(), 111)), BadLengthError);
    std::vector<std::uint8_t> longer(golden.begin(), golden.end());
    longer.push_back(0);
    EXPECT_THROW(decode(longer), BadLengthError);

    auto badsync = golden;
    badsync[1] = 0x02;
    const auto crc = crc_ccitt(std::span<const std::uint8_t>(badsync.data(), 110));
    badsync[110] = static_cast<std::uint8_t>(crc >> 8);
    badsync[111] = static_cast<std::uint8_t>(crc);
    EXPECT_THROW(decode(badsync), BadSyncError);

    auto badsize = golden;
    badsize[3] = 0x71;
    const auto crc2 = crc_ccitt(std::span<const std::uint8_t>(badsize.data(), 110));
    badsize[110] = static_cast<std::uint8_t>(crc2 >> 8);
    badsize[111] = static_cast<std::uint8_t>(crc2);
    EXPECT_THROW(decode(badsize), BadFrameSizeError);
    // All typed errors share a base.
    EXPECT_THROW(decode(badsize), DecodeError);
}

TEST(Codec, EncodeRejectsOutOfRangeFields) {
    DataFrame f;
    f.fraction = 0x1000000;
    try {
        encode(f);
        FAIL();
    } catch (const EncodeError& e) {
        EXPECT_NE(std::string(e.what()).find("fraction"), std::string::npos);
    }
    f = DataFrame{};
    f.time_quality = 16;
    try {
        encode(f);
        FAIL();
    } catch (const EncodeError& e) {
        EXPECT_NE(std::string(e.what()).find("time_quality"), std::string::npos);
    }
    f = DataFrame{};
    f.sync = 0xAA31;
    EXPECT_THROW(encode(f), EncodeError);
}

TEST(Codec, AnomalyBitChangesOnePayloadBit) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        auto f = random_frame(rng);
        f.set_anomaly(false);
        const auto off = encode(f);
        f.set_anomaly(true);
        EXPECT_TRUE(f.anomaly());
        const auto on = encode(f);
        int bits = 0;
        for (std::size_t i = 0; i < 110; ++i) bits += std::popcount(static_cast<unsigned>(off[i] ^ on[i]));
        EXPECT_EQ(bits, 1);
        EXPECT_NE(off[14] ^ on[14], 0);
        EXPECT_TRUE(off[110] != on[110] || off[111] != on[111]);
    }
}
