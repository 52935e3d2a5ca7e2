#include <gtest/gtest.h>

#include <random>
#include <string>

#include "gazegpt/codec.hpp"
#include "gazegpt/error.hpp"
#include "gazegpt/image.hpp"

using namespace gazegpt;

namespace {
std::vector<std::uint8_t> bytes(std::string_view s) { return {s.begin(), s.end()}; }
}  // namespace

TEST(Base64, KnownVectors) {
    const std::pair<const char*, const char*> cases[] = {
        {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="},
        {"foobar", "Zm9vYmFy"}};
    for (const auto& [plain, enc] : cases) {
        EXPECT_EQ(base64_encode(bytes(plain)), enc);
        EXPECT_EQ(base64_decode(enc), bytes(plain));
    }
}

TEST(Base64, RoundTripsRandomBytes) {
    std::mt19937 rng(1);
    for (int len = 0; len < 200; ++len) {
        std::vector<std::uint8_t> data(static_cast<std::size_t>(len));
        for (auto& b : data) b = static_cast<std::uint8_t>(rng());
        ASSERT_EQ(base64_decode(base64_encode(data)), data);
    }
}

TEST(Base64, RejectsMalformedText) {
    EXPECT_THROW(base64_decode("Zm9"), DomainError);
    EXPECT_THROW(base64_decode("Zm9v!A=="), DomainError);
    EXPECT_THROW(base64_decode("Z==="), DomainError);
    EXPECT_THROW(base64_decode("Zg=a"), DomainError);
    EXPECT_THROW(base64_decode("Zg==Zm9v"), DomainError);
}

TEST(Wav, EncodeThenInspect) {
    std::vector<std::int16_t> samples(3200, 1000);
    const auto wav = encode_wav_pcm16(samples, 16000, 2);
    EXPECT_EQ(wav.size(), 44u + samples.size() * 2);
    const auto info = inspect_wav(wav);
    EXPECT_EQ(info.sample_rate, 16000);
    EXPECT_EQ(info.channels, 2);
    EXPECT_EQ(info.frames, 1600u);
    EXPECT_DOUBLE_EQ(info.duration_s(), 0.1);
}

TEST(Wav, ToneHasTheRequestedLength) {
    const auto info = inspect_wav(tone_wav(0.25, 440.0, 8000));
    EXPECT_EQ(info.frames, 2000u);
    EXPECT_EQ(info.channels, 1);
}

TEST(Wav, RejectsNonWavPayloads) {
    EXPECT_THROW(inspect_wav(bytes("not a wav file at all, definitely not")), DomainError);
    auto wav = tone_wav(0.01);
    wav.resize(20);
    EXPECT_THROW(inspect_wav(wav), DomainError);
}

TEST(Png, RoundTripsLosslessly) {
    Image img(37, 19);
    std::mt19937 rng(2);
    for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(decode_png(encode_png(img)), img);
    EXPECT_ANY_THROW(decode_png(bytes("garbage")));
}
