#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gazegpt {

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws DomainError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// 16-bit PCM WAV.
struct WavInfo {
    int sample_rate = 0;
    int channels = 0;
    std::size_t frames = 0;
    double duration_s() const noexcept { return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0; }
};

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const std::int16_t> samples, int sample_rate,
                                           int channels = 1);
/// Parses the RIFF header; throws DomainError unless the payload is PCM WAV.
WavInfo inspect_wav(std::span<const std::uint8_t> wav);

/// Mono sine tone, used by the mock synthesizer and tests.
std::vector<std::uint8_t> tone_wav(double seconds, double hz = 440.0, int sample_rate = 16000);

}  // namespace gazegpt
