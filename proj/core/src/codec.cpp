#include "gazegpt/codec.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "gazegpt/error.hpp"

namespace gazegpt {

std::string base64_encode(std::span<const std::uint8_t> data) {
    std::string out(4 * ((data.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (c != '\n' && c != '\r' && c != ' ' && c != '\t') clean.push_back(c);
    }
    if (clean.size() % 4 != 0) {
        throw DomainError("base64_decode: length is not a multiple of 4");
    }
    const auto first_pad = clean.find('=');
    if (first_pad != std::string::npos &&
        (clean.size() - first_pad > 2 || clean.find_first_not_of('=', first_pad) != std::string::npos)) {
        throw DomainError("base64_decode: misplaced padding");
    }
    std::vector<std::uint8_t> out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) {
        throw DomainError("base64_decode: invalid characters");
    }
    std::size_t padding = 0;
    if (!clean.empty() && clean.back() == '=') ++padding;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++padding;
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

}  // namespace

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const std::int16_t> samples, int sample_rate,
                                           int channels) {
    if (sample_rate <= 0 || channels <= 0) {
        throw DomainError("encode_wav_pcm16: sample rate and channels must be positive");
    }
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    for (char c : std::string_view("RIFF")) out.push_back(static_cast<std::uint8_t>(c));
    put_u32(out, 36 + data_bytes);
    for (char c : std::string_view("WAVEfmt ")) out.push_back(static_cast<std::uint8_t>(c));
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, static_cast<std::uint16_t>(channels));
    put_u32(out, static_cast<std::uint32_t>(sample_rate));
    put_u32(out, static_cast<std::uint32_t>(sample_rate * channels * 2));
    put_u16(out, static_cast<std::uint16_t>(channels * 2));
    put_u16(out, 16);
    for (char c : std::string_view("data")) out.push_back(static_cast<std::uint8_t>(c));
    put_u32(out, data_bytes);
    for (std::int16_t s : samples) put_u16(out, static_cast<std::uint16_t>(s));
    return out;
}

WavInfo inspect_wav(std::span<const std::uint8_t> wav) {
    if (wav.size() < 12 || std::memcmp(wav.data(), "RIFF", 4) != 0 || std::memcmp(wav.data() + 8, "WAVE", 4) != 0) {
        throw DomainError("inspect_wav: not a RIFF/WAVE payload");
    }
    WavInfo info;
    int bits = 0;
    bool have_fmt = false;
    std::size_t at = 12;
    while (at + 8 <= wav.size()) {
        const std::uint32_t size = get_u32(wav, at + 4);
        const std::size_t body = at + 8;
        if (body + size > wav.size()) {
            throw DomainError("inspect_wav: truncated chunk");
        }
        if (std::memcmp(wav.data() + at, "fmt ", 4) == 0) {
            if (size < 16 || get_u16(wav, body) != 1) {
                throw DomainError("inspect_wav: only PCM WAV is supported");
            }
            info.channels = get_u16(wav, body + 2);
            info.sample_rate = static_cast<int>(get_u32(wav, body + 4));
            bits = get_u16(wav, body + 14);
            have_fmt = true;
        } else if (std::memcmp(wav.data() + at, "data", 4) == 0) {
            if (!have_fmt || bits == 0 || info.channels == 0) {
                throw DomainError("inspect_wav: data chunk before fmt chunk");
            }
            info.frames = size / (static_cast<std::size_t>(bits / 8) * static_cast<std::size_t>(info.channels));
            return info;
        }
        at = body + size + (size & 1U);
    }
    throw DomainError("inspect_wav: no data chunk");
}

std::vector<std::uint8_t> tone_wav(double seconds, double hz, int sample_rate) {
    const auto n = static_cast<std::size_t>(std::max(0.0, seconds) * sample_rate);
    std::vector<std::int16_t> samples(n);
    for (std::size_t i = 0; i < n; ++i) {
        samples[i] = static_cast<std::int16_t>(
            std::lround(8000.0 * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sample_rate)));
    }
    return encode_wav_pcm16(samples, sample_rate, 1);
}

}  // namespace gazegpt
