// Live HTTP adapters for the speech and vision backends.
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "gazegpt/clients.hpp"
#include "gazegpt/codec.hpp"

namespace gazegpt::pipeline {

Endpoint default_whisper_endpoint() {
    return {"https://api.openai.com", "/v1/audio/transcriptions", "OPENAI_API_KEY", "whisper-1", "", 30.0};
}

Endpoint default_vision_endpoint() {
    return {"https://api.openai.com", "/v1/chat/completions", "OPENAI_API_KEY", "gpt-4o", "", 60.0};
}

Endpoint default_synthesis_endpoint() {
    return {"https://api.elevenlabs.io", "/v1/text-to-speech/{voice_id}?output_format=pcm_16000",
            "ELEVENLABS_API_KEY", "eleven_turbo_v2", "21m00Tcm4TlvDq8ikWAM", 30.0};
}

namespace {

std::string api_key(const Endpoint& ep, Stage stage) {
    if (ep.api_key_env.empty()) return {};
    const char* key = std::getenv(ep.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw StageError(stage, StageError::Kind::failed,
                         "environment variable " + ep.api_key_env + " is not set");
    }
    return key;
}

double effective_timeout(const Endpoint& ep, const CallContext& ctx) {
    return std::min(ep.timeout_s, ctx.timeout_s);
}

httplib::Client connect(const Endpoint& ep, const CallContext& ctx) {
    httplib::Client client(ep.base_url);
    const double timeout = effective_timeout(ep, ctx);
    const auto whole = static_cast<time_t>(timeout);
    const auto micros = static_cast<time_t>((timeout - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, micros);
    client.set_read_timeout(whole, micros);
    client.set_write_timeout(whole, micros);
    return client;
}

template <typename Call>
httplib::Result checked(Stage stage, const CallContext& ctx, double timeout_s, Call&& call) {
    if (ctx.cancel != nullptr && ctx.cancel->cancelled()) {
        throw StageError(stage, StageError::Kind::cancelled, "query cancelled");
    }
    const auto start = std::chrono::steady_clock::now();
    httplib::Result res = call();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                               (err == httplib::Error::Read && elapsed >= timeout_s * 0.95);
        throw StageError(stage, timed_out ? StageError::Kind::timeout : StageError::Kind::failed,
                         httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300) {
        throw StageError(stage, StageError::Kind::failed,
                         "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
    }
    return res;
}

class WhisperTranscriber final : public Transcriber {
public:
    explicit WhisperTranscriber(Endpoint ep) : ep_(std::move(ep)) {}

    std::string transcribe(const AudioClip& audio, const CallContext& ctx) override {
        auto client = connect(ep_, ctx);
        httplib::Headers headers;
        if (auto key = api_key(ep_, Stage::stt); !key.empty()) {
            headers.emplace("Authorization", "Bearer " + key);
        }
        httplib::MultipartFormDataItems items{
            {"file", std::string(audio.wav.begin(), audio.wav.end()), "audio.wav", "audio/wav"},
            {"model", ep_.model, "", ""},
            {"response_format", "json", "", ""},
        };
        auto res = checked(Stage::stt, ctx, effective_timeout(ep_, ctx),
                           [&] { return client.Post(ep_.path, headers, items); });
        try {
            return nlohmann::json::parse(res->body).at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw StageError(Stage::stt, StageError::Kind::failed, std::string("bad response: ") + e.what());
        }
    }

private:
    Endpoint ep_;
};

class ChatVisionModel final : public VisionModel {
public:
    explicit ChatVisionModel(Endpoint ep) : ep_(std::move(ep)) {}

    std::string respond(const VisionRequest& request, const CallContext& ctx) override {
        auto client = connect(ep_, ctx);
        httplib::Headers headers;
        if (auto key = api_key(ep_, Stage::lmm); !key.empty()) {
            headers.emplace("Authorization", "Bearer " + key);
        }
        nlohmann::json content = nlohmann::json::array();
        content.push_back({{"type", "text"}, {"text", request.prompt}});
        for (const auto& img : request.images) {
            content.push_back({{"type", "image_url"},
                               {"image_url", {{"url", "data:" + img.mime + ";base64," + img.base64}}}});
        }
        nlohmann::json messages = nlohmann::json::array();
        if (!request.system_prompt.empty()) {
            messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
        }
        messages.push_back({{"role", "user"}, {"content", content}});
        const nlohmann::json body{{"model", ep_.model}, {"messages", messages}, {"max_tokens", 400}};
        auto res = checked(Stage::lmm, ctx, effective_timeout(ep_, ctx), [&] {
            return client.Post(ep_.path, headers, body.dump(), "application/json");
        });
        try {
            return nlohmann::json::parse(res->body)
                .at("choices")
                .at(0)
                .at("message")
                .at("content")
                .get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw StageError(Stage::lmm, StageError::Kind::failed, std::string("bad response: ") + e.what());
        }
    }

private:
    Endpoint ep_;
};

class SpeechSynthesizer final : public Synthesizer {
public:
    explicit SpeechSynthesizer(Endpoint ep) : ep_(std::move(ep)) {}

    AudioClip synthesize(const std::string& text, const CallContext& ctx) override {
        auto client = connect(ep_, ctx);
        httplib::Headers headers;
        if (auto key = api_key(ep_, Stage::tts); !key.empty()) {
            headers.emplace("xi-api-key", key);
        }
        std::string path = ep_.path;
        if (const auto pos = path.find("{voice_id}"); pos != std::string::npos) {
            path.replace(pos, 10, ep_.voice_id);
        }
        const nlohmann::json body{{"text", text}, {"model_id", ep_.model}};
        auto res = checked(Stage::tts, ctx, effective_timeout(ep_, ctx), [&] {
            return client.Post(path, headers, body.dump(), "application/json");
        });
        std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
        if (bytes.size() >= 4 && std::string_view(res->body).substr(0, 4) == "RIFF") {
            return AudioClip{std::move(bytes)};
        }
        // Raw little-endian PCM16 at 16 kHz.
        std::vector<std::int16_t> samples(bytes.size() / 2);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            samples[i] = static_cast<std::int16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
        }
        return AudioClip{encode_wav_pcm16(samples, 16000, 1)};
    }

private:
    Endpoint ep_;
};

}  // namespace

std::shared_ptr<Transcriber> make_whisper_transcriber(Endpoint endpoint) {
    return std::make_shared<WhisperTranscriber>(std::move(endpoint));
}

std::shared_ptr<VisionModel> make_chat_vision_model(Endpoint endpoint) {
    return std::make_shared<ChatVisionModel>(std::move(endpoint));
}

std::shared_ptr<Synthesizer> make_speech_synthesizer(Endpoint endpoint) {
    return std::make_shared<SpeechSynthesizer>(std::move(endpoint));
}

}  // namespace gazegpt::pipeline
