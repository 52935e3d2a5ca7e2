#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gazegpt::pipeline {

enum class Stage { stt, lmm, tts };

std::string_view to_string(Stage stage) noexcept;

/// Cooperative cancellation shared between a query and whoever may abort it.
class CancelToken {
public:
    void cancel();
    bool cancelled() const noexcept { return cancelled_.load(); }
    /// Sleeps up to `seconds`; returns false if cancelled first.
    bool sleep_for(double seconds) const;

private:
    std::atomic<bool> cancelled_{false};
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
};

/// Per-call limits handed to every backend client.
struct CallContext {
    double timeout_s = 30.0;
    const CancelToken* cancel = nullptr;
};

/// Typed failure of one stage. A stage either yields a value or throws this.
class StageError : public std::runtime_error {
public:
    enum class Kind { failed, timeout, cancelled };

    StageError(Stage stage, Kind kind, const std::string& message);

    Stage stage() const noexcept { return stage_; }
    Kind kind() const noexcept { return kind_; }

private:
    Stage stage_;
    Kind kind_;
};

std::string_view to_string(StageError::Kind kind) noexcept;

struct AudioClip {
    std::vector<std::uint8_t> wav;
    bool empty() const noexcept { return wav.empty(); }
};

struct EncodedImage {
    std::string mime = "image/png";
    std::string base64;
    std::string caption;
};

struct VisionRequest {
    std::string system_prompt;
    std::string prompt;
    std::vector<EncodedImage> images;
};

class Transcriber {
public:
    virtual ~Transcriber() = default;
    virtual std::string transcribe(const AudioClip& audio, const CallContext& ctx) = 0;
};

class VisionModel {
public:
    virtual ~VisionModel() = default;
    virtual std::string respond(const VisionRequest& request, const CallContext& ctx) = 0;
};

class Synthesizer {
public:
    virtual ~Synthesizer() = default;
    virtual AudioClip synthesize(const std::string& text, const CallContext& ctx) = 0;
};

struct Clients {
    std::shared_ptr<Transcriber> stt;
    std::shared_ptr<VisionModel> lmm;
    std::shared_ptr<Synthesizer> tts;
};

// ---------------------------------------------------------------------------
// Mock backends

/// How a mock stage behaves: wait `delay_s`, then succeed or fail. A delay longer than the
/// call's timeout turns into a timeout error after `timeout_s`.
struct MockBehavior {
    enum class Failure { none, error, timeout };

    double delay_s = 0.0;
    Failure failure = Failure::none;
};

MockBehavior::Failure mock_failure_from_string(std::string_view name);

/// Thread-safe record of calls made on a mock.
class CallLog {
public:
    void record(std::string entry);
    std::vector<std::string> entries() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> entries_;
};

class ScriptedTranscriber final : public Transcriber {
public:
    ScriptedTranscriber(std::string text, MockBehavior behavior = {});
    std::string transcribe(const AudioClip& audio, const CallContext& ctx) override;
    const CallLog& calls() const noexcept { return calls_; }

private:
    std::string text_;
    MockBehavior behavior_;
    CallLog calls_;
};

/// Answers from a fixed script (cycled) or from a responder function.
class ScriptedVisionModel final : public VisionModel {
public:
    using Responder = std::function<std::string(const VisionRequest&)>;

    ScriptedVisionModel(std::vector<std::string> responses, MockBehavior behavior = {});
    ScriptedVisionModel(Responder responder, MockBehavior behavior = {});
    std::string respond(const VisionRequest& request, const CallContext& ctx) override;
    const CallLog& calls() const noexcept { return calls_; }
    /// Requests seen so far, in order.
    std::vector<VisionRequest> requests() const;

private:
    std::vector<std::string> responses_;
    Responder responder_;
    MockBehavior behavior_;
    CallLog calls_;
    mutable std::mutex mutex_;
    std::vector<VisionRequest> requests_;
    std::size_t next_ = 0;
};

/// Produces a 16 kHz sine tone lasting 60 ms per word.
class ToneSynthesizer final : public Synthesizer {
public:
    explicit ToneSynthesizer(MockBehavior behavior = {});
    AudioClip synthesize(const std::string& text, const CallContext& ctx) override;
    const CallLog& calls() const noexcept { return calls_; }

private:
    MockBehavior behavior_;
    CallLog calls_;
};

// ---------------------------------------------------------------------------
// Live backends (HTTP)

struct Endpoint {
    std::string base_url;          ///< scheme://host[:port]
    std::string path;              ///< request path, may contain {voice_id}
    std::string api_key_env;       ///< environment variable holding the key
    std::string model;
    std::string voice_id;          ///< synthesis only
    double timeout_s = 30.0;
};

Endpoint default_whisper_endpoint();
Endpoint default_vision_endpoint();
Endpoint default_synthesis_endpoint();

/// OpenAI-style multipart audio transcription.
std::shared_ptr<Transcriber> make_whisper_transcriber(Endpoint endpoint);
/// OpenAI-style chat completion with base64 data-URL images.
std::shared_ptr<VisionModel> make_chat_vision_model(Endpoint endpoint);
/// ElevenLabs-style text-to-speech returning audio bytes.
std::shared_ptr<Synthesizer> make_speech_synthesizer(Endpoint endpoint);

}  // namespace gazegpt::pipeline
