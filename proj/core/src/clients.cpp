#include "gazegpt/clients.hpp"

#include <sstream>
#include <thread>

#include "gazegpt/codec.hpp"
#include "gazegpt/error.hpp"

namespace gazegpt::pipeline {

std::string_view to_string(Stage stage) noexcept {
    switch (stage) {
        case Stage::stt: return "stt";
        case Stage::lmm: return "lmm";
        case Stage::tts: return "tts";
    }
    return "unknown";
}

std::string_view to_string(StageError::Kind kind) noexcept {
    switch (kind) {
        case StageError::Kind::failed: return "failed";
        case StageError::Kind::timeout: return "timeout";
        case StageError::Kind::cancelled: return "cancelled";
    }
    return "unknown";
}

StageError::StageError(Stage stage, Kind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(stage)) + " " + std::string(to_string(kind)) + ": " + message),
      stage_(stage),
      kind_(kind) {}

void CancelToken::cancel() {
    {
        std::lock_guard lock(mutex_);
        cancelled_ = true;
    }
    cv_.notify_all();
}

bool CancelToken::sleep_for(double seconds) const {
    std::unique_lock lock(mutex_);
    return !cv_.wait_for(lock, std::chrono::duration<double>(seconds), [&] { return cancelled_.load(); });
}

MockBehavior::Failure mock_failure_from_string(std::string_view name) {
    if (name == "none" || name.empty()) return MockBehavior::Failure::none;
    if (name == "error") return MockBehavior::Failure::error;
    if (name == "timeout") return MockBehavior::Failure::timeout;
    throw DomainError("unknown mock failure '" + std::string(name) + "'");
}

void CallLog::record(std::string entry) {
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(entry));
}

std::vector<std::string> CallLog::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t CallLog::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

namespace {

void wait(double seconds, const CallContext& ctx, Stage stage) {
    if (seconds <= 0.0) return;
    if (ctx.cancel != nullptr) {
        if (!ctx.cancel->sleep_for(seconds)) {
            throw StageError(stage, StageError::Kind::cancelled, "query cancelled");
        }
    } else {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
}

// Simulated latency and failure shared by all mocks.
void play(const MockBehavior& behavior, const CallContext& ctx, Stage stage) {
    if (behavior.failure == MockBehavior::Failure::timeout || behavior.delay_s > ctx.timeout_s) {
        wait(ctx.timeout_s, ctx, stage);
        throw StageError(stage, StageError::Kind::timeout,
                         "no response within " + std::to_string(ctx.timeout_s) + " s");
    }
    wait(behavior.delay_s, ctx, stage);
    if (behavior.failure == MockBehavior::Failure::error) {
        throw StageError(stage, StageError::Kind::failed, "mock backend configured to fail");
    }
}

}  // namespace

ScriptedTranscriber::ScriptedTranscriber(std::string text, MockBehavior behavior)
    : text_(std::move(text)), behavior_(behavior) {}

std::string ScriptedTranscriber::transcribe(const AudioClip& audio, const CallContext& ctx) {
    calls_.record("transcribe " + std::to_string(audio.wav.size()) + " bytes");
    play(behavior_, ctx, Stage::stt);
    return text_;
}

ScriptedVisionModel::ScriptedVisionModel(std::vector<std::string> responses, MockBehavior behavior)
    : responses_(std::move(responses)), behavior_(behavior) {
    if (responses_.empty()) {
        throw DomainError("ScriptedVisionModel: at least one scripted response required");
    }
}

ScriptedVisionModel::ScriptedVisionModel(Responder responder, MockBehavior behavior)
    : responder_(std::move(responder)), behavior_(behavior) {}

std::string ScriptedVisionModel::respond(const VisionRequest& request, const CallContext& ctx) {
    calls_.record("respond " + std::to_string(request.images.size()) + " images");
    std::string answer;
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
        if (!responder_) {
            answer = responses_[next_ % responses_.size()];
            ++next_;
        }
    }
    play(behavior_, ctx, Stage::lmm);
    if (responder_) {
        answer = responder_(request);
    }
    return answer;
}

std::vector<VisionRequest> ScriptedVisionModel::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

ToneSynthesizer::ToneSynthesizer(MockBehavior behavior) : behavior_(behavior) {}

AudioClip ToneSynthesizer::synthesize(const std::string& text, const CallContext& ctx) {
    calls_.record("synthesize " + std::to_string(text.size()) + " chars");
    play(behavior_, ctx, Stage::tts);
    std::istringstream words(text);
    std::size_t count = 0;
    for (std::string w; words >> w;) ++count;
    return AudioClip{tone_wav(0.06 * static_cast<double>(std::max<std::size_t>(count, 1)))};
}

}  // namespace gazegpt::pipeline
