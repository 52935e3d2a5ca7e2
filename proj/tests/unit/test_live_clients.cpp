// The live adapters talk to a local fake of each backend.
#include <httplib.h>

#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "gazegpt/clients.hpp"
#include "gazegpt/codec.hpp"

using namespace gazegpt;
using namespace gazegpt::pipeline;

namespace {

class FakeBackend {
public:
    FakeBackend() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeBackend() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

Endpoint endpoint(const FakeBackend& fake, std::string path, std::string model = "m") {
    ::setenv("GAZEGPT_FAKE_KEY", "sekret", 1);
    return {fake.url(), std::move(path), "GAZEGPT_FAKE_KEY", std::move(model), "voice42", 5.0};
}

StageError::Kind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const StageError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no StageError thrown";
    return StageError::Kind::cancelled;
}

}  // namespace

TEST(LiveClients, WhisperSendsMultipartAudio) {
    FakeBackend fake;
    const auto wav = tone_wav(0.05);
    fake.server().Post("/v1/audio/transcriptions", [&](const httplib::Request& req, httplib::Response& res) {
        EXPECT_EQ(req.get_header_value("Authorization"), "Bearer sekret");
        ASSERT_TRUE(req.is_multipart_form_data());
        ASSERT_TRUE(req.has_file("file"));
        EXPECT_EQ(req.get_file_value("file").content, std::string(wav.begin(), wav.end()));
        EXPECT_EQ(req.get_file_value("file").filename, "audio.wav");
        EXPECT_EQ(req.get_file_value("model").content, "whisper-1");
        res.set_content(R"({"text": "what dog is that"})", "application/json");
    });
    auto stt = make_whisper_transcriber(endpoint(fake, "/v1/audio/transcriptions", "whisper-1"));
    EXPECT_EQ(stt->transcribe(AudioClip{wav}, {}), "what dog is that");
}

TEST(LiveClients, ChatSendsDataUrlImages) {
    FakeBackend fake;
    fake.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        EXPECT_EQ(body["model"], "vision-model");
        const auto& msgs = body["messages"];
        EXPECT_EQ(msgs[0]["role"], "system");
        EXPECT_EQ(msgs[0]["content"], "sys");
        EXPECT_EQ(msgs[1]["role"], "user");
        EXPECT_EQ(msgs[1]["content"][0]["text"], "what is it");
        EXPECT_EQ(msgs[1]["content"][1]["image_url"]["url"], "data:image/png;base64,QUJD");
        EXPECT_EQ(msgs[1]["content"][2]["image_url"]["url"], "data:image/png;base64,REVG");
        res.set_content(R"({"choices": [{"message": {"role": "assistant", "content": "A pug."}}]})",
                        "application/json");
    });
    auto lmm = make_chat_vision_model(endpoint(fake, "/v1/chat/completions", "vision-model"));
    VisionRequest req{"sys", "what is it", {{"image/png", "QUJD", ""}, {"image/png", "REVG", ""}}};
    EXPECT_EQ(lmm->respond(req, {}), "A pug.");
}

TEST(LiveClients, SpeechWrapsRawPcmIntoWav) {
    FakeBackend fake;
    fake.server().Post("/v1/text-to-speech/voice42", [&](const httplib::Request& req, httplib::Response& res) {
        EXPECT_EQ(req.get_header_value("xi-api-key"), "sekret");
        EXPECT_EQ(req.get_param_value("output_format"), "pcm_16000");
        EXPECT_EQ(nlohmann::json::parse(req.body)["text"], "hello there");
        res.set_content(std::string(3200, '\x01'), "application/octet-stream");
    });
    auto tts = make_speech_synthesizer(endpoint(fake, "/v1/text-to-speech/{voice_id}?output_format=pcm_16000"));
    const auto clip = tts->synthesize("hello there", {});
    const auto info = inspect_wav(clip.wav);
    EXPECT_EQ(info.sample_rate, 16000);
    EXPECT_EQ(info.frames, 1600u);
}

TEST(LiveClients, SpeechPassesWavThrough) {
    FakeBackend fake;
    const auto wav = tone_wav(0.02);
    fake.server().Post("/tts", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(std::string(wav.begin(), wav.end()), "audio/wav");
    });
    auto tts = make_speech_synthesizer(endpoint(fake, "/tts"));
    EXPECT_EQ(tts->synthesize("x", {}).wav, wav);
}

TEST(LiveClients, ErrorsMapToStageErrors) {
    FakeBackend fake;
    fake.server().Post("/fail", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    fake.server().Post("/slow", [](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1500));
        res.set_content(R"({"text": "late"})", "application/json");
    });
    fake.server().Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json", "application/json");
    });

    auto fail = make_whisper_transcriber(endpoint(fake, "/fail"));
    EXPECT_EQ(kind_of([&] { fail->transcribe(AudioClip{tone_wav(0.01)}, {}); }), StageError::Kind::failed);

    auto garbage = make_chat_vision_model(endpoint(fake, "/garbage"));
    EXPECT_EQ(kind_of([&] { garbage->respond({}, {}); }), StageError::Kind::failed);

    auto slow = make_whisper_transcriber(endpoint(fake, "/slow"));
    const auto t0 = std::chrono::steady_clock::now();
    EXPECT_EQ(kind_of([&] { slow->transcribe(AudioClip{tone_wav(0.01)}, {0.3, nullptr}); }),
              StageError::Kind::timeout);
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.4);

    // The endpoint's own timeout applies when it is the tighter one.
    auto ep = endpoint(fake, "/slow");
    ep.timeout_s = 0.3;
    auto tight = make_whisper_transcriber(ep);
    EXPECT_EQ(kind_of([&] { tight->transcribe(AudioClip{tone_wav(0.01)}, {30.0, nullptr}); }),
              StageError::Kind::timeout);

    CancelToken token;
    token.cancel();
    EXPECT_EQ(kind_of([&] { fail->transcribe(AudioClip{}, {1.0, &token}); }), StageError::Kind::cancelled);
}

TEST(LiveClients, MissingKeyOrServerFails) {
    FakeBackend fake;
    auto ep = endpoint(fake, "/anything");
    ep.api_key_env = "GAZEGPT_DEFINITELY_UNSET_KEY";
    ::unsetenv("GAZEGPT_DEFINITELY_UNSET_KEY");
    auto lmm = make_chat_vision_model(ep);
    EXPECT_EQ(kind_of([&] { lmm->respond({}, {}); }), StageError::Kind::failed);

    Endpoint closed{"http://127.0.0.1:1", "/x", "", "m", "", 1.0};
    auto tts = make_speech_synthesizer(closed);
    EXPECT_EQ(kind_of([&] { tts->synthesize("x", {}); }), StageError::Kind::failed);
}

TEST(LiveClients, DefaultEndpoints) {
    EXPECT_EQ(default_whisper_endpoint().model, "whisper-1");
    EXPECT_EQ(default_vision_endpoint().api_key_env, "OPENAI_API_KEY");
    EXPECT_NE(default_synthesis_endpoint().path.find("{voice_id}"), std::string::npos);
    EXPECT_EQ(default_synthesis_endpoint().api_key_env, "ELEVENLABS_API_KEY");
}
