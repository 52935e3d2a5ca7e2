#include <gtest/gtest.h>

#include <mutex>
#include <thread>

#include "gazegpt/codec.hpp"
#include "gazegpt/error.hpp"
#include "gazegpt/pipeline.hpp"
#include "gazegpt/service.hpp"

using namespace gazegpt;
using namespace gazegpt::pipeline;

namespace {

const capture::Session& small_demo() {
    static const capture::Session s = service::demo_session(geometry::intrinsics_from_fov(640, 480, 78.0), 3);
    return s;
}

QueryOptions fast_options() {
    QueryOptions o;
    o.crop.out_px = 48;
    o.query_id = "q7";
    return o;
}

struct Mocks {
    std::shared_ptr<ScriptedTranscriber> stt;
    std::shared_ptr<ScriptedVisionModel> lmm;
    std::shared_ptr<ToneSynthesizer> tts;
    Clients clients() const { return {stt, lmm, tts}; }
};

Mocks mocks(MockBehavior stt = {}, MockBehavior lmm = {}, MockBehavior tts = {}) {
    return {std::make_shared<ScriptedTranscriber>("what breed is this", stt),
            std::make_shared<ScriptedVisionModel>(std::vector<std::string>{"A beagle."}, lmm),
            std::make_shared<ToneSynthesizer>(tts)};
}

struct EventSink {
    std::mutex m;
    std::vector<StageEvent> events;
    std::function<void(const StageEvent&)> fn() {
        return [this](const StageEvent& e) {
            std::lock_guard lock(m);
            events.push_back(e);
        };
    }
    std::vector<std::string> summary() {
        std::vector<std::string> out;
        for (const auto& e : events) out.push_back(e.type + ":" + (e.stage ? std::string(to_string(*e.stage)) : "-") + ":" + e.status);
        return out;
    }
};

}  // namespace

TEST(RunQuery, TextQuestionSkipsTranscription) {
    auto m = mocks();
    EventSink sink;
    auto opts = fast_options();
    opts.on_event = sink.fn();
    const auto r = run_query(small_demo(), 1.0, {std::string("what is it?"), std::nullopt}, m.clients(), opts);
    const auto& t = r.transcript;
    EXPECT_EQ(t.status, "ok");
    EXPECT_EQ(t.input_kind, "text");
    EXPECT_EQ(t.question_text, "what is it?");
    EXPECT_EQ(t.response_text, "A beagle.");
    EXPECT_EQ(t.stage_latencies.at(Stage::stt), 0.0);
    EXPECT_EQ(m.stt->calls().size(), 0u);
    EXPECT_EQ(m.lmm->calls().size(), 1u);
    EXPECT_EQ(m.tts->calls().size(), 1u);
    EXPECT_EQ(t.audio_in_ref, "");
    EXPECT_EQ(t.audio_out_ref, "audio/q7_out.wav");
    EXPECT_EQ(t.crops["levels"][1]["image_ref"], "crops/q7_level1.png");
    EXPECT_FALSE(r.response_audio.empty());
    EXPECT_EQ(sink.summary(), (std::vector<std::string>{"stage_end:stt:skipped", "stage_start:lmm:running",
                                                        "stage_end:lmm:ok", "stage_start:tts:running",
                                                        "stage_end:tts:ok", "query_end:-:ok"}));
    for (const auto& e : sink.events) {
        EXPECT_EQ(e.session_id, "demo");
        EXPECT_EQ(e.query_id, "q7");
    }
}

TEST(RunQuery, SendsNarrowToWidePngCropsWithTheQuestion) {
    auto m = mocks();
    const auto r = run_query(small_demo(), 0.5, {std::nullopt, AudioClip{tone_wav(0.2)}}, m.clients(), fast_options());
    EXPECT_EQ(r.transcript.input_kind, "audio");
    EXPECT_EQ(r.transcript.question_text, "what breed is this");
    EXPECT_EQ(r.transcript.audio_in_ref, "audio/q7_in.wav");
    const auto reqs = m.lmm->requests();
    ASSERT_EQ(reqs.size(), 1u);
    EXPECT_EQ(reqs[0].prompt, "what breed is this");
    EXPECT_FALSE(reqs[0].system_prompt.empty());
    ASSERT_EQ(reqs[0].images.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto img = decode_png(base64_decode(reqs[0].images[i].base64));
        EXPECT_EQ(img, r.crop.levels[i].image);
        EXPECT_EQ(img.width(), 48);
        EXPECT_EQ(reqs[0].images[i].mime, "image/png");
    }
    EXPECT_LT(r.crop.levels[0].fov, r.crop.levels[1].fov);
}

TEST(RunQuery, GazeIsProjectedAtTheTriggerTime) {
    auto m = mocks();
    const auto& s = small_demo();
    const auto r = run_query(s, 1.0, {std::string("q"), std::nullopt}, m.clients(), fast_options());
    const auto layout = capture::session_layout(s);
    ASSERT_TRUE(layout);
    EXPECT_EQ(r.transcript.gaze_source, "projected");
    EXPECT_NEAR(r.transcript.gaze_px.u, layout->target_px->u, 1e-6);
    EXPECT_NEAR(r.transcript.gaze_px.v, layout->target_px->v, 1e-6);
    EXPECT_EQ(r.transcript.frame_index, 15u);
    EXPECT_DOUBLE_EQ(r.transcript.frame_t, 1.0);

    auto opts = fast_options();
    opts.gaze_override = geometry::PixelPoint{20.0, 30.0};
    const auto o = run_query(s, 1.0, {std::string("q"), std::nullopt}, m.clients(), opts);
    EXPECT_EQ(o.transcript.gaze_source, "override");
    EXPECT_EQ(o.crop.center, (geometry::PixelPoint{20.0, 30.0}));
}

TEST(RunQuery, LmmTimeoutStopsBeforeSynthesis) {
    auto m = mocks({}, {0.0, MockBehavior::Failure::timeout});
    EventSink sink;
    auto opts = fast_options();
    opts.lmm_timeout_s = 0.05;
    opts.on_event = sink.fn();
    const auto r = run_query(small_demo(), 0.2, {std::string("q"), std::nullopt}, m.clients(), opts);
    EXPECT_EQ(r.transcript.status, "failed");
    ASSERT_TRUE(r.transcript.failed_stage);
    EXPECT_EQ(*r.transcript.failed_stage, Stage::lmm);
    EXPECT_EQ(m.tts->calls().size(), 0u);
    EXPECT_EQ(r.transcript.stage_latencies.at(Stage::tts), 0.0);
    EXPECT_GE(r.transcript.stage_latencies.at(Stage::lmm), 0.045);
    EXPECT_TRUE(r.transcript.audio_out_ref.empty());
    EXPECT_EQ(sink.summary().back(), "query_end:-:failed");
    EXPECT_EQ(sink.summary()[2], "stage_end:lmm:timeout");
}

TEST(RunQuery, TranscriptionFailureNeverReachesTheVisionModel) {
    auto m = mocks({0.0, MockBehavior::Failure::error});
    const auto r = run_query(small_demo(), 0.2, {std::nullopt, AudioClip{tone_wav(0.1)}}, m.clients(), fast_options());
    EXPECT_EQ(r.transcript.status, "failed");
    EXPECT_EQ(*r.transcript.failed_stage, Stage::stt);
    EXPECT_EQ(m.lmm->calls().size(), 0u);
    EXPECT_EQ(m.tts->calls().size(), 0u);
}

TEST(RunQuery, CancelDuringAStageStopsTheQuery) {
    auto m = mocks({}, {5.0, MockBehavior::Failure::none});
    CancelToken token;
    auto opts = fast_options();
    opts.cancel = &token;
    std::thread canceller([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        token.cancel();
    });
    const auto start = std::chrono::steady_clock::now();
    const auto r = run_query(small_demo(), 0.2, {std::string("q"), std::nullopt}, m.clients(), opts);
    canceller.join();
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 2.0);
    EXPECT_EQ(r.transcript.status, "failed");
    EXPECT_NE(r.transcript.error.find("cancel"), std::string::npos);
    EXPECT_EQ(m.tts->calls().size(), 0u);
}

TEST(RunQuery, StageLatenciesFollowBackendDelays) {
    auto m = mocks({0.15, {}}, {0.25, {}}, {0.05, {}});
    const auto r = run_query(small_demo(), 0.2, {std::nullopt, AudioClip{tone_wav(0.1)}}, m.clients(), fast_options());
    const auto& l = r.transcript.stage_latencies;
    EXPECT_NEAR(l.at(Stage::stt), 0.15, 0.05);
    EXPECT_NEAR(l.at(Stage::lmm), 0.25, 0.05);
    EXPECT_NEAR(l.at(Stage::tts), 0.05, 0.05);
    EXPECT_DOUBLE_EQ(r.transcript.total_latency, l.at(Stage::stt) + l.at(Stage::lmm) + l.at(Stage::tts));
    EXPECT_GE(r.transcript.overhead_s, 0.0);
}

TEST(RunQuery, DeterministicApartFromWallClock) {
    auto strip = [](QueryTranscript t) {
        t.stage_latencies.clear();
        t.total_latency = 0;
        t.overhead_s = 0;
        return to_json(t);
    };
    auto a = mocks(), b = mocks();
    const auto ra = run_query(small_demo(), 0.7, {std::string("q"), std::nullopt}, a.clients(), fast_options());
    const auto rb = run_query(small_demo(), 0.7, {std::string("q"), std::nullopt}, b.clients(), fast_options());
    EXPECT_EQ(strip(ra.transcript), strip(rb.transcript));
    for (std::size_t i = 0; i < ra.crop.levels.size(); ++i) EXPECT_EQ(ra.crop.levels[i].image, rb.crop.levels[i].image);
}

TEST(RunQuery, RejectsMissingInputAndClients) {
    auto m = mocks();
    EXPECT_THROW(run_query(small_demo(), 0.2, {}, m.clients(), fast_options()), DomainError);
    Clients none{nullptr, m.lmm, m.tts};
    EXPECT_THROW(run_query(small_demo(), 0.2, {std::nullopt, AudioClip{tone_wav(0.1)}}, none, fast_options()),
                 DomainError);
    EXPECT_THROW(run_query(small_demo(), 99.0, {std::string("q"), std::nullopt}, m.clients(), fast_options()),
                 OutOfRangeError);
    EXPECT_EQ(m.lmm->calls().size(), 0u);
}

TEST(Transcript, JsonRoundTrip) {
    auto m = mocks();
    const auto r = run_query(small_demo(), 0.4, {std::nullopt, AudioClip{tone_wav(0.1)}}, m.clients(), fast_options());
    const auto j = to_json(r.transcript);
    EXPECT_EQ(to_json(transcript_from_json(j)), j);
    EXPECT_THROW(transcript_from_json(nlohmann::json{{"session_id", 3}}), SchemaError);
}

TEST(ParseLabel, LongestWholeWordMatchIgnoringCase) {
    const std::vector<std::string> labels{"Boston Terrier", "Terrier", "Boxer", "Pug", "Beagle"};
    EXPECT_EQ(parse_label("Boston Terrier", labels), "Boston Terrier");
    EXPECT_EQ(parse_label("it looks like a boston terrier to me", labels), "Boston Terrier");
    EXPECT_EQ(parse_label("Some kind of terrier.", labels), "Terrier");
    EXPECT_EQ(parse_label("PUG!", labels), "Pug");
    EXPECT_EQ(parse_label("a pugnacious dog", labels), std::nullopt);
    EXPECT_EQ(parse_label("no idea", labels), std::nullopt);
    // Two different labels in one answer: the longer one wins.
    EXPECT_EQ(parse_label("a boxer or a beagle?", labels), "Beagle");
    EXPECT_EQ(parse_label("boston terrier", std::vector<std::string>{"boston terrier", "Boston Terrier"}),
              "boston terrier");
}

TEST(ParseLabel, EqualLengthTiesAreAmbiguous) {
    const std::vector<std::string> labels{"Boxer", "Husky"};
    EXPECT_THROW(parse_label("boxer, maybe husky", labels), AmbiguousResponseError);
    EXPECT_EQ(parse_label("husky", labels), "Husky");
}

TEST(Prompt, PlaceholdersAndRendering) {
    const PromptTemplate p("Hi {{name}}, pick from {{labels}} {{name}}");
    EXPECT_EQ(p.placeholders(), (std::vector<std::string>{"name", "labels"}));
    EXPECT_EQ(p.render({{"name", "Ann"}, {"labels", "a,b"}}), "Hi Ann, pick from a,b Ann");
    EXPECT_THROW(p.render({{"name", "Ann"}}), DomainError);
    EXPECT_THROW(PromptTemplate("{{open").render({}), DomainError);
    EXPECT_EQ(default_classification_prompt().placeholders(), std::vector<std::string>{"labels"});
    EXPECT_EQ(default_question_prompt().placeholders(), std::vector<std::string>{"question"});
    EXPECT_TRUE(default_system_prompt().placeholders().empty());
}

TEST(ClassifyQuery, ListsEveryLabelAndParsesTheAnswer) {
    auto cam = geometry::intrinsics_from_fov(320, 240, 78.0);
    foveation::CropSpec spec;
    spec.out_px = 16;
    const auto crop = foveation::multiscale_crop(Image(320, 240), cam.principal_point(), cam, spec);
    ScriptedVisionModel model(std::vector<std::string>{"That is a Beagle."});
    const std::vector<std::string> labels{"Beagle", "Pug"};
    const auto r = classify_query(crop, labels, model);
    EXPECT_EQ(r.label, "Beagle");
    const auto req = model.requests().at(0);
    EXPECT_NE(req.prompt.find("- Beagle\n"), std::string::npos);
    EXPECT_NE(req.prompt.find("- Pug\n"), std::string::npos);
    EXPECT_EQ(req.images.size(), 3u);
    EXPECT_THROW(classify_query(crop, std::vector<std::string>{}, model), DomainError);
}
