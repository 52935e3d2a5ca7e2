#include "gazegpt/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "gazegpt/codec.hpp"
#include "gazegpt/error.hpp"

namespace gazegpt::pipeline {

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> names;
    std::size_t at = 0;
    while ((at = text_.find("{{", at)) != std::string::npos) {
        const auto end = text_.find("}}", at + 2);
        if (end == std::string::npos) break;
        auto name = text_.substr(at + 2, end - at - 2);
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
        at = end + 2;
    }
    return names;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    std::size_t at = 0;
    while (true) {
        const auto open = text_.find("{{", at);
        if (open == std::string::npos) {
            out.append(text_, at, std::string::npos);
            break;
        }
        const auto close = text_.find("}}", open + 2);
        if (close == std::string::npos) {
            throw DomainError("PromptTemplate: unterminated placeholder");
        }
        const auto name = text_.substr(open + 2, close - open - 2);
        const auto it = values.find(name);
        if (it == values.end()) {
            throw DomainError("PromptTemplate: no value for placeholder '" + name + "'");
        }
        out.append(text_, at, open - at);
        out += it->second;
        at = close + 2;
    }
    return out;
}

const PromptTemplate& default_system_prompt() {
    static const PromptTemplate prompt(
        "You are a voice assistant running on smart glasses. Every question arrives with images "
        "from the wearer's world-facing camera, all centered on the point the wearer is looking "
        "at. The first image is the narrowest view and shows that object in detail; each later "
        "image covers a wider field of view for context. Answer the question about the object at "
        "the center of the images. Keep answers short: they will be spoken aloud.");
    return prompt;
}

const PromptTemplate& default_question_prompt() {
    static const PromptTemplate prompt("{{question}}");
    return prompt;
}

const PromptTemplate& default_classification_prompt() {
    static const PromptTemplate prompt(
        "What breed is the dog at the center of these images? The images share one center and "
        "widen in field of view. Choose exactly one breed from the list below and reply with "
        "the breed name only.\n{{labels}}");
    return prompt;
}

nlohmann::json to_json(const StageEvent& e) {
    nlohmann::json j{{"type", e.type},
                     {"session_id", e.session_id},
                     {"query_id", e.query_id},
                     {"latency_s", e.latency_s},
                     {"status", e.status}};
    j["stage"] = e.stage ? nlohmann::json(std::string(to_string(*e.stage))) : nlohmann::json(nullptr);
    return j;
}

namespace {

Stage stage_from_string(const std::string& s) {
    if (s == "stt") return Stage::stt;
    if (s == "lmm") return Stage::lmm;
    if (s == "tts") return Stage::tts;
    throw SchemaError("stage", "unknown stage '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const QueryTranscript& t) {
    nlohmann::json latencies;
    for (const auto& [stage, value] : t.stage_latencies) latencies[std::string(to_string(stage))] = value;
    nlohmann::json j{{"session_id", t.session_id},
                     {"query_id", t.query_id},
                     {"trigger_t", t.trigger_t},
                     {"frame_index", t.frame_index},
                     {"frame_t", t.frame_t},
                     {"input_kind", t.input_kind},
                     {"question_text", t.question_text},
                     {"gaze_px", {t.gaze_px.u, t.gaze_px.v}},
                     {"gaze_source", t.gaze_source},
                     {"crops", t.crops},
                     {"response_text", t.response_text},
                     {"audio_in_ref", t.audio_in_ref},
                     {"audio_out_ref", t.audio_out_ref},
                     {"stage_latencies", latencies},
                     {"total_latency", t.total_latency},
                     {"overhead_s", t.overhead_s},
                     {"status", t.status},
                     {"error", t.error},
                     {"label_parsing", "longest case-insensitive whole-word match"}};
    j["failed_stage"] = t.failed_stage ? nlohmann::json(std::string(to_string(*t.failed_stage)))
                                       : nlohmann::json(nullptr);
    return j;
}

QueryTranscript transcript_from_json(const nlohmann::json& j) {
    try {
        QueryTranscript t;
        t.session_id = j.at("session_id").get<std::string>();
        t.query_id = j.at("query_id").get<std::string>();
        t.trigger_t = j.at("trigger_t").get<double>();
        t.frame_index = j.at("frame_index").get<std::size_t>();
        t.frame_t = j.at("frame_t").get<double>();
        t.input_kind = j.at("input_kind").get<std::string>();
        t.question_text = j.at("question_text").get<std::string>();
        t.gaze_px = {j.at("gaze_px").at(0).get<double>(), j.at("gaze_px").at(1).get<double>()};
        t.gaze_source = j.at("gaze_source").get<std::string>();
        t.crops = j.at("crops");
        t.response_text = j.at("response_text").get<std::string>();
        t.audio_in_ref = j.at("audio_in_ref").get<std::string>();
        t.audio_out_ref = j.at("audio_out_ref").get<std::string>();
        for (const auto& [k, v] : j.at("stage_latencies").items()) {
            t.stage_latencies[stage_from_string(k)] = v.get<double>();
        }
        t.total_latency = j.at("total_latency").get<double>();
        t.overhead_s = j.at("overhead_s").get<double>();
        t.status = j.at("status").get<std::string>();
        t.error = j.at("error").get<std::string>();
        if (!j.at("failed_stage").is_null()) t.failed_stage = stage_from_string(j.at("failed_stage").get<std::string>());
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("transcript", e.what());
    }
}

std::vector<EncodedImage> encode_crops(const foveation::MultiscaleCrop& crop) {
    std::vector<EncodedImage> images;
    for (const auto& level : crop.levels) {
        if (level.image.empty()) {
            throw DomainError("encode_crops: crop has no pixels (geometry-only plan)");
        }
        char caption[96];
        std::snprintf(caption, sizeof caption, "level %d: %.1f deg field of view", level.level, level.fov);
        images.push_back({"image/png", base64_encode(encode_png(level.image)), caption});
    }
    return images;
}

namespace {

std::size_t frame_index_at(const capture::Session& session, double t) {
    const auto frames = session.frames();
    const auto it = std::upper_bound(frames.begin(), frames.end(), t,
                                     [](double v, const capture::FrameRef& f) { return v < f.t; });
    return static_cast<std::size_t>(std::prev(it) - frames.begin());
}

}  // namespace

QueryResult run_query(const capture::Session& session, double trigger_t, const QueryInput& input,
                      const Clients& clients, const QueryOptions& options) {
    if (!input.text && !input.audio) {
        throw DomainError("run_query: a text question or an audio clip is required");
    }
    if (!clients.lmm || !clients.tts || (input.audio && !input.text && !clients.stt)) {
        throw DomainError("run_query: backend clients are not configured");
    }
    const auto started = Clock::now();
    double in_stages = 0.0;

    QueryResult result;
    QueryTranscript& tr = result.transcript;
    tr.session_id = session.id();
    tr.query_id = options.query_id;
    tr.trigger_t = trigger_t;
    tr.stage_latencies = {{Stage::stt, 0.0}, {Stage::lmm, 0.0}, {Stage::tts, 0.0}};

    auto emit = [&](StageEvent e) {
        if (!options.on_event) return;
        e.session_id = tr.session_id;
        e.query_id = tr.query_id;
        options.on_event(e);
    };

    // Capture happens at the trigger, before any speech processing.
    const auto [frame, gaze] = capture::sample_at(session, trigger_t);
    tr.frame_index = frame_index_at(session, trigger_t);
    tr.frame_t = frame.t;
    const auto& camera = session.camera();
    if (options.gaze_override) {
        tr.gaze_px = *options.gaze_override;
        tr.gaze_source = "override";
    } else {
        tr.gaze_px = geometry::project_gaze(camera, gaze, options.fixation_depth);
        tr.gaze_source = "projected";
        if (!camera.contains(tr.gaze_px)) {
            tr.gaze_px = camera.clamp(tr.gaze_px);
            tr.gaze_source = "projected_clamped";
        }
    }
    result.crop = foveation::multiscale_crop(*frame.image, tr.gaze_px, camera, options.crop);
    tr.crops = foveation::crop_metadata(result.crop);
    for (auto& level : tr.crops["levels"]) {
        level["image_ref"] = "crops/" + tr.query_id + "_level" + std::to_string(level["level"].get<int>()) + ".png";
    }
    const auto images = encode_crops(result.crop);

    auto run_stage = [&](Stage stage, auto&& call) -> bool {
        emit({"stage_start", {}, {}, stage, 0.0, "running"});
        const auto t0 = Clock::now();
        try {
            call();
            const double dt = seconds_since(t0);
            tr.stage_latencies[stage] = dt;
            in_stages += dt;
            emit({"stage_end", {}, {}, stage, dt, "ok"});
            return true;
        } catch (const StageError& e) {
            const double dt = seconds_since(t0);
            tr.stage_latencies[stage] = dt;
            in_stages += dt;
            tr.status = "failed";
            tr.failed_stage = stage;
            tr.error = e.what();
            emit({"stage_end", {}, {}, stage, dt, std::string(to_string(e.kind()))});
            return false;
        }
    };

    const CallContext stt_ctx{options.stt_timeout_s, options.cancel};
    const CallContext lmm_ctx{options.lmm_timeout_s, options.cancel};
    const CallContext tts_ctx{options.tts_timeout_s, options.cancel};

    bool ok = true;
    if (input.text) {
        tr.input_kind = "text";
        tr.question_text = *input.text;
        emit({"stage_end", {}, {}, Stage::stt, 0.0, "skipped"});
    } else {
        tr.input_kind = "audio";
        tr.audio_in_ref = "audio/" + tr.query_id + "_in.wav";
        ok = run_stage(Stage::stt, [&] { tr.question_text = clients.stt->transcribe(*input.audio, stt_ctx); });
    }

    if (ok) {
        VisionRequest request;
        request.system_prompt = default_system_prompt().render({});
        request.prompt = default_question_prompt().render({{"question", tr.question_text}});
        request.images = images;
        ok = run_stage(Stage::lmm, [&] { tr.response_text = clients.lmm->respond(request, lmm_ctx); });
    }
    if (ok) {
        ok = run_stage(Stage::tts, [&] { result.response_audio = clients.tts->synthesize(tr.response_text, tts_ctx); });
        if (ok) tr.audio_out_ref = "audio/" + tr.query_id + "_out.wav";
    }

    tr.total_latency = tr.stage_latencies[Stage::stt] + tr.stage_latencies[Stage::lmm] +
                       tr.stage_latencies[Stage::tts];
    tr.overhead_s = std::max(0.0, seconds_since(started) - in_stages);
    emit({"query_end", {}, {}, std::nullopt, tr.total_latency, tr.status});
    return result;
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool contains_word(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) return false;
    std::size_t at = 0;
    while ((at = haystack.find(needle, at)) != std::string::npos) {
        const bool left = at == 0 || !word_char(haystack[at - 1]);
        const std::size_t end = at + needle.size();
        const bool right = end == haystack.size() || !word_char(haystack[end]);
        if (left && right) return true;
        ++at;
    }
    return false;
}

}  // namespace

std::optional<std::string> parse_label(std::string_view response, std::span<const std::string> labels) {
    const std::string text = lower(response);
    std::optional<std::string> best;
    std::size_t best_len = 0;
    bool tie = false;
    std::set<std::string> seen;
    for (const auto& label : labels) {
        const std::string key = lower(label);
        if (!seen.insert(key).second) continue;
        if (!contains_word(text, key)) continue;
        if (key.size() > best_len) {
            best = label;
            best_len = key.size();
            tie = false;
        } else if (key.size() == best_len) {
            tie = true;
        }
    }
    if (tie) {
        throw AmbiguousResponseError("response matches several labels of equal length");
    }
    return best;
}

ClassifyResult classify_query(const foveation::MultiscaleCrop& crops, std::span<const std::string> labels,
                              VisionModel& client, const CallContext& ctx, const PromptTemplate& prompt) {
    if (labels.empty()) {
        throw DomainError("classify_query: labels must not be empty");
    }
    std::string list;
    for (const auto& l : labels) {
        list += "- " + l + "\n";
    }
    VisionRequest request;
    request.system_prompt = default_system_prompt().render({});
    request.prompt = prompt.render({{"labels", list}});
    request.images = encode_crops(crops);
    ClassifyResult result;
    result.response = client.respond(request, ctx);
    result.label = parse_label(result.response, labels);
    return result;
}

}  // namespace gazegpt::pipeline
