#include "gazegpt/service.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <poll.h>
#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

#include "gazegpt/breeds.hpp"
#include "gazegpt/codec.hpp"
#include "gazegpt/error.hpp"

namespace gazegpt::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

pipeline::Endpoint endpoint_from_json(const json& j, pipeline::Endpoint ep, const std::string& field) {
    if (!j.is_object()) throw SchemaError(field, "expected an object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "base_url") ep.base_url = v.get<std::string>();
            else if (key == "path") ep.path = v.get<std::string>();
            else if (key == "api_key_env") ep.api_key_env = v.get<std::string>();
            else if (key == "model") ep.model = v.get<std::string>();
            else if (key == "voice_id") ep.voice_id = v.get<std::string>();
            else if (key == "timeout_s") ep.timeout_s = v.get<double>();
            else throw SchemaError(field + "." + key, "unknown key");
        } catch (const json::exception&) {
            throw SchemaError(field + "." + key, "wrong type");
        }
    }
    return ep;
}

json endpoint_to_json(const pipeline::Endpoint& ep) {
    json j{{"base_url", ep.base_url}, {"path", ep.path}, {"api_key_env", ep.api_key_env},
           {"model", ep.model},       {"timeout_s", ep.timeout_s}};
    if (!ep.voice_id.empty()) j["voice_id"] = ep.voice_id;
    return j;
}

MockStageConfig mock_stage_from_json(const json& j, const std::string& field) {
    MockStageConfig s;
    if (!j.is_object()) throw SchemaError(field, "expected an object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "delay_s") s.delay_s = v.get<double>();
            else if (key == "failure") s.failure = v.get<std::string>();
            else throw SchemaError(field + "." + key, "unknown key");
        } catch (const json::exception&) {
            throw SchemaError(field + "." + key, "wrong type");
        }
    }
    if (!(s.delay_s >= 0.0)) throw SchemaError(field + ".delay_s", "must be non-negative");
    try {
        pipeline::mock_failure_from_string(s.failure);
    } catch (const std::exception& e) {
        throw SchemaError(field + ".failure", e.what());
    }
    return s;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_relative() && !base.empty()) ? base / path : path;
}

}  // namespace

ServiceConfig service_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw SchemaError("config", "expected an object");
    ServiceConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "host") {
                c.host = v.get<std::string>();
            } else if (key == "port") {
                const int port = v.get<int>();
                if (port < 0 || port > 65535) throw SchemaError("port", "out of range");
                c.port = static_cast<unsigned short>(port);
            } else if (key == "mode") {
                c.mode = v.get<std::string>();
                if (c.mode != "mock" && c.mode != "live") throw SchemaError("mode", "must be mock or live");
            } else if (key == "sessions") {
                for (const auto& s : v) c.sessions.push_back(resolve(base_dir, s.get<std::string>()));
            } else if (key == "demo_session") {
                c.demo_session = v.get<bool>();
            } else if (key == "crop") {
                c.crop = foveation::crop_spec_from_json(v);
            } else if (key == "fixation_depth_m") {
                c.fixation_depth = v.get<double>();
                if (!(c.fixation_depth > 0.0)) throw SchemaError("fixation_depth_m", "must be positive");
            } else if (key == "timeouts_s") {
                for (const auto& [stage, t] : v.items()) {
                    const double value = t.get<double>();
                    if (!(value > 0.0)) throw SchemaError("timeouts_s." + stage, "must be positive");
                    if (stage == "stt") c.stt_timeout_s = value;
                    else if (stage == "lmm") c.lmm_timeout_s = value;
                    else if (stage == "tts") c.tts_timeout_s = value;
                    else throw SchemaError("timeouts_s." + stage, "unknown stage");
                }
            } else if (key == "mock") {
                for (const auto& [mk, mv] : v.items()) {
                    if (mk == "transcript") c.mock.transcript = mv.get<std::string>();
                    else if (mk == "responses") c.mock.responses = mv.get<std::vector<std::string>>();
                    else if (mk == "stt") c.mock.stt = mock_stage_from_json(mv, "mock.stt");
                    else if (mk == "lmm") c.mock.lmm = mock_stage_from_json(mv, "mock.lmm");
                    else if (mk == "tts") c.mock.tts = mock_stage_from_json(mv, "mock.tts");
                    else throw SchemaError("mock." + mk, "unknown key");
                }
                if (c.mock.responses.empty()) throw SchemaError("mock.responses", "must not be empty");
            } else if (key == "live") {
                for (const auto& [lk, lv] : v.items()) {
                    if (lk == "stt") c.live.stt = endpoint_from_json(lv, c.live.stt, "live.stt");
                    else if (lk == "lmm") c.live.lmm = endpoint_from_json(lv, c.live.lmm, "live.lmm");
                    else if (lk == "tts") c.live.tts = endpoint_from_json(lv, c.live.tts, "live.tts");
                    else throw SchemaError("live." + lk, "unknown key");
                }
            } else if (key == "transcript_log") {
                const auto p = v.get<std::string>();
                c.transcript_log = p.empty() ? std::filesystem::path{} : resolve(base_dir, p);
            } else if (key == "event_queue_limit") {
                const auto limit = v.get<std::int64_t>();
                if (limit < 1) throw SchemaError("event_queue_limit", "must be >= 1");
                c.event_queue_limit = static_cast<std::size_t>(limit);
            } else {
                throw SchemaError(key, "unknown key");
            }
        } catch (const json::exception&) {
            throw SchemaError(key, "wrong type");
        }
    }
    return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingAssetError(path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("config", e.what());
    }
    return service_config_from_json(j, path.parent_path());
}

json to_json(const ServiceConfig& c) {
    json sessions = json::array();
    for (const auto& s : c.sessions) sessions.push_back(s.string());
    auto stage = [](const MockStageConfig& s) { return json{{"delay_s", s.delay_s}, {"failure", s.failure}}; };
    return {{"host", c.host},
            {"port", c.port},
            {"mode", c.mode},
            {"sessions", sessions},
            {"demo_session", c.demo_session},
            {"crop", foveation::to_json(c.crop)},
            {"fixation_depth_m", c.fixation_depth},
            {"timeouts_s", {{"stt", c.stt_timeout_s}, {"lmm", c.lmm_timeout_s}, {"tts", c.tts_timeout_s}}},
            {"mock",
             {{"transcript", c.mock.transcript},
              {"responses", c.mock.responses},
              {"stt", stage(c.mock.stt)},
              {"lmm", stage(c.mock.lmm)},
              {"tts", stage(c.mock.tts)}}},
            {"live",
             {{"stt", endpoint_to_json(c.live.stt)},
              {"lmm", endpoint_to_json(c.live.lmm)},
              {"tts", endpoint_to_json(c.live.tts)}}},
            {"transcript_log", c.transcript_log.string()},
            {"event_queue_limit", c.event_queue_limit}};
}

pipeline::Clients make_clients(const ServiceConfig& config) {
    if (config.mode == "live") {
        return {pipeline::make_whisper_transcriber(config.live.stt), pipeline::make_chat_vision_model(config.live.lmm),
                pipeline::make_speech_synthesizer(config.live.tts)};
    }
    if (config.mode != "mock") throw SchemaError("mode", "must be mock or live");
    auto behavior = [](const MockStageConfig& s) {
        return pipeline::MockBehavior{s.delay_s, pipeline::mock_failure_from_string(s.failure)};
    };
    return {std::make_shared<pipeline::ScriptedTranscriber>(config.mock.transcript, behavior(config.mock.stt)),
            std::make_shared<pipeline::ScriptedVisionModel>(config.mock.responses, behavior(config.mock.lmm)),
            std::make_shared<pipeline::ToneSynthesizer>(behavior(config.mock.tts))};
}

capture::Session demo_session(const geometry::CameraModel& camera, std::uint64_t seed) {
    capture::DogGridScene scene;
    const auto& breeds = evalstats::default_breeds();
    scene.labels.assign(breeds.begin(), breeds.begin() + scene.grid * scene.grid);
    capture::GazeScript script;
    script.duration = 2.0;
    script.fixations.push_back({0.0, {0.0, 0.0}});
    return capture::synth_session(scene, camera, script, seed, "demo");
}

// ---------------------------------------------------------------------------
// Transcript store and event bus

TranscriptStore::TranscriptStore(std::filesystem::path log_path) {
    if (!log_path.empty()) {
        if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
        log_.open(log_path, std::ios::app);
        if (!log_) throw ServiceError("cannot open transcript log " + log_path.string());
    }
}

void TranscriptStore::append(const pipeline::QueryTranscript& transcript) {
    std::unique_lock lock(mutex_);
    transcripts_.push_back(transcript);
    if (log_.is_open()) {
        log_ << pipeline::to_json(transcript).dump() << '\n';
        log_.flush();
    }
}

std::vector<pipeline::QueryTranscript> TranscriptStore::for_session(const std::string& session_id) const {
    std::shared_lock lock(mutex_);
    std::vector<pipeline::QueryTranscript> out;
    for (const auto& t : transcripts_) {
        if (t.session_id == session_id) out.push_back(t);
    }
    return out;
}

std::vector<pipeline::QueryTranscript> TranscriptStore::all() const {
    std::shared_lock lock(mutex_);
    return transcripts_;
}

std::optional<std::string> EventBus::Subscription::pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto event = std::move(queue_.front());
    queue_.pop_front();
    return event;
}

std::size_t EventBus::Subscription::dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

void EventBus::Subscription::push(const std::string& event) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return;
        if (queue_.size() >= limit_) {
            queue_.pop_front();
            ++dropped_;
        }
        queue_.push_back(event);
    }
    cv_.notify_one();
}

void EventBus::Subscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::shared_ptr<EventBus::Subscription> EventBus::subscribe() {
    auto sub = std::make_shared<Subscription>(limit_);
    std::lock_guard lock(mutex_);
    if (closed_) {
        sub->close();
    } else {
        subs_.push_back(sub);
    }
    return sub;
}

void EventBus::unsubscribe(const std::shared_ptr<Subscription>& sub) {
    std::lock_guard lock(mutex_);
    subs_.erase(std::remove(subs_.begin(), subs_.end(), sub), subs_.end());
}

void EventBus::publish(const json& event) {
    const auto text = event.dump();
    std::lock_guard lock(mutex_);
    for (const auto& s : subs_) s->push(text);
}

void EventBus::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    for (const auto& s : subs_) s->close();
    subs_.clear();
}

// ---------------------------------------------------------------------------
// Requests

QueryRequest query_request_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("body", "expected a JSON object");
    QueryRequest r;
    try {
        if (j.contains("frame_id")) {
            const auto id = j.at("frame_id").get<std::int64_t>();
            if (id < 0) throw SchemaError("frame_id", "must be non-negative");
            r.frame_id = static_cast<std::size_t>(id);
        }
        if (j.contains("timestamp")) r.timestamp = j.at("timestamp").get<double>();
        if (r.frame_id && r.timestamp) throw SchemaError("frame_id", "give frame_id or timestamp, not both");
        if (!r.frame_id && !r.timestamp) throw SchemaError("frame_id", "frame_id or timestamp is required");

        const bool projected = j.value("use_projected_gaze", false);
        if (j.contains("gaze_px") && !j.at("gaze_px").is_null()) {
            if (projected) throw SchemaError("gaze_px", "conflicts with use_projected_gaze");
            const auto& g = j.at("gaze_px");
            if (g.is_array() && g.size() == 2) {
                r.gaze_px = geometry::PixelPoint{g[0].get<double>(), g[1].get<double>()};
            } else if (g.is_object()) {
                r.gaze_px = geometry::PixelPoint{g.at("u").get<double>(), g.at("v").get<double>()};
            } else {
                throw SchemaError("gaze_px", "expected [u, v] or {u, v}");
            }
        }
        if (j.contains("question") && !j.at("question").is_null()) {
            r.input.text = j.at("question").get<std::string>();
        }
        if (j.contains("audio") && !j.at("audio").is_null()) {
            try {
                r.input.audio = pipeline::AudioClip{base64_decode(j.at("audio").get<std::string>())};
                inspect_wav(r.input.audio->wav);
            } catch (const json::exception&) {
                throw;
            } catch (const std::exception& e) {
                throw SchemaError("audio", e.what());
            }
        }
        if (r.input.text && r.input.audio) throw SchemaError("question", "give question or audio, not both");
        if (!r.input.text && !r.input.audio) throw SchemaError("question", "question or audio is required");
    } catch (const json::exception& e) {
        throw SchemaError("body", e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Session workers

namespace {

struct Job {
    QueryRequest request;
    std::string query_id;
    std::promise<pipeline::QueryTranscript> promise;
};

}  // namespace

struct Service::Impl {
    struct Worker {
        capture::Session session;
        std::thread thread;
        std::mutex mutex;
        std::condition_variable cv;
        std::deque<Job> jobs;
        bool stopping = false;
        int next_query = 1;
        std::shared_ptr<pipeline::CancelToken> current;
        std::map<std::string, std::string> artifacts;  // ref -> bytes
        mutable std::mutex artifact_mutex;

        explicit Worker(capture::Session s) : session(std::move(s)) {}
    };

    ServiceConfig config;
    pipeline::Clients clients;
    std::vector<std::string> order;
    std::map<std::string, std::unique_ptr<Worker>> workers;
    TranscriptStore store;
    EventBus bus;

    // network
    net::io_context ioc;
    std::unique_ptr<tcp::acceptor> acceptor;
    std::thread accept_thread;
    std::atomic<bool> stopping{false};
    std::atomic<bool> started{false};
    unsigned short bound_port = 0;
    std::mutex stop_mutex;
    std::condition_variable stop_cv;
    bool stopped = false;

    struct Connection {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
        int fd = -1;
    };
    std::mutex conn_mutex;
    std::map<std::uint64_t, Connection> connections;
    std::uint64_t next_conn = 0;

    Impl(ServiceConfig c, std::vector<capture::Session> sessions, pipeline::Clients cl)
        : config(std::move(c)), clients(std::move(cl)), store(config.transcript_log), bus(config.event_queue_limit) {
        if (!clients.stt || !clients.lmm || !clients.tts) throw ServiceError("all three backend clients are required");
        if (sessions.empty()) throw ServiceError("no sessions to serve");
        for (auto& s : sessions) {
            const auto id = s.id();
            if (workers.count(id)) throw ServiceError("duplicate session id " + id);
            order.push_back(id);
            workers.emplace(id, std::make_unique<Worker>(std::move(s)));
        }
        for (auto& [id, w] : workers) {
            Worker* raw = w.get();
            raw->thread = std::thread([this, raw] { run_worker(*raw); });
        }
    }

    Worker& worker(const std::string& id) const {
        auto it = workers.find(id);
        if (it == workers.end()) throw ServiceError("unknown session " + id);
        return *it->second;
    }

    void run_worker(Worker& w) {
        for (;;) {
            Job job;
            std::shared_ptr<pipeline::CancelToken> token;
            {
                std::unique_lock lock(w.mutex);
                w.cv.wait(lock, [&] { return w.stopping || !w.jobs.empty(); });
                if (w.jobs.empty()) return;
                job = std::move(w.jobs.front());
                w.jobs.pop_front();
                if (w.stopping) {
                    job.promise.set_exception(std::make_exception_ptr(ServiceError("service stopping")));
                    continue;
                }
                w.current = std::make_shared<pipeline::CancelToken>();
                token = w.current;
            }
            std::optional<pipeline::QueryTranscript> result;
            std::exception_ptr error;
            try {
                result = execute(w, job, *token);
            } catch (...) {
                error = std::current_exception();
            }
            // Clear before resolving so a caller who saw the result cannot cancel a finished query.
            {
                std::lock_guard lock(w.mutex);
                w.current.reset();
            }
            if (error) {
                job.promise.set_exception(error);
            } else {
                job.promise.set_value(std::move(*result));
            }
        }
    }

    pipeline::QueryTranscript execute(Worker& w, const Job& job, const pipeline::CancelToken& token) {
        const auto& session = w.session;
        double trigger_t = 0.0;
        if (job.request.frame_id) {
            if (*job.request.frame_id >= session.frames().size()) {
                throw OutOfRangeError("frame_id " + std::to_string(*job.request.frame_id) + " out of range");
            }
            trigger_t = session.frames()[*job.request.frame_id].t;
        } else {
            trigger_t = *job.request.timestamp;
        }
        pipeline::QueryOptions opts;
        opts.crop = config.crop;
        opts.fixation_depth = session.metadata().value("fixation_depth_m", config.fixation_depth);
        opts.gaze_override = job.request.gaze_px;
        opts.query_id = job.query_id;
        opts.stt_timeout_s = config.stt_timeout_s;
        opts.lmm_timeout_s = config.lmm_timeout_s;
        opts.tts_timeout_s = config.tts_timeout_s;
        opts.cancel = &token;
        opts.on_event = [this](const pipeline::StageEvent& e) { bus.publish(pipeline::to_json(e)); };

        auto result = pipeline::run_query(session, trigger_t, job.request.input, clients, opts);
        {
            std::lock_guard lock(w.artifact_mutex);
            for (const auto& level : result.crop.levels) {
                const auto png = encode_png(level.image);
                w.artifacts["crops/" + job.query_id + "_level" + std::to_string(level.level) + ".png"] =
                    std::string(png.begin(), png.end());
            }
            if (job.request.input.audio && !result.transcript.audio_in_ref.empty()) {
                const auto& wav = job.request.input.audio->wav;
                w.artifacts[result.transcript.audio_in_ref] = std::string(wav.begin(), wav.end());
            }
            if (!result.transcript.audio_out_ref.empty()) {
                const auto& wav = result.response_audio.wav;
                w.artifacts[result.transcript.audio_out_ref] = std::string(wav.begin(), wav.end());
            }
        }
        store.append(result.transcript);
        bus.publish({{"type", "transcript"}, {"transcript", pipeline::to_json(result.transcript)}});
        return result.transcript;
    }

    std::future<pipeline::QueryTranscript> submit(const std::string& id, QueryRequest request) {
        auto& w = worker(id);
        if (request.frame_id && *request.frame_id >= w.session.frames().size()) {
            throw OutOfRangeError("frame_id " + std::to_string(*request.frame_id) + " out of range");
        }
        if (request.timestamp &&
            (*request.timestamp < w.session.start_time() || *request.timestamp > w.session.end_time())) {
            throw OutOfRangeError("timestamp outside the session");
        }
        std::lock_guard lock(w.mutex);
        if (w.stopping) throw ServiceError("service stopping");
        Job job{std::move(request), "q" + std::to_string(w.next_query++), {}};
        auto fut = job.promise.get_future();
        w.jobs.push_back(std::move(job));
        w.cv.notify_one();
        return fut;
    }

    void stop_workers() {
        for (auto& [id, w] : workers) {
            {
                std::lock_guard lock(w->mutex);
                w->stopping = true;
                if (w->current) w->current->cancel();
            }
            w->cv.notify_all();
        }
        for (auto& [id, w] : workers) {
            if (w->thread.joinable()) w->thread.join();
        }
    }

    // -- HTTP ---------------------------------------------------------------

    using Request = http::request<http::string_body>;
    using Response = http::response<http::string_body>;

    static Response make_response(const Request& req, http::status status, std::string body,
                                  std::string content_type) {
        Response res{status, req.version()};
        res.set(http::field::server, "gazegpt");
        res.set(http::field::content_type, content_type);
        res.set(http::field::access_control_allow_origin, "*");
        res.body() = std::move(body);
        return res;
    }

    static Response json_response(const Request& req, http::status status, const json& body) {
        return make_response(req, status, body.dump(), "application/json");
    }

    static Response error_response(const Request& req, http::status status, const std::string& message) {
        return json_response(req, status, {{"error", message}});
    }

    static std::string percent_decode(std::string_view s) {
        std::string out;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '%' && i + 2 < s.size()) {
                int v = 0;
                const auto res = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
                if (res.ec == std::errc{} && res.ptr == s.data() + i + 3) {
                    out.push_back(static_cast<char>(v));
                    i += 2;
                    continue;
                }
            }
            out.push_back(s[i] == '+' ? ' ' : s[i]);
        }
        return out;
    }

    static std::pair<std::vector<std::string>, std::map<std::string, std::string>> parse_target(std::string_view target) {
        const auto q = target.find('?');
        const auto path = target.substr(0, q);
        std::vector<std::string> segments;
        std::size_t start = 1;
        while (start <= path.size()) {
            const auto slash = path.find('/', start);
            const auto seg = path.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
            if (!seg.empty()) segments.push_back(percent_decode(seg));
            if (slash == std::string_view::npos) break;
            start = slash + 1;
        }
        std::map<std::string, std::string> query;
        if (q != std::string_view::npos) {
            auto rest = target.substr(q + 1);
            while (!rest.empty()) {
                const auto amp = rest.find('&');
                const auto kv = rest.substr(0, amp);
                const auto eq = kv.find('=');
                if (eq == std::string_view::npos) {
                    query[percent_decode(kv)] = "";
                } else {
                    query[percent_decode(kv.substr(0, eq))] = percent_decode(kv.substr(eq + 1));
                }
                if (amp == std::string_view::npos) break;
                rest = rest.substr(amp + 1);
            }
        }
        return {segments, query};
    }

    static double number_param(const std::map<std::string, std::string>& q, const std::string& key) {
        const auto it = q.find(key);
        if (it == q.end()) throw SchemaError(key, "missing query parameter");
        double v = 0.0;
        const auto& s = it->second;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
            throw SchemaError(key, "not a number");
        }
        return v;
    }

    std::string session_param(const std::map<std::string, std::string>& q) const {
        const auto it = q.find("session");
        return it == q.end() ? order.front() : it->second;
    }

    json session_summary(const capture::Session& s) const {
        return {{"id", s.id()},
                {"frames", s.frames().size()},
                {"gaze_samples", s.gaze().size()},
                {"start_t", s.start_time()},
                {"end_t", s.end_time()},
                {"camera", geometry::to_json(s.camera())}};
    }

    Response route(const Request& req) {
        const auto [seg, query] = parse_target(std::string_view(req.target().data(), req.target().size()));
        const auto method = req.method();
        if (method == http::verb::options) {
            auto res = make_response(req, http::status::no_content, "", "text/plain");
            res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
            res.set(http::field::access_control_allow_headers, "Content-Type");
            return res;
        }
        try {
            if (method == http::verb::get && seg.size() == 1 && seg[0] == "health") {
                return json_response(req, http::status::ok, {{"status", "ok"}, {"mode", config.mode}});
            }
            if (method == http::verb::get && seg.size() == 1 && seg[0] == "sessions") {
                json out = json::array();
                for (const auto& id : order) out.push_back(session_summary(worker(id).session));
                return json_response(req, http::status::ok, out);
            }
            if (method == http::verb::post && seg.size() == 1 && seg[0] == "query") {
                json body;
                try {
                    body = json::parse(req.body());
                } catch (const json::parse_error& e) {
                    throw SchemaError("body", e.what());
                }
                const std::string id = body.value("session", order.front());
                auto fut = submit(id, query_request_from_json(body));
                return json_response(req, http::status::ok, pipeline::to_json(fut.get()));
            }
            if (seg.size() >= 2 && seg[0] == "session") {
                const auto& id = seg[1];
                auto& w = worker(id);
                if (method == http::verb::get && seg.size() == 3 && seg[2] == "transcripts") {
                    json out = json::array();
                    for (const auto& t : store.for_session(id)) out.push_back(pipeline::to_json(t));
                    return json_response(req, http::status::ok, out);
                }
                if (method == http::verb::post && seg.size() == 3 && seg[2] == "cancel") {
                    return json_response(req, http::status::ok, {{"cancelled", cancel(id)}});
                }
                if (method == http::verb::get && seg.size() >= 4 && (seg[2] == "crops" || seg[2] == "audio")) {
                    std::string ref = seg[2];
                    for (std::size_t i = 3; i < seg.size(); ++i) ref += "/" + seg[i];
                    std::lock_guard lock(w.artifact_mutex);
                    const auto it = w.artifacts.find(ref);
                    if (it == w.artifacts.end()) return error_response(req, http::status::not_found, "no artifact " + ref);
                    return make_response(req, http::status::ok, it->second,
                                         seg[2] == "crops" ? "image/png" : "audio/wav");
                }
            }
            if (method == http::verb::get && seg.size() == 2 && seg[0] == "frames") {
                const auto& w = worker(session_param(query));
                std::size_t index = 0;
                const auto res = std::from_chars(seg[1].data(), seg[1].data() + seg[1].size(), index);
                if (res.ec != std::errc{} || res.ptr != seg[1].data() + seg[1].size()) {
                    throw SchemaError("frame_id", "not an integer");
                }
                const auto frame = w.session.frame(index);
                const auto png = encode_png(*frame.image);
                return make_response(req, http::status::ok, std::string(png.begin(), png.end()), "image/png");
            }
            if (method == http::verb::get && seg.size() == 1 && seg[0] == "crops") {
                const auto& w = worker(session_param(query));
                const double fid = number_param(query, "frame_id");
                if (fid < 0 || fid != std::floor(fid)) throw SchemaError("frame_id", "must be a non-negative integer");
                const geometry::PixelPoint center{number_param(query, "u"), number_param(query, "v")};
                const auto frame = w.session.frame(static_cast<std::size_t>(fid));
                const auto crop = foveation::multiscale_crop(*frame.image, center, w.session.camera(), config.crop);
                json levels = json::array();
                for (const auto& level : crop.levels) {
                    levels.push_back({{"level", level.level},
                                      {"fov_deg", level.fov},
                                      {"png_base64", base64_encode(encode_png(level.image))}});
                }
                return json_response(req, http::status::ok,
                                     {{"session", w.session.id()},
                                      {"frame_id", static_cast<std::size_t>(fid)},
                                      {"metadata", foveation::crop_metadata(crop)},
                                      {"levels", levels}});
            }
            return error_response(req, http::status::not_found, "no route for " + std::string(req.target()));
        } catch (const ServiceError& e) {
            return error_response(req, http::status::not_found, e.what());
        } catch (const OutOfRangeError& e) {
            return error_response(req, http::status::not_found, e.what());
        } catch (const SchemaError& e) {
            return error_response(req, http::status::bad_request, e.what());
        } catch (const DomainError& e) {
            return error_response(req, http::status::bad_request, e.what());
        } catch (const std::exception& e) {
            return error_response(req, http::status::internal_server_error, e.what());
        }
    }

    bool cancel(const std::string& id) {
        auto& w = worker(id);
        std::lock_guard lock(w.mutex);
        if (!w.current) return false;
        w.current->cancel();
        return true;
    }

    static bool client_readable(tcp::socket& socket) {
        pollfd pfd{socket.native_handle(), POLLIN, 0};
        return ::poll(&pfd, 1, 0) > 0 && (pfd.revents & (POLLIN | POLLHUP | POLLERR)) != 0;
    }

    void serve_events(tcp::socket socket, const Request& req) {
        websocket::stream<tcp::socket> ws(std::move(socket));
        beast::error_code ec;
        ws.accept(req, ec);
        if (ec) return;
        auto sub = bus.subscribe();
        ws.text(true);
        const auto hello = json{{"type", "hello"}, {"sessions", order}}.dump();
        ws.write(net::buffer(hello), ec);
        beast::flat_buffer incoming;
        while (!ec && !stopping) {
            // Client frames are only read once they have arrived, so this thread stays free to
            // write events. Reading lets beast answer a close handshake; EOF ends the stream.
            if (client_readable(ws.next_layer())) {
                if (ws.next_layer().available(ec) == 0) break;
                ws.read(incoming, ec);
                incoming.clear();
                continue;
            }
            auto event = sub->pop(std::chrono::milliseconds(100));
            if (!event) continue;
            ws.write(net::buffer(*event), ec);
        }
        bus.unsubscribe(sub);
        if (!ec) ws.close(websocket::close_code::going_away, ec);
    }

    void handle_connection(tcp::socket socket) {
        beast::flat_buffer buffer;
        beast::error_code ec;
        for (;;) {
            http::request_parser<http::string_body> parser;
            parser.body_limit(64 * 1024 * 1024);
            http::read(socket, buffer, parser, ec);
            if (ec) break;
            auto req = parser.release();
            if (websocket::is_upgrade(req)) {
                const auto [seg, query] = parse_target(std::string_view(req.target().data(), req.target().size()));
                if (seg.size() == 1 && seg[0] == "events") {
                    serve_events(std::move(socket), req);
                    return;
                }
                auto res = error_response(req, http::status::not_found, "no websocket route");
                res.prepare_payload();
                http::write(socket, res, ec);
                break;
            }
            auto res = route(req);
            res.keep_alive(req.keep_alive());
            res.prepare_payload();
            http::write(socket, res, ec);
            if (ec || !req.keep_alive()) break;
        }
        socket.shutdown(tcp::socket::shutdown_send, ec);
    }

    void reap_connections() {
        std::lock_guard lock(conn_mutex);
        for (auto it = connections.begin(); it != connections.end();) {
            if (it->second.done->load()) {
                it->second.thread.join();
                it = connections.erase(it);
            } else {
                ++it;
            }
        }
    }

    void accept_loop() {
        while (!stopping) {
            beast::error_code ec;
            tcp::socket socket(ioc);
            acceptor->accept(socket, ec);
            if (stopping) break;
            if (ec) continue;
            reap_connections();
            auto done = std::make_shared<std::atomic<bool>>(false);
            std::lock_guard lock(conn_mutex);
            const auto id = next_conn++;
            auto& conn = connections[id];
            conn.fd = socket.native_handle();
            conn.done = done;
            conn.thread = std::thread([this, id, done, s = std::move(socket)]() mutable {
                try {
                    handle_connection(std::move(s));
                } catch (...) {
                }
                {
                    std::lock_guard inner(conn_mutex);
                    connections[id].fd = -1;
                }
                done->store(true);
            });
        }
    }

    void start() {
        if (started.exchange(true)) throw ServiceError("service already started");
        beast::error_code ec;
        const auto address = net::ip::make_address(config.host, ec);
        if (ec) throw ServiceError("bad host address " + config.host);
        acceptor = std::make_unique<tcp::acceptor>(ioc);
        const tcp::endpoint endpoint(address, config.port);
        acceptor->open(endpoint.protocol(), ec);
        if (!ec) acceptor->set_option(net::socket_base::reuse_address(true), ec);
        if (!ec) acceptor->bind(endpoint, ec);
        if (!ec) acceptor->listen(net::socket_base::max_listen_connections, ec);
        if (ec) {
            throw ServiceError("cannot bind " + config.host + ":" + std::to_string(config.port) + ": " + ec.message());
        }
        bound_port = acceptor->local_endpoint().port();
        accept_thread = std::thread([this] { accept_loop(); });
    }

    void stop() {
        {
            std::lock_guard lock(stop_mutex);
            if (stopped) return;
            stopped = true;
        }
        stopping = true;
        bus.close();
        stop_workers();
        if (acceptor) {
            // Wake the blocking accept() with a throwaway connection.
            beast::error_code ec;
            tcp::socket poke(ioc);
            auto addr = acceptor->local_endpoint().address();
            if (addr.is_unspecified()) {
                addr = addr.is_v6() ? net::ip::address(net::ip::address_v6::loopback())
                                    : net::ip::address(net::ip::address_v4::loopback());
            }
            poke.connect(tcp::endpoint(addr, bound_port), ec);
            if (accept_thread.joinable()) accept_thread.join();
            poke.close(ec);
            acceptor->close(ec);
        }
        {
            std::lock_guard lock(conn_mutex);
            for (auto& [id, c] : connections) {
                if (c.fd >= 0) ::shutdown(c.fd, SHUT_RDWR);
            }
        }
        std::map<std::uint64_t, Connection> remaining;
        {
            std::lock_guard lock(conn_mutex);
            remaining.swap(connections);
        }
        for (auto& [id, c] : remaining) {
            if (c.thread.joinable()) c.thread.join();
        }
        stop_cv.notify_all();
    }
};

namespace {

std::vector<capture::Session> load_sessions(const ServiceConfig& config) {
    std::vector<capture::Session> sessions;
    for (const auto& p : config.sessions) sessions.push_back(capture::load_session(p));
    if (config.demo_session || sessions.empty()) sessions.push_back(demo_session());
    return sessions;
}

}  // namespace

Service::Service(ServiceConfig config) {
    auto clients = make_clients(config);
    auto sessions = load_sessions(config);
    impl_ = std::make_unique<Impl>(std::move(config), std::move(sessions), std::move(clients));
}

Service::Service(ServiceConfig config, std::vector<capture::Session> sessions, pipeline::Clients clients)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(sessions), std::move(clients))) {}

Service::~Service() { stop(); }

void Service::start() { impl_->start(); }

unsigned short Service::port() const { return impl_->bound_port; }

void Service::stop() {
    if (impl_) impl_->stop();
}

void Service::wait() {
    std::unique_lock lock(impl_->stop_mutex);
    impl_->stop_cv.wait(lock, [&] { return impl_->stopped; });
}

std::vector<std::string> Service::session_ids() const { return impl_->order; }

const capture::Session& Service::session(const std::string& id) const { return impl_->worker(id).session; }

std::future<pipeline::QueryTranscript> Service::submit(const std::string& session_id, QueryRequest request) {
    return impl_->submit(session_id, std::move(request));
}

bool Service::cancel(const std::string& session_id) { return impl_->cancel(session_id); }

std::vector<pipeline::QueryTranscript> Service::transcripts(const std::string& session_id) const {
    impl_->worker(session_id);
    return impl_->store.for_session(session_id);
}

std::optional<std::string> Service::artifact(const std::string& session_id, const std::string& ref) const {
    auto& w = impl_->worker(session_id);
    std::lock_guard lock(w.artifact_mutex);
    const auto it = w.artifacts.find(ref);
    if (it == w.artifacts.end()) return std::nullopt;
    return it->second;
}

EventBus& Service::events() noexcept { return impl_->bus; }

const ServiceConfig& Service::config() const noexcept { return impl_->config; }

}  // namespace gazegpt::service
