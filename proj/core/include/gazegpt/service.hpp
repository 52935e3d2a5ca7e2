#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazegpt/capture.hpp"
#include "gazegpt/clients.hpp"
#include "gazegpt/foveation.hpp"
#include "gazegpt/pipeline.hpp"

namespace gazegpt::service {

class ServiceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MockStageConfig {
    double delay_s = 0.0;
    std::string failure = "none";  ///< none | error | timeout
};

struct MockConfig {
    MockStageConfig stt;
    MockStageConfig lmm;
    MockStageConfig tts;
    std::string transcript = "What am I looking at?";
    std::vector<std::string> responses{"You are looking at the object in the center of the smallest image."};
};

struct LiveConfig {
    pipeline::Endpoint stt = pipeline::default_whisper_endpoint();
    pipeline::Endpoint lmm = pipeline::default_vision_endpoint();
    pipeline::Endpoint tts = pipeline::default_synthesis_endpoint();
};

/// Service configuration file (JSON). Relative paths resolve against the file's directory.
///
///   {"host": "127.0.0.1", "port": 8080, "mode": "mock" | "live",
///    "sessions": ["path/to/session", ...], "demo_session": true,
///    "crop": {...}, "fixation_depth_m": 1.0,
///    "timeouts_s": {"stt": 30, "lmm": 60, "tts": 30},
///    "mock": {"transcript": "...", "responses": ["..."],
///             "stt": {"delay_s": 0.9, "failure": "none"}, "lmm": {...}, "tts": {...}},
///    "live": {"stt": {"base_url", "path", "api_key_env", "model", "timeout_s"},
///             "lmm": {...}, "tts": {..., "voice_id"}},
///    "transcript_log": "transcripts.jsonl", "event_queue_limit": 256}
struct ServiceConfig {
    std::string host = "127.0.0.1";
    unsigned short port = 8080;  ///< 0 picks a free port
    std::string mode = "mock";
    std::vector<std::filesystem::path> sessions;
    /// Adds a synthetic dog-grid session called "demo". Implied when no sessions are listed.
    bool demo_session = false;
    foveation::CropSpec crop;
    double fixation_depth = 1.0;
    double stt_timeout_s = 30.0;
    double lmm_timeout_s = 60.0;
    double tts_timeout_s = 30.0;
    MockConfig mock;
    LiveConfig live;
    std::filesystem::path transcript_log;  ///< empty disables the JSONL log
    std::size_t event_queue_limit = 256;
};

ServiceConfig service_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ServiceConfig load_service_config(const std::filesystem::path& path);
nlohmann::json to_json(const ServiceConfig& config);

pipeline::Clients make_clients(const ServiceConfig& config);

/// Synthetic dog-grid session with the gaze resting on the central image.
capture::Session demo_session(const geometry::CameraModel& camera = geometry::world_camera(),
                              std::uint64_t seed = 7);

/// Append-only transcript store with an optional JSON-lines mirror.
class TranscriptStore {
public:
    explicit TranscriptStore(std::filesystem::path log_path = {});

    void append(const pipeline::QueryTranscript& transcript);
    std::vector<pipeline::QueryTranscript> for_session(const std::string& session_id) const;
    std::vector<pipeline::QueryTranscript> all() const;

private:
    mutable std::shared_mutex mutex_;
    std::vector<pipeline::QueryTranscript> transcripts_;
    std::ofstream log_;
};

/// Fan-out of JSON events to subscribers, each with a bounded queue that drops its oldest
/// entries when a reader falls behind.
class EventBus {
public:
    class Subscription {
    public:
        explicit Subscription(std::size_t limit) : limit_(limit) {}
        /// Next event, or nullopt on timeout or once the bus is closed and drained.
        std::optional<std::string> pop(std::chrono::milliseconds timeout);
        std::size_t dropped() const;

    private:
        friend class EventBus;
        void push(const std::string& event);
        void close();

        std::size_t limit_;
        mutable std::mutex mutex_;
        std::condition_variable cv_;
        std::deque<std::string> queue_;
        std::size_t dropped_ = 0;
        bool closed_ = false;
    };

    explicit EventBus(std::size_t limit = 256) : limit_(limit) {}

    std::shared_ptr<Subscription> subscribe();
    void unsubscribe(const std::shared_ptr<Subscription>& sub);
    void publish(const nlohmann::json& event);
    void close();

private:
    std::size_t limit_;
    std::mutex mutex_;
    std::vector<std::shared_ptr<Subscription>> subs_;
    bool closed_ = false;
};

struct QueryRequest {
    std::optional<std::size_t> frame_id;
    std::optional<double> timestamp;
    std::optional<geometry::PixelPoint> gaze_px;  ///< absent: project the recorded gaze
    pipeline::QueryInput input;
};

/// Parses the POST /query body. Throws SchemaError on malformed input.
QueryRequest query_request_from_json(const nlohmann::json& j);

class Service {
public:
    explicit Service(ServiceConfig config);
    Service(ServiceConfig config, std::vector<capture::Session> sessions, pipeline::Clients clients);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and starts accepting. Throws ServiceError when the address cannot be bound.
    void start();
    /// Bound port; valid after start().
    unsigned short port() const;
    /// Cancels in-flight queries, closes connections and joins all threads. Idempotent.
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();

    std::vector<std::string> session_ids() const;
    const capture::Session& session(const std::string& id) const;

    /// Queues a query on the session's worker; queries on one session run in submission
    /// order. Throws ServiceError for an unknown session, SchemaError for a bad request.
    std::future<pipeline::QueryTranscript> submit(const std::string& session_id, QueryRequest request);
    /// Cancels the query currently running on the session, if any.
    bool cancel(const std::string& session_id);

    std::vector<pipeline::QueryTranscript> transcripts(const std::string& session_id) const;
    /// Crop image or audio referenced by a transcript, e.g. "crops/q1_level0.png".
    std::optional<std::string> artifact(const std::string& session_id, const std::string& ref) const;

    EventBus& events() noexcept;
    const ServiceConfig& config() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace gazegpt::service
