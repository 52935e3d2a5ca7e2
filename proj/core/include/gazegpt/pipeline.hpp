#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazegpt/capture.hpp"
#include "gazegpt/clients.hpp"
#include "gazegpt/foveation.hpp"
#include "gazegpt/geometry.hpp"

namespace gazegpt::pipeline {

/// Text with `{{name}}` placeholders.
class PromptTemplate {
public:
    explicit PromptTemplate(std::string text);

    const std::string& text() const noexcept { return text_; }
    std::vector<std::string> placeholders() const;
    /// Throws DomainError if any placeholder is left without a value.
    std::string render(const std::map<std::string, std::string>& values) const;

private:
    std::string text_;
};

/// System prompt describing the multiscale images to the vision model.
const PromptTemplate& default_system_prompt();
/// {{question}}
const PromptTemplate& default_question_prompt();
/// {{labels}}: one candidate per line.
const PromptTemplate& default_classification_prompt();

struct QueryInput {
    std::optional<std::string> text;
    std::optional<AudioClip> audio;
};

/// Emitted around every stage; drives the /events stream.
struct StageEvent {
    std::string type;  ///< stage_start | stage_end | query_end
    std::string session_id;
    std::string query_id;
    std::optional<Stage> stage;
    double latency_s = 0.0;
    std::string status;  ///< ok | skipped | failed | timeout | cancelled
};

nlohmann::json to_json(const StageEvent& event);

struct QueryOptions {
    foveation::CropSpec crop;
    double fixation_depth = 1.0;
    /// Use this pixel instead of projecting the recorded gaze.
    std::optional<geometry::PixelPoint> gaze_override;
    std::string query_id = "q0";
    double stt_timeout_s = 30.0;
    double lmm_timeout_s = 60.0;
    double tts_timeout_s = 30.0;
    const CancelToken* cancel = nullptr;
    std::function<void(const StageEvent&)> on_event;
};

/// One end-to-end query. Stage latencies always hold stt, lmm and tts (skipped or
/// unreached stages are 0) and total_latency is their sum; orchestration work (sampling,
/// projection, cropping, encoding) is reported in overhead_s.
struct QueryTranscript {
    std::string session_id;
    std::string query_id;
    double trigger_t = 0.0;
    std::size_t frame_index = 0;
    double frame_t = 0.0;
    std::string input_kind;  ///< text | audio
    std::string question_text;
    geometry::PixelPoint gaze_px;
    std::string gaze_source;  ///< projected | override
    nlohmann::json crops;     ///< crop_metadata plus per-level image references
    std::string response_text;
    std::string audio_in_ref;
    std::string audio_out_ref;
    std::map<Stage, double> stage_latencies;
    double total_latency = 0.0;
    double overhead_s = 0.0;
    std::string status = "ok";  ///< ok | failed
    std::optional<Stage> failed_stage;
    std::string error;
};

nlohmann::json to_json(const QueryTranscript& t);
QueryTranscript transcript_from_json(const nlohmann::json& j);

struct QueryResult {
    QueryTranscript transcript;
    foveation::MultiscaleCrop crop;
    AudioClip response_audio;
};

/// Button-press semantics: frame and gaze are captured at `trigger_t`, then the question
/// is transcribed (if audio), sent with the base64 PNG crops to the vision model, and the
/// answer synthesized. A failing stage stops the query; later stages are never called.
QueryResult run_query(const capture::Session& session, double trigger_t, const QueryInput& input,
                      const Clients& clients, const QueryOptions& options = {});

/// PNG + base64 for each crop level, narrow to wide.
std::vector<EncodedImage> encode_crops(const foveation::MultiscaleCrop& crop);

class AmbiguousResponseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Longest label occurring in `response` (case-insensitive, whole words). Returns nullopt
/// when nothing matches; throws AmbiguousResponseError when two labels tie for longest.
std::optional<std::string> parse_label(std::string_view response, std::span<const std::string> labels);

struct ClassifyResult {
    std::optional<std::string> label;  ///< nullopt means no-match
    std::string response;
};

/// Asks the vision model to pick one of `labels` for the crops.
ClassifyResult classify_query(const foveation::MultiscaleCrop& crops, std::span<const std::string> labels,
                              VisionModel& client, const CallContext& ctx = {},
                              const PromptTemplate& prompt = default_classification_prompt());

}  // namespace gazegpt::pipeline
