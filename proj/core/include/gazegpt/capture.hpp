#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazegpt/geometry.hpp"
#include "gazegpt/image.hpp"
#include "gazegpt/scene.hpp"

namespace gazegpt::capture {

inline constexpr double kWorldFrameRateHz = 15.0;
inline constexpr double kGazeRateHz = 120.0;

struct Frame {
    double t = 0.0;
    std::shared_ptr<const Image> image;
};

/// A frame in a session: either decoded in memory or a PNG on disk decoded on access.
struct FrameRef {
    double t = 0.0;
    std::filesystem::path file;
    std::shared_ptr<const Image> image;
};

/// Synchronized world-camera frames and gaze stream on a shared clock. Immutable once
/// constructed; safe to share across threads.
class Session {
public:
    /// Validates strictly increasing frame times, non-decreasing gaze times, resolvable
    /// frame files and in-memory frame sizes.
    Session(std::string id, geometry::CameraModel camera, std::vector<FrameRef> frames,
            std::vector<geometry::GazeSample> gaze, nlohmann::json metadata = nlohmann::json::object());

    const std::string& id() const noexcept { return id_; }
    const geometry::CameraModel& camera() const noexcept { return camera_; }
    std::span<const FrameRef> frames() const noexcept { return frames_; }
    std::span<const geometry::GazeSample> gaze() const noexcept { return gaze_; }
    const nlohmann::json& metadata() const noexcept { return metadata_; }

    /// Decodes frame `index`; throws OutOfRangeError on a bad index.
    Frame frame(std::size_t index) const;

    double start_time() const;
    double end_time() const;

private:
    std::string id_;
    geometry::CameraModel camera_;
    std::vector<FrameRef> frames_;
    std::vector<geometry::GazeSample> gaze_;
    nlohmann::json metadata_;
};

/// Reads `manifest.json` (or the given JSON file):
///   {camera: {...}, frames: [{t, file}], gaze_file, metadata}
/// with gaze as CSV columns t,ox,oy,oz,dx,dy,dz and a header row.
Session load_session(const std::filesystem::path& path);

/// Writes manifest.json, images/frame_NNNNNN.png and gaze.csv under `dir`.
void save_session(const Session& session, const std::filesystem::path& dir);

std::vector<geometry::GazeSample> read_gaze_csv(const std::filesystem::path& path);
void write_gaze_csv(std::span<const geometry::GazeSample> gaze, const std::filesystem::path& path);

/// Latest frame with frame.t <= t and the gaze sample nearest t (ties go to the earlier).
std::pair<Frame, geometry::GazeSample> sample_at(const Session& session, double t);

/// Index of the gaze sample nearest t, ties to the earlier one.
std::size_t nearest_gaze_index(std::span<const geometry::GazeSample> gaze, double t);

/// The eye fixates `target` (display-plane point) from time `t` onward.
struct Fixation {
    double t = 0.0;
    geometry::PlanePoint target;
};

struct GazeScript {
    double duration = 1.0;
    /// Pupil center in camera coordinates (meters).
    geometry::Vec3 eye_origin = geometry::Vec3::Zero();
    /// Fixations sorted by time; before the first one the eye looks at the plane origin.
    std::vector<Fixation> fixations;
    double frame_rate = kWorldFrameRateHz;
    double gaze_rate = kGazeRateHz;
};

/// Renders the scene once and replays it as a static world view sampled at the script's
/// frame rate, with a gaze stream fixating the scripted targets. Layout and seed are
/// stored in metadata["scene"] and metadata["seed"].
Session synth_session(const SceneDescription& scene, const geometry::CameraModel& camera,
                      const GazeScript& script, std::uint64_t seed, std::string id = "synthetic");

/// Layout recorded in a synthetic session's metadata, if any.
std::optional<SceneLayout> session_layout(const Session& session);

}  // namespace gazegpt::capture
