#include "gazegpt/capture.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gazegpt/error.hpp"

namespace gazegpt::capture {

namespace fs = std::filesystem;
using geometry::GazeSample;
using geometry::Vec3;

Session::Session(std::string id, geometry::CameraModel camera, std::vector<FrameRef> frames,
                 std::vector<GazeSample> gaze, nlohmann::json metadata)
    : id_(std::move(id)),
      camera_(camera),
      frames_(std::move(frames)),
      gaze_(std::move(gaze)),
      metadata_(std::move(metadata)) {
    for (std::size_t i = 1; i < frames_.size(); ++i) {
        if (!(frames_[i].t > frames_[i - 1].t)) {
            throw TimestampOrderError("frame timestamps must be strictly increasing (frame " +
                                      std::to_string(i) + ")");
        }
    }
    for (std::size_t i = 1; i < gaze_.size(); ++i) {
        if (gaze_[i].t < gaze_[i - 1].t) {
            throw TimestampOrderError("gaze timestamps must be non-decreasing (sample " +
                                      std::to_string(i) + ")");
        }
    }
    for (const auto& f : frames_) {
        if (f.image) {
            if (f.image->width() != camera_.width() || f.image->height() != camera_.height()) {
                throw SchemaError("frames", "frame size does not match the camera model");
            }
        } else if (!fs::is_regular_file(f.file)) {
            throw MissingAssetError(f.file.string());
        }
    }
    for (const auto& g : gaze_) {
        if (std::abs(g.direction.norm() - 1.0) > 1e-9) {
            throw SchemaError("gaze", "direction is not unit length");
        }
    }
}

Frame Session::frame(std::size_t index) const {
    if (index >= frames_.size()) {
        throw OutOfRangeError("frame index " + std::to_string(index) + " out of range");
    }
    const auto& ref = frames_[index];
    if (ref.image) {
        return {ref.t, ref.image};
    }
    auto image = std::make_shared<const Image>(read_png(ref.file));
    if (image->width() != camera_.width() || image->height() != camera_.height()) {
        throw SchemaError("frames", "decoded frame size does not match the camera model");
    }
    return {ref.t, std::move(image)};
}

double Session::start_time() const {
    if (frames_.empty()) throw OutOfRangeError("session has no frames");
    return frames_.front().t;
}

double Session::end_time() const {
    if (frames_.empty()) throw OutOfRangeError("session has no frames");
    double end = frames_.back().t;
    if (!gaze_.empty()) end = std::max(end, gaze_.back().t);
    return end;
}

namespace {

double parse_double(std::string_view s, const std::string& field) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
        throw SchemaError(field, "not a finite number: '" + std::string(s) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::vector<GazeSample> read_gaze_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingAssetError(path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError("gaze_file", "empty file, header row required");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    static const std::vector<std::string> kHeader{"t", "ox", "oy", "oz", "dx", "dy", "dz"};
    const auto header = split(line, ',');
    if (header.size() != kHeader.size() ||
        !std::equal(header.begin(), header.end(), kHeader.begin())) {
        throw SchemaError("gaze_file", "header must be t,ox,oy,oz,dx,dy,dz");
    }
    std::vector<GazeSample> gaze;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line, ',');
        const std::string where = "gaze_file:" + std::to_string(row);
        if (cells.size() != 7) {
            throw SchemaError(where, "expected 7 columns");
        }
        double v[7];
        for (int i = 0; i < 7; ++i) v[i] = parse_double(cells[static_cast<std::size_t>(i)], where);
        const Vec3 dir(v[4], v[5], v[6]);
        if (std::abs(dir.norm() - 1.0) > 1e-6) {
            throw SchemaError(where, "gaze direction is not unit length");
        }
        // Keep the stored direction as written; renormalizing would perturb the last bit.
        auto g = GazeSample::make(v[0], Vec3(v[1], v[2], v[3]), dir);
        g.direction = dir;
        gaze.push_back(g);
    }
    return gaze;
}

void write_gaze_csv(std::span<const GazeSample> gaze, const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_gaze_csv: cannot open " + path.string());
    }
    out << "t,ox,oy,oz,dx,dy,dz\n";
    for (const auto& g : gaze) {
        out << format_double(g.t) << ',' << format_double(g.origin.x()) << ','
            << format_double(g.origin.y()) << ',' << format_double(g.origin.z()) << ','
            << format_double(g.direction.x()) << ',' << format_double(g.direction.y()) << ','
            << format_double(g.direction.z()) << '\n';
    }
}

Session load_session(const fs::path& path) {
    const fs::path manifest = fs::is_directory(path) ? path / "manifest.json" : path;
    std::ifstream in(manifest);
    if (!in) {
        throw MissingAssetError(manifest.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("manifest", e.what());
    }
    const fs::path base = manifest.parent_path();
    if (!j.is_object()) throw SchemaError("manifest", "expected an object");
    if (!j.contains("camera")) throw SchemaError("camera", "missing");
    const auto camera = geometry::camera_from_json(j.at("camera"));

    if (!j.contains("frames") || !j.at("frames").is_array()) {
        throw SchemaError("frames", "expected an array");
    }
    std::vector<FrameRef> frames;
    for (std::size_t i = 0; i < j.at("frames").size(); ++i) {
        const auto& f = j.at("frames").at(i);
        const std::string where = "frames[" + std::to_string(i) + "]";
        if (!f.is_object() || !f.contains("t") || !f.at("t").is_number()) {
            throw SchemaError(where + ".t", "expected a number");
        }
        if (!f.contains("file") || !f.at("file").is_string()) {
            throw SchemaError(where + ".file", "expected a string");
        }
        const fs::path file = base / f.at("file").get<std::string>();
        if (!fs::is_regular_file(file)) {
            throw MissingAssetError(file.string());
        }
        frames.push_back({f.at("t").get<double>(), file, nullptr});
    }

    std::vector<GazeSample> gaze;
    if (j.contains("gaze_file")) {
        if (!j.at("gaze_file").is_string()) throw SchemaError("gaze_file", "expected a string");
        gaze = read_gaze_csv(base / j.at("gaze_file").get<std::string>());
    }
    nlohmann::json metadata = nlohmann::json::object();
    if (j.contains("metadata")) {
        if (!j.at("metadata").is_object()) throw SchemaError("metadata", "expected an object");
        metadata = j.at("metadata");
    }
    std::string id = manifest.parent_path().filename().string();
    if (metadata.contains("session_id") && metadata.at("session_id").is_string()) {
        id = metadata.at("session_id").get<std::string>();
    }
    return Session(std::move(id), camera, std::move(frames), std::move(gaze), std::move(metadata));
}

void save_session(const Session& session, const fs::path& dir) {
    fs::create_directories(dir / "images");
    nlohmann::json j;
    j["camera"] = geometry::to_json(session.camera());
    j["frames"] = nlohmann::json::array();
    // Frames sharing one in-memory image are written once.
    std::vector<std::pair<const Image*, std::string>> written;
    for (std::size_t i = 0; i < session.frames().size(); ++i) {
        const auto& ref = session.frames()[i];
        std::string name;
        if (ref.image) {
            const auto it = std::find_if(written.begin(), written.end(),
                                         [&](const auto& w) { return w.first == ref.image.get(); });
            if (it != written.end()) {
                name = it->second;
            } else {
                char buf[32];
                std::snprintf(buf, sizeof buf, "images/frame_%06zu.png", i);
                name = buf;
                write_png(*ref.image, dir / name);
                written.emplace_back(ref.image.get(), name);
            }
        } else {
            char buf[32];
            std::snprintf(buf, sizeof buf, "images/frame_%06zu.png", i);
            name = buf;
            fs::copy_file(ref.file, dir / name, fs::copy_options::overwrite_existing);
        }
        j["frames"].push_back({{"t", ref.t}, {"file", name}});
    }
    j["gaze_file"] = "gaze.csv";
    write_gaze_csv(session.gaze(), dir / "gaze.csv");
    nlohmann::json metadata = session.metadata();
    metadata["session_id"] = session.id();
    j["metadata"] = metadata;
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << '\n';
}

std::size_t nearest_gaze_index(std::span<const GazeSample> gaze, double t) {
    if (gaze.empty()) {
        throw OutOfRangeError("no gaze samples");
    }
    const auto it = std::lower_bound(gaze.begin(), gaze.end(), t,
                                     [](const GazeSample& g, double v) { return g.t < v; });
    if (it == gaze.begin()) return 0;
    if (it == gaze.end()) return gaze.size() - 1;
    const auto prev = std::prev(it);
    // Earlier sample wins ties.
    return (t - prev->t <= it->t - t) ? static_cast<std::size_t>(prev - gaze.begin())
                                      : static_cast<std::size_t>(it - gaze.begin());
}

std::pair<Frame, GazeSample> sample_at(const Session& session, double t) {
    const auto frames = session.frames();
    if (frames.empty() || session.gaze().empty()) {
        throw OutOfRangeError("sample_at: session needs at least one frame and one gaze sample");
    }
    if (!(t >= session.start_time() && t <= session.end_time())) {
        throw OutOfRangeError("sample_at: t outside the session span");
    }
    const auto it = std::upper_bound(frames.begin(), frames.end(), t,
                                     [](double v, const FrameRef& f) { return v < f.t; });
    const auto index = static_cast<std::size_t>(std::prev(it) - frames.begin());
    return {session.frame(index), session.gaze()[nearest_gaze_index(session.gaze(), t)]};
}

Session synth_session(const SceneDescription& scene, const geometry::CameraModel& camera,
                      const GazeScript& script, std::uint64_t seed, std::string id) {
    if (!(script.duration >= 0.0) || !(script.frame_rate > 0.0) || !(script.gaze_rate > 0.0)) {
        throw DomainError("synth_session: duration and rates must be positive");
    }
    if (!std::is_sorted(script.fixations.begin(), script.fixations.end(),
                        [](const Fixation& a, const Fixation& b) { return a.t < b.t; })) {
        throw DomainError("synth_session: fixations must be sorted by time");
    }
    const SceneLayout layout = layout_scene(scene, camera);
    auto image = std::make_shared<const Image>(render_scene(scene, layout, camera, seed));
    const double distance = layout.viewing_distance;

    std::vector<FrameRef> frames;
    const auto frame_count = static_cast<std::size_t>(std::floor(script.duration * script.frame_rate + 1e-9)) + 1;
    for (std::size_t i = 0; i < frame_count; ++i) {
        frames.push_back({static_cast<double>(i) / script.frame_rate, {}, image});
    }
    std::vector<GazeSample> gaze;
    const auto gaze_count = static_cast<std::size_t>(std::floor(script.duration * script.gaze_rate + 1e-9)) + 1;
    std::size_t next = 0;
    geometry::PlanePoint target{0.0, 0.0};
    for (std::size_t i = 0; i < gaze_count; ++i) {
        const double t = static_cast<double>(i) / script.gaze_rate;
        while (next < script.fixations.size() && script.fixations[next].t <= t) {
            target = script.fixations[next++].target;
        }
        const Vec3 point(target.x, target.y, distance);
        gaze.push_back(GazeSample::make(t, script.eye_origin, point - script.eye_origin));
    }
    nlohmann::json metadata{{"generator", "synth_session"},
                            {"seed", seed},
                            {"scene", to_json(layout)},
                            {"fixation_depth_m", distance}};
    return Session(std::move(id), camera, std::move(frames), std::move(gaze), std::move(metadata));
}

std::optional<SceneLayout> session_layout(const Session& session) {
    if (!session.metadata().contains("scene")) return std::nullopt;
    return layout_from_json(session.metadata().at("scene"));
}

}  // namespace gazegpt::capture
