#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gazegpt/geometry.hpp"
#include "gazegpt/image.hpp"

namespace gazegpt::capture {

/// Axis-aligned rectangle in continuous pixel coordinates, [x0, x1) x [y0, y1).
struct PixelRect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const noexcept { return x1 - x0; }
    double height() const noexcept { return y1 - y0; }
    double area() const noexcept { return width() * height(); }
    bool contains(geometry::PixelPoint p) const noexcept {
        return p.u >= x0 && p.u < x1 && p.v >= y0 && p.v < y1;
    }
    bool operator==(const PixelRect&) const = default;
};

double overlap_area(const PixelRect& a, const PixelRect& b) noexcept;

struct Marker {
    int id = 0;
    geometry::PlanePoint plane;
    geometry::PixelPoint pixel;
};

struct LabeledRegion {
    std::string label;
    int row = 0;
    int col = 0;
    geometry::PlanePoint plane_min;
    geometry::PlanePoint plane_max;
    PixelRect rect;
};

/// Geometry of a rendered scene: where everything sits on the display and in the image.
/// The scene camera sits at the viewer's eye on the display normal, looking at the
/// display center, so plane point (x, y) is camera point (x, y, viewing_distance).
struct SceneLayout {
    std::string kind;
    double viewing_distance = 1.0;
    std::vector<Marker> markers;
    std::vector<geometry::PlanePoint> candidates;
    std::optional<geometry::PlanePoint> target_plane;
    std::optional<geometry::PixelPoint> target_px;
    std::optional<std::string> target_label;
    std::vector<LabeledRegion> regions;

    std::array<geometry::PixelPoint, 4> marker_pixels() const;
    std::array<geometry::PlanePoint, 4> marker_plane() const;
};

struct EmptyScene {
    std::array<std::uint8_t, 3> background{128, 128, 128};
};

/// 5x5 grid of candidate cross positions spaced in visual angle, with one active cross
/// and four corner fiducials.
struct CrossGridScene {
    int grid = 5;
    double spacing_deg = 11.0;
    double cross_deg = 1.06;
    double viewing_distance = 1.0;
    int active = 12;  ///< row-major candidate index; -1 renders no cross
    double marker_deg = 2.0;
    double marker_h_deg = 28.0;  ///< horizontal eccentricity of marker centers
    double marker_v_deg = 24.0;
};

/// grid x grid labeled images, each `image_deg` wide, horizontally abutting and separated
/// vertically by `vertical_gap_deg`. The whole grid is shifted so its central image sits
/// at (center_col, center_row) * center_spacing_deg.
struct DogGridScene {
    int grid = 9;
    double image_deg = 8.0;
    double vertical_gap_deg = 2.0;
    double viewing_distance = 1.0;
    double center_spacing_deg = 8.0;
    int center_row = 0;  ///< in [-2, 2]
    int center_col = 0;
    std::vector<std::string> labels;  ///< row-major, grid*grid entries; the center one is the target
};

using SceneDescription = std::variant<EmptyScene, CrossGridScene, DogGridScene>;

/// Throws DomainError ("unrenderable scene") when the scene cannot be laid out for the
/// camera: cross-grid fiducials off-frame, wrong label count, target outside the frame.
SceneLayout layout_scene(const SceneDescription& scene, const geometry::CameraModel& camera);

/// Renders at camera resolution. Deterministic in `seed`.
Image render_scene(const SceneDescription& scene, const SceneLayout& layout,
                   const geometry::CameraModel& camera, std::uint64_t seed);

nlohmann::json to_json(const SceneLayout& layout);
SceneLayout layout_from_json(const nlohmann::json& j);

}  // namespace gazegpt::capture
