#include "gazegpt/scene.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "gazegpt/error.hpp"
#include "gazegpt/rng.hpp"

namespace gazegpt::capture {

using geometry::CameraModel;
using geometry::deg_to_rad;
using geometry::PixelPoint;
using geometry::PlanePoint;

double overlap_area(const PixelRect& a, const PixelRect& b) noexcept {
    const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

std::array<PixelPoint, 4> SceneLayout::marker_pixels() const {
    if (markers.size() != 4) {
        throw DomainError("SceneLayout: scene has no fiducial markers");
    }
    return {markers[0].pixel, markers[1].pixel, markers[2].pixel, markers[3].pixel};
}

std::array<PlanePoint, 4> SceneLayout::marker_plane() const {
    if (markers.size() != 4) {
        throw DomainError("SceneLayout: scene has no fiducial markers");
    }
    return {markers[0].plane, markers[1].plane, markers[2].plane, markers[3].plane};
}

namespace {

double angle_to_plane(double deg, double distance) { return distance * std::tan(deg_to_rad(deg)); }

PixelPoint plane_to_pixel(const CameraModel& cam, PlanePoint p, double distance) {
    return cam.project(geometry::Vec3(p.x, p.y, distance));
}

PlanePoint pixel_to_plane(const CameraModel& cam, PixelPoint p, double distance) {
    const geometry::Vec3 ray = cam.back_project(p);
    return {distance * ray.x() / ray.z(), distance * ray.y() / ray.z()};
}

PixelRect project_rect(const CameraModel& cam, PlanePoint lo, PlanePoint hi, double distance) {
    PixelRect r{1e300, 1e300, -1e300, -1e300};
    for (const PlanePoint c : {lo, hi, PlanePoint{lo.x, hi.y}, PlanePoint{hi.x, lo.y}}) {
        const PixelPoint p = plane_to_pixel(cam, c, distance);
        r.x0 = std::min(r.x0, p.u);
        r.y0 = std::min(r.y0, p.v);
        r.x1 = std::max(r.x1, p.u);
        r.y1 = std::max(r.y1, p.v);
    }
    return r;
}

// Plane rectangle covering [a0, a1] x [b0, b1] degrees of per-axis eccentricity.
std::pair<PlanePoint, PlanePoint> angular_rect(double x0_deg, double x1_deg, double y0_deg,
                                               double y1_deg, double distance) {
    return {{angle_to_plane(x0_deg, distance), angle_to_plane(y0_deg, distance)},
            {angle_to_plane(x1_deg, distance), angle_to_plane(y1_deg, distance)}};
}

void unrenderable(const std::string& why) { throw DomainError("unrenderable scene: " + why); }

SceneLayout layout_cross(const CrossGridScene& s, const CameraModel& cam) {
    if (s.grid < 1 || !(s.spacing_deg > 0.0) || !(s.viewing_distance > 0.0) || !(s.cross_deg > 0.0)) {
        unrenderable("cross grid parameters must be positive");
    }
    if (s.active < -1 || s.active >= s.grid * s.grid) {
        unrenderable("active target index out of range");
    }
    SceneLayout layout;
    layout.kind = "cross_grid";
    layout.viewing_distance = s.viewing_distance;
    const double half = (s.grid - 1) / 2.0;
    for (int row = 0; row < s.grid; ++row) {
        for (int col = 0; col < s.grid; ++col) {
            layout.candidates.push_back(
                {angle_to_plane((col - half) * s.spacing_deg, s.viewing_distance),
                 angle_to_plane((row - half) * s.spacing_deg, s.viewing_distance)});
        }
    }
    // Clockwise from top-left.
    const double mh = s.marker_h_deg;
    const double mv = s.marker_v_deg;
    const std::array<std::pair<double, double>, 4> corners{{{-mh, -mv}, {mh, -mv}, {mh, mv}, {-mh, mv}}};
    for (int i = 0; i < 4; ++i) {
        Marker m;
        m.id = i;
        m.plane = {angle_to_plane(corners[i].first, s.viewing_distance),
                   angle_to_plane(corners[i].second, s.viewing_distance)};
        m.pixel = plane_to_pixel(cam, m.plane, s.viewing_distance);
        const double r = s.marker_deg / 2.0;
        const auto [lo, hi] = angular_rect(corners[i].first - r, corners[i].first + r,
                                           corners[i].second - r, corners[i].second + r,
                                           s.viewing_distance);
        const PixelRect box = project_rect(cam, lo, hi, s.viewing_distance);
        if (!cam.contains({box.x0, box.y0}) || !cam.contains({box.x1, box.y1})) {
            unrenderable("fiducial marker " + std::to_string(i) + " falls outside the frame");
        }
        layout.markers.push_back(m);
    }
    for (const auto& c : layout.candidates) {
        if (!cam.contains(plane_to_pixel(cam, c, s.viewing_distance))) {
            unrenderable("candidate target outside the frame");
        }
    }
    if (s.active >= 0) {
        layout.target_plane = layout.candidates[static_cast<std::size_t>(s.active)];
        layout.target_px = plane_to_pixel(cam, *layout.target_plane, s.viewing_distance);
    }
    return layout;
}

SceneLayout layout_dogs(const DogGridScene& s, const CameraModel& cam) {
    if (s.grid < 1 || s.grid % 2 == 0) {
        unrenderable("dog grid size must be odd and positive");
    }
    if (s.labels.size() != static_cast<std::size_t>(s.grid * s.grid)) {
        unrenderable("dog grid needs exactly grid*grid labels");
    }
    if (!(s.image_deg > 0.0) || s.vertical_gap_deg < 0.0 || !(s.viewing_distance > 0.0)) {
        unrenderable("dog grid dimensions must be positive");
    }
    SceneLayout layout;
    layout.kind = "dog_grid";
    layout.viewing_distance = s.viewing_distance;
    const int half = s.grid / 2;
    const double cx_deg = s.center_col * s.center_spacing_deg;
    const double cy_deg = s.center_row * s.center_spacing_deg;
    const double pitch_x = s.image_deg;
    const double pitch_y = s.image_deg + s.vertical_gap_deg;
    const double r = s.image_deg / 2.0;
    for (int row = 0; row < s.grid; ++row) {
        for (int col = 0; col < s.grid; ++col) {
            const double ax = cx_deg + (col - half) * pitch_x;
            const double ay = cy_deg + (row - half) * pitch_y;
            if (std::abs(ax) + r >= 89.0 || std::abs(ay) + r >= 89.0) {
                unrenderable("dog grid extends past the display horizon");
            }
            LabeledRegion region;
            region.label = s.labels[static_cast<std::size_t>(row * s.grid + col)];
            region.row = row;
            region.col = col;
            const auto [lo, hi] = angular_rect(ax - r, ax + r, ay - r, ay + r, s.viewing_distance);
            region.plane_min = lo;
            region.plane_max = hi;
            region.rect = project_rect(cam, lo, hi, s.viewing_distance);
            layout.regions.push_back(std::move(region));
        }
    }
    const auto& center = layout.regions[static_cast<std::size_t>(half * s.grid + half)];
    layout.target_label = center.label;
    layout.target_plane = PlanePoint{angle_to_plane(cx_deg, s.viewing_distance),
                                     angle_to_plane(cy_deg, s.viewing_distance)};
    layout.target_px = plane_to_pixel(cam, *layout.target_plane, s.viewing_distance);
    if (!cam.contains(*layout.target_px)) {
        unrenderable("target image center outside the frame");
    }
    return layout;
}

// Calls paint(x, y, plane point) for every pixel whose center falls in `rect`.
void for_pixels(const CameraModel& cam, const PixelRect& rect, double distance,
                const std::function<void(int, int, PlanePoint)>& paint) {
    const int x0 = std::max(0, static_cast<int>(std::ceil(rect.x0)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(rect.y0)));
    const int x1 = std::min(cam.width(), static_cast<int>(std::ceil(rect.x1)));
    const int y1 = std::min(cam.height(), static_cast<int>(std::ceil(rect.y1)));
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            paint(x, y, pixel_to_plane(cam, {static_cast<double>(x), static_cast<double>(y)}, distance));
        }
    }
}

PixelRect grow(PixelRect r, double by) { return {r.x0 - by, r.y0 - by, r.x1 + by, r.y1 + by}; }

void render_cross(const CrossGridScene& s, const SceneLayout& layout, const CameraModel& cam,
                  std::uint64_t seed, Image& img) {
    const double d = s.viewing_distance;
    // Faint candidate dots.
    const double dot = angle_to_plane(0.15, d);
    for (const auto& c : layout.candidates) {
        const auto box = grow(project_rect(cam, {c.x - dot, c.y - dot}, {c.x + dot, c.y + dot}, d), 1.0);
        for_pixels(cam, box, d, [&](int x, int y, PlanePoint p) {
            if (std::hypot(p.x - c.x, p.y - c.y) <= dot) img.set(x, y, 175, 175, 175);
        });
    }
    if (layout.target_plane) {
        const PlanePoint c = *layout.target_plane;
        const double arm = angle_to_plane(s.cross_deg / 2.0, d) / std::sqrt(2.0);
        const double stroke = angle_to_plane(s.cross_deg * 0.08, d);
        const auto box = grow(project_rect(cam, {c.x - arm, c.y - arm}, {c.x + arm, c.y + arm}, d), 2.0);
        for_pixels(cam, box, d, [&](int x, int y, PlanePoint p) {
            const double dx = p.x - c.x;
            const double dy = p.y - c.y;
            if (std::abs(dx) > arm + stroke || std::abs(dy) > arm + stroke) return;
            const double d1 = std::abs(dx - dy) / std::sqrt(2.0);
            const double d2 = std::abs(dx + dy) / std::sqrt(2.0);
            if (std::min(d1, d2) <= stroke / 2.0) img.set(x, y, 0, 0, 0);
        });
    }
    // Fiducials: black border, 4x4 payload of id bits.
    for (const auto& m : layout.markers) {
        const double mx = std::atan(m.plane.x / d) * 57.29577951308232;
        const double my = std::atan(m.plane.y / d) * 57.29577951308232;
        const double r = s.marker_deg / 2.0;
        const auto [lo, hi] = angular_rect(mx - r, mx + r, my - r, my + r, d);
        const std::uint64_t bits = mix64(seed ^ static_cast<std::uint64_t>(m.id + 1));
        for_pixels(cam, project_rect(cam, lo, hi, d), d, [&](int x, int y, PlanePoint p) {
            const int cx = std::clamp(static_cast<int>((p.x - lo.x) / (hi.x - lo.x) * 6.0), 0, 5);
            const int cy = std::clamp(static_cast<int>((p.y - lo.y) / (hi.y - lo.y) * 6.0), 0, 5);
            bool black = true;
            if (cx > 0 && cx < 5 && cy > 0 && cy < 5) {
                black = ((bits >> ((cy - 1) * 4 + (cx - 1))) & 1U) != 0U;
            }
            const std::uint8_t v = black ? 0 : 255;
            img.set(x, y, v, v, v);
        });
    }
}

void render_dogs(const DogGridScene& s, const SceneLayout& layout, const CameraModel& cam,
                 std::uint64_t seed, Image& img) {
    const double d = s.viewing_distance;
    for (const auto& region : layout.regions) {
        std::uint64_t h = mix64(seed);
        for (char ch : region.label) h = mix64(h ^ static_cast<unsigned char>(ch));
        const std::uint8_t coat_r = static_cast<std::uint8_t>(60 + (h & 0x7F));
        const std::uint8_t coat_g = static_cast<std::uint8_t>(40 + ((h >> 8) & 0x7F));
        const std::uint8_t coat_b = static_cast<std::uint8_t>(20 + ((h >> 16) & 0x5F));
        const double body_w = 0.30 + 0.12 * static_cast<double>((h >> 24) & 0xFF) / 255.0;
        const double body_h = 0.16 + 0.08 * static_cast<double>((h >> 32) & 0xFF) / 255.0;
        const double head_r = 0.10 + 0.06 * static_cast<double>((h >> 40) & 0xFF) / 255.0;
        const bool spotted = ((h >> 48) & 1U) != 0U;
        const double lo_x = region.plane_min.x;
        const double lo_y = region.plane_min.y;
        const double w = region.plane_max.x - lo_x;
        const double hgt = region.plane_max.y - lo_y;
        for_pixels(cam, region.rect, d, [&](int x, int y, PlanePoint p) {
            const double sx = (p.x - lo_x) / w;
            const double sy = (p.y - lo_y) / hgt;
            const double bx = (sx - 0.45) / body_w;
            const double by = (sy - 0.60) / body_h;
            const double hx = sx - 0.72;
            const double hy = sy - 0.38;
            const bool in_body = bx * bx + by * by <= 1.0;
            const bool in_head = hx * hx + hy * hy <= head_r * head_r;
            const bool in_leg = sy > 0.6 && sy < 0.9 &&
                                (std::abs(sx - 0.30) < 0.03 || std::abs(sx - 0.58) < 0.03);
            if (in_head && std::hypot(hx - head_r * 0.35, hy + head_r * 0.2) < head_r * 0.15) {
                img.set(x, y, 20, 20, 20);  // eye
            } else if (in_body || in_head || in_leg) {
                if (spotted && std::fmod(std::floor(sx * 14.0) + std::floor(sy * 14.0), 3.0) == 0.0) {
                    img.set(x, y, static_cast<std::uint8_t>(coat_r / 3), static_cast<std::uint8_t>(coat_g / 3),
                            static_cast<std::uint8_t>(coat_b / 3));
                } else {
                    img.set(x, y, coat_r, coat_g, coat_b);
                }
            }
        });
    }
}

}  // namespace

SceneLayout layout_scene(const SceneDescription& scene, const CameraModel& camera) {
    return std::visit(
        [&](const auto& s) -> SceneLayout {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, EmptyScene>) {
                SceneLayout layout;
                layout.kind = "empty";
                return layout;
            } else if constexpr (std::is_same_v<T, CrossGridScene>) {
                return layout_cross(s, camera);
            } else {
                return layout_dogs(s, camera);
            }
        },
        scene);
}

Image render_scene(const SceneDescription& scene, const SceneLayout& layout,
                   const CameraModel& camera, std::uint64_t seed) {
    return std::visit(
        [&](const auto& s) -> Image {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, EmptyScene>) {
                return Image(camera.width(), camera.height(), s.background[0], s.background[1],
                             s.background[2]);
            } else if constexpr (std::is_same_v<T, CrossGridScene>) {
                Image img(camera.width(), camera.height(), 205, 205, 205);
                render_cross(s, layout, camera, seed, img);
                return img;
            } else {
                Image img(camera.width(), camera.height(), 255, 255, 255);
                render_dogs(s, layout, camera, seed, img);
                return img;
            }
        },
        scene);
}

namespace {

nlohmann::json pt(PixelPoint p) { return {p.u, p.v}; }
nlohmann::json pt(PlanePoint p) { return {p.x, p.y}; }
PixelPoint px_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
PlanePoint pl_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

nlohmann::json to_json(const SceneLayout& layout) {
    nlohmann::json j;
    j["kind"] = layout.kind;
    j["viewing_distance"] = layout.viewing_distance;
    j["markers"] = nlohmann::json::array();
    for (const auto& m : layout.markers) {
        j["markers"].push_back({{"id", m.id}, {"plane", pt(m.plane)}, {"pixel", pt(m.pixel)}});
    }
    j["candidates"] = nlohmann::json::array();
    for (const auto& c : layout.candidates) j["candidates"].push_back(pt(c));
    if (layout.target_plane) j["target_plane"] = pt(*layout.target_plane);
    if (layout.target_px) j["target_px"] = pt(*layout.target_px);
    if (layout.target_label) j["target_label"] = *layout.target_label;
    j["regions"] = nlohmann::json::array();
    for (const auto& r : layout.regions) {
        j["regions"].push_back({{"label", r.label},
                                {"row", r.row},
                                {"col", r.col},
                                {"plane_min", pt(r.plane_min)},
                                {"plane_max", pt(r.plane_max)},
                                {"rect", {r.rect.x0, r.rect.y0, r.rect.x1, r.rect.y1}}});
    }
    return j;
}

SceneLayout layout_from_json(const nlohmann::json& j) {
    try {
        SceneLayout layout;
        layout.kind = j.at("kind").get<std::string>();
        layout.viewing_distance = j.at("viewing_distance").get<double>();
        for (const auto& m : j.at("markers")) {
            layout.markers.push_back({m.at("id").get<int>(), pl_from(m.at("plane")), px_from(m.at("pixel"))});
        }
        for (const auto& c : j.at("candidates")) layout.candidates.push_back(pl_from(c));
        if (j.contains("target_plane")) layout.target_plane = pl_from(j.at("target_plane"));
        if (j.contains("target_px")) layout.target_px = px_from(j.at("target_px"));
        if (j.contains("target_label")) layout.target_label = j.at("target_label").get<std::string>();
        for (const auto& r : j.at("regions")) {
            LabeledRegion region;
            region.label = r.at("label").get<std::string>();
            region.row = r.at("row").get<int>();
            region.col = r.at("col").get<int>();
            region.plane_min = pl_from(r.at("plane_min"));
            region.plane_max = pl_from(r.at("plane_max"));
            const auto& rc = r.at("rect");
            region.rect = {rc.at(0).get<double>(), rc.at(1).get<double>(), rc.at(2).get<double>(),
                           rc.at(3).get<double>()};
            layout.regions.push_back(std::move(region));
        }
        return layout;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("scene", e.what());
    }
}

}  // namespace gazegpt::capture
