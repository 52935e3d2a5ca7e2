#include "gazegpt/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gazegpt/error.hpp"

namespace gazegpt::geometry {

namespace {

bool finite(double x) { return std::isfinite(x); }

}  // namespace

CameraModel::CameraModel(int width_px, int height_px, double fx, double fy, double cx,
                         double cy, double k1, double k2)
    : width_(width_px), height_(height_px), fx_(fx), fy_(fy), cx_(cx), cy_(cy), k1_(k1), k2_(k2) {
    if (width_px <= 0 || height_px <= 0) {
        throw DomainError("CameraModel: dimensions must be positive");
    }
    if (!(fx > 0.0) || !(fy > 0.0) || !finite(fx) || !finite(fy)) {
        throw DomainError("CameraModel: focal lengths must be positive and finite");
    }
    if (!(cx >= 0.0 && cx < width_px) || !(cy >= 0.0 && cy < height_px)) {
        throw DomainError("CameraModel: principal point outside the image");
    }
    if (!finite(k1) || !finite(k2)) {
        throw DomainError("CameraModel: distortion coefficients must be finite");
    }
}

bool CameraModel::contains(PixelPoint p) const noexcept {
    return p.u >= -0.5 && p.u < width_ - 0.5 && p.v >= -0.5 && p.v < height_ - 0.5;
}

PixelPoint CameraModel::clamp(PixelPoint p) const noexcept {
    // Keep strictly inside the half-open pixel span.
    const double max_u = std::nextafter(width_ - 0.5, 0.0);
    const double max_v = std::nextafter(height_ - 0.5, 0.0);
    return {std::clamp(p.u, -0.5, max_u), std::clamp(p.v, -0.5, max_v)};
}

Vec2 CameraModel::distort_normalized(const Vec2& undistorted) const noexcept {
    const double r2 = undistorted.squaredNorm();
    return undistorted * (1.0 + k1_ * r2 + k2_ * r2 * r2);
}

Vec2 CameraModel::undistort_normalized(const Vec2& distorted) const {
    if (k1_ == 0.0 && k2_ == 0.0) {
        return distorted;
    }
    const double rd = distorted.norm();
    if (rd == 0.0) {
        return distorted;
    }
    // Solve rd = r (1 + k1 r^2 + k2 r^4) for r by Newton's method.
    double r = rd;
    for (int iter = 0; iter < 50; ++iter) {
        const double r2 = r * r;
        const double f = r * (1.0 + k1_ * r2 + k2_ * r2 * r2) - rd;
        const double df = 1.0 + 3.0 * k1_ * r2 + 5.0 * k2_ * r2 * r2;
        if (df <= 0.0) {
            throw DomainError("undistort: distortion is not invertible at this radius");
        }
        const double step = f / df;
        r -= step;
        if (std::abs(step) < 1e-16 * std::max(1.0, r)) {
            break;
        }
    }
    return distorted * (r / rd);
}

PixelPoint CameraModel::project(const Vec3& point) const {
    if (!(point.z() > 0.0)) {
        throw BehindCameraError("project: point has non-positive depth");
    }
    const Vec2 d = distort_normalized(point.head<2>() / point.z());
    return {cx_ + fx_ * d.x(), cy_ + fy_ * d.y()};
}

Vec3 CameraModel::back_project(PixelPoint p) const {
    const Vec2 d{(p.u - cx_) / fx_, (p.v - cy_) / fy_};
    const Vec2 n = undistort_normalized(d);
    return Vec3(n.x(), n.y(), 1.0).normalized();
}

CameraModel intrinsics_from_fov(int width_px, int height_px, double diag_fov_deg) {
    if (width_px <= 0 || height_px <= 0) {
        throw DomainError("intrinsics_from_fov: dimensions must be positive");
    }
    if (!(diag_fov_deg > 0.0 && diag_fov_deg < 180.0)) {
        throw DomainError("intrinsics_from_fov: diagonal FOV must lie in (0, 180) degrees");
    }
    const double diag_px = std::hypot(static_cast<double>(width_px), static_cast<double>(height_px));
    const double f = (diag_px / 2.0) / std::tan(deg_to_rad(diag_fov_deg) / 2.0);
    return CameraModel(width_px, height_px, f, f, (width_px - 1) / 2.0, (height_px - 1) / 2.0);
}

CameraModel world_camera() { return intrinsics_from_fov(3264, 2448, 78.0); }

GazeSample GazeSample::make(double t, const Vec3& origin, const Vec3& direction) {
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n) || !origin.allFinite() || !std::isfinite(t)) {
        throw DomainError("GazeSample: direction must be a finite non-zero vector");
    }
    return GazeSample{t, origin, direction / n};
}

PixelPoint project_gaze(const CameraModel& model, const GazeSample& gaze, double fixation_depth) {
    if (std::isinf(fixation_depth) && fixation_depth > 0.0) {
        if (!(gaze.direction.z() > 0.0)) {
            throw BehindCameraError("project_gaze: direction does not point into the scene");
        }
        return model.project(gaze.direction);
    }
    if (!(fixation_depth > 0.0)) {
        throw DomainError("project_gaze: fixation depth must be positive");
    }
    if (gaze.direction.z() == 0.0) {
        throw BehindCameraError("project_gaze: ray parallel to the image plane");
    }
    const double s = (fixation_depth - gaze.origin.z()) / gaze.direction.z();
    if (!(s > 0.0)) {
        throw BehindCameraError("project_gaze: fixation point lies behind the eye");
    }
    return model.project(gaze.origin + s * gaze.direction);
}

double pixel_angle(const CameraModel& model, PixelPoint p, PixelPoint q) {
    if (p == q) {
        return 0.0;
    }
    const Vec3 a = model.back_project(p);
    const Vec3 b = model.back_project(q);
    return rad_to_deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

PlaneRegistration::PlaneRegistration(const Mat3& homography, double viewing_distance)
    : homography_(homography), viewing_distance_(viewing_distance) {
    if (!(viewing_distance > 0.0)) {
        throw DomainError("PlaneRegistration: viewing distance must be positive");
    }
    if (!homography.allFinite() || std::abs(homography.determinant()) <= 1e-12) {
        throw DegenerateConfigurationError("PlaneRegistration: homography is singular");
    }
    inverse_ = homography.inverse();
}

PlanePoint PlaneRegistration::to_plane(PixelPoint p) const {
    const Vec3 h = homography_ * Vec3(p.u, p.v, 1.0);
    return {h.x() / h.z(), h.y() / h.z()};
}

PixelPoint PlaneRegistration::to_image(PlanePoint p) const {
    const Vec3 h = inverse_ * Vec3(p.x, p.y, 1.0);
    return {h.x() / h.z(), h.y() / h.z()};
}

namespace {

void require_general_position(const std::array<Vec2, 4>& pts, const char* which) {
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            for (int k = j + 1; k < 4; ++k) {
                const Vec2 a = pts[j] - pts[i];
                const Vec2 b = pts[k] - pts[i];
                const double scale = std::max(a.squaredNorm(), b.squaredNorm());
                const double cross = std::abs(a.x() * b.y() - a.y() * b.x());
                if (scale == 0.0 || cross <= 1e-9 * scale) {
                    throw DegenerateConfigurationError(
                        std::string("register_plane: collinear or duplicated ") + which + " points");
                }
            }
        }
    }
}

// Similarity moving the centroid to the origin and the mean distance to sqrt(2).
Mat3 normalizing_transform(const std::array<Vec2, 4>& pts) {
    Vec2 centroid = Vec2::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= 4.0;
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= 4.0;
    const double s = std::sqrt(2.0) / mean_dist;
    Mat3 t;
    t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
    return t;
}

Vec2 apply(const Mat3& h, const Vec2& p) {
    const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
    return q.head<2>() / q.z();
}

}  // namespace

PlaneRegistration register_plane(const std::array<PixelPoint, 4>& marker_pixels,
                                 const std::array<PlanePoint, 4>& marker_plane,
                                 double viewing_distance) {
    std::array<Vec2, 4> src;
    std::array<Vec2, 4> dst;
    for (int i = 0; i < 4; ++i) {
        src[i] = {marker_pixels[i].u, marker_pixels[i].v};
        dst[i] = {marker_plane[i].x, marker_plane[i].y};
        if (!src[i].allFinite() || !dst[i].allFinite()) {
            throw DomainError("register_plane: non-finite correspondence");
        }
    }
    require_general_position(src, "image");
    require_general_position(dst, "plane");

    const Mat3 t_src = normalizing_transform(src);
    const Mat3 t_dst = normalizing_transform(dst);

    Eigen::Matrix<double, 8, 9> a = Eigen::Matrix<double, 8, 9>::Zero();
    for (int i = 0; i < 4; ++i) {
        const Vec2 p = apply(t_src, src[i]);
        const Vec2 q = apply(t_dst, dst[i]);
        a.row(2 * i) << -p.x(), -p.y(), -1, 0, 0, 0, q.x() * p.x(), q.x() * p.y(), q.x();
        a.row(2 * i + 1) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
    }
    Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
    const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);

    Mat3 hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    Mat3 homography = t_dst.inverse() * hn * t_src;
    homography /= homography.norm();
    if (homography(2, 2) < 0.0) {
        homography = -homography;
    }
    return PlaneRegistration(homography, viewing_distance);
}

double visual_angle(PlanePoint a, PlanePoint b, double viewing_distance) {
    if (!(viewing_distance > 0.0)) {
        throw DomainError("visual_angle: viewing distance must be positive");
    }
    if (a == b) {
        return 0.0;
    }
    const Vec3 ra(a.x, a.y, viewing_distance);
    const Vec3 rb(b.x, b.y, viewing_distance);
    return rad_to_deg(std::atan2(ra.cross(rb).norm(), ra.dot(rb)));
}

double selection_error(const PlaneRegistration& reg, PixelPoint selection_px, PlanePoint target) {
    return visual_angle(reg.to_plane(selection_px), target, reg.viewing_distance());
}

nlohmann::json to_json(const CameraModel& m) {
    return {{"width", m.width()}, {"height", m.height()}, {"fx", m.fx()}, {"fy", m.fy()},
            {"cx", m.cx()},       {"cy", m.cy()},         {"k1", m.k1()}, {"k2", m.k2()}};
}

CameraModel camera_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw SchemaError("camera", "expected an object");
    }
    auto number = [&](const char* key, bool required) -> double {
        if (!j.contains(key)) {
            if (required) throw SchemaError(std::string("camera.") + key, "missing");
            return 0.0;
        }
        if (!j.at(key).is_number()) {
            throw SchemaError(std::string("camera.") + key, "expected a number");
        }
        return j.at(key).get<double>();
    };
    auto integer = [&](const char* key) -> int {
        if (!j.contains(key) || !j.at(key).is_number_integer()) {
            throw SchemaError(std::string("camera.") + key, "expected an integer");
        }
        return j.at(key).get<int>();
    };
    try {
        return CameraModel(integer("width"), integer("height"), number("fx", true),
                           number("fy", true), number("cx", true), number("cy", true),
                           number("k1", false), number("k2", false));
    } catch (const DomainError& e) {
        throw SchemaError("camera", e.what());
    }
}

CameraModel load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingAssetError(path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("calibration", e.what());
    }
    return camera_from_json(j);
}

void save_calibration(const CameraModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_calibration: cannot open " + path.string());
    }
    out << to_json(model).dump(2) << '\n';
}

}  // namespace gazegpt::geometry
