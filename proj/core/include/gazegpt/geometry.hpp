#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <limits>

#include <nlohmann/json_fwd.hpp>

namespace gazegpt::geometry {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Continuous image coordinates in pixels. Pixel (i, j) has its center at (i, j),
/// so the image spans [-0.5, width - 0.5] x [-0.5, height - 0.5].
struct PixelPoint {
    double u = 0.0;
    double v = 0.0;

    bool operator==(const PixelPoint&) const = default;
};

/// Point on the display plane in meters; y grows downward like image rows.
struct PlanePoint {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const PlanePoint&) const = default;
};

inline constexpr double kInfiniteDepth = std::numeric_limits<double>::infinity();

constexpr double deg_to_rad(double deg) noexcept { return deg * 0.017453292519943295769; }
constexpr double rad_to_deg(double rad) noexcept { return rad * 57.295779513082320877; }

/// Pinhole camera with two-coefficient radial distortion applied to normalized coordinates:
///   x_d = x (1 + k1 r^2 + k2 r^4)
class CameraModel {
public:
    /// Validates fx, fy > 0 and the principal point lying inside the image.
    CameraModel(int width_px, int height_px, double fx, double fy, double cx, double cy,
                double k1 = 0.0, double k2 = 0.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double fx() const noexcept { return fx_; }
    double fy() const noexcept { return fy_; }
    double cx() const noexcept { return cx_; }
    double cy() const noexcept { return cy_; }
    double k1() const noexcept { return k1_; }
    double k2() const noexcept { return k2_; }

    PixelPoint principal_point() const noexcept { return {cx_, cy_}; }
    bool contains(PixelPoint p) const noexcept;
    PixelPoint clamp(PixelPoint p) const noexcept;

    Vec2 distort_normalized(const Vec2& undistorted) const noexcept;
    /// Newton iteration; converges to ~1e-14 for moderate distortion.
    Vec2 undistort_normalized(const Vec2& distorted) const;

    /// Projects a camera-frame point (z > 0) to pixels, distortion included.
    PixelPoint project(const Vec3& point) const;
    /// Unit ray through a pixel, distortion removed.
    Vec3 back_project(PixelPoint p) const;

    bool operator==(const CameraModel&) const = default;

private:
    int width_;
    int height_;
    double fx_;
    double fy_;
    double cx_;
    double cy_;
    double k1_;
    double k2_;
};

/// Focal length from a diagonal field of view. The principal point is the image center
/// and the diagonal is measured between the outer pixel corners.
CameraModel intrinsics_from_fov(int width_px, int height_px, double diag_fov_deg);

/// Sony IMX179 world camera: 3264x2448 behind a 78 degree diagonal lens.
CameraModel world_camera();

/// Gaze ray in camera coordinates. `direction` is unit length.
struct GazeSample {
    double t = 0.0;
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();

    /// Normalizes `direction`; throws DomainError on a zero or non-finite vector.
    static GazeSample make(double t, const Vec3& origin, const Vec3& direction);
};

/// Projects the gaze ray at the point where it reaches camera depth `fixation_depth`
/// (meters). With kInfiniteDepth only the direction is projected.
PixelPoint project_gaze(const CameraModel& model, const GazeSample& gaze,
                        double fixation_depth = 1.0);

/// Angle in degrees between the undistorted rays through two pixels.
double pixel_angle(const CameraModel& model, PixelPoint p, PixelPoint q);

/// Homography from image pixels to display-plane meters.
class PlaneRegistration {
public:
    PlaneRegistration(const Mat3& homography, double viewing_distance);

    const Mat3& homography() const noexcept { return homography_; }
    double viewing_distance() const noexcept { return viewing_distance_; }

    PlanePoint to_plane(PixelPoint p) const;
    PixelPoint to_image(PlanePoint p) const;

private:
    Mat3 homography_;
    Mat3 inverse_;
    double viewing_distance_;
};

/// Four-point normalized DLT. Throws DegenerateConfigurationError when three of the
/// points on either side are collinear or two coincide.
PlaneRegistration register_plane(const std::array<PixelPoint, 4>& marker_pixels,
                                 const std::array<PlanePoint, 4>& marker_plane,
                                 double viewing_distance);

/// Visual angle in degrees between two display-plane points, seen from an eye on the
/// plane normal through the plane origin at `viewing_distance`.
double visual_angle(PlanePoint a, PlanePoint b, double viewing_distance);

/// Maps the selected pixel onto the display plane and returns its angular distance
/// from the target in degrees.
double selection_error(const PlaneRegistration& reg, PixelPoint selection_px, PlanePoint target);

// Calibration file: {width, height, fx, fy, cx, cy, k1, k2}
nlohmann::json to_json(const CameraModel& model);
CameraModel camera_from_json(const nlohmann::json& j);
CameraModel load_calibration(const std::filesystem::path& path);
void save_calibration(const CameraModel& model, const std::filesystem::path& path);

}  // namespace gazegpt::geometry
