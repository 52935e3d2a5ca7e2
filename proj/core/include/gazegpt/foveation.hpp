#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gazegpt/geometry.hpp"
#include "gazegpt/image.hpp"

namespace gazegpt::foveation {

/// Geometric ladder of square crops: level i spans finest_fov * scale_factor^i degrees.
/// Only the widest level may exceed the frame; it then clamps to the largest square.
struct CropSpec {
    int levels = 3;
    double finest_fov = 9.0;
    double scale_factor = 3.0;
    int out_px = 512;

    void validate() const;
};

/// Integer source window [x, x + size) x [y, y + size).
struct Window {
    int x = 0;
    int y = 0;
    int size = 0;

    bool operator==(const Window&) const = default;
};

struct CropLevel {
    int level = 0;
    double fov = 0.0;           ///< angular width actually covered, degrees
    bool clamped = false;       ///< window was limited by the frame size
    Window window;
    int offset_x = 0;           ///< shift applied to keep the window inside the frame
    int offset_y = 0;
    Image image;                ///< out_px x out_px; empty for a geometry-only plan
};

/// Ordered narrow to wide.
struct MultiscaleCrop {
    geometry::PixelPoint center;
    std::vector<CropLevel> levels;

    std::size_t pixel_count() const noexcept;
};

/// Window geometry for every level without touching pixels.
MultiscaleCrop plan_crop(geometry::PixelPoint center, const geometry::CameraModel& model,
                         const CropSpec& spec);

/// plan_crop followed by area-average resampling of each window to out_px x out_px.
MultiscaleCrop multiscale_crop(const Image& frame, geometry::PixelPoint center,
                               const geometry::CameraModel& model, const CropSpec& spec);

/// Area-weighted box resampling of a square source window; works for up- and downscaling.
Image resample_area(const Image& src, const Window& window, int out_px);

struct BudgetReport {
    std::uint64_t full_pixels = 0;
    std::uint64_t crop_pixels = 0;
    double reduction = 0.0;
};

BudgetReport data_budget(const CropSpec& spec, int full_width, int full_height);

struct AcuityBudget {
    double width_px = 0.0;
    double height_px = 0.0;
    double megapixels = 0.0;
};

/// Sensor needed to hold `px_per_deg` over the gaze range plus a foveal margin on each side.
AcuityBudget acuity_budget(double gaze_range_h, double gaze_range_v, double fovea_margin,
                           double px_per_deg);

/// Side of the square covering +/- fovea_radius degrees at px_per_deg.
double foveal_window(double px_per_deg, double fovea_radius);

// {levels, finest_fov_deg, scale_factor, out_px}; missing keys keep their defaults.
nlohmann::json to_json(const CropSpec& spec);
CropSpec crop_spec_from_json(const nlohmann::json& j);

/// Sidecar metadata: {center: [u, v],
///   levels: [{level, fov_deg, clamped, window: [x, y, size], center_offset: [dx, dy], out_px}]}
nlohmann::json crop_metadata(const MultiscaleCrop& crop);

/// Writes level_<i>.png plus crops.json into `dir`.
void export_crops(const MultiscaleCrop& crop, const std::filesystem::path& dir);

}  // namespace gazegpt::foveation
