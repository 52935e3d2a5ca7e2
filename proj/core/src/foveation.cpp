#include "gazegpt/foveation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gazegpt/error.hpp"

namespace gazegpt::foveation {

using geometry::deg_to_rad;
using geometry::rad_to_deg;

void CropSpec::validate() const {
    if (levels < 1) throw DomainError("CropSpec: levels must be >= 1");
    if (!(finest_fov > 0.0)) throw DomainError("CropSpec: finest_fov must be positive");
    if (levels > 1 && !(scale_factor > 1.0)) throw DomainError("CropSpec: scale_factor must exceed 1");
    if (out_px <= 0) throw DomainError("CropSpec: out_px must be positive");
}

std::size_t MultiscaleCrop::pixel_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : levels) {
        n += static_cast<std::size_t>(l.image.width()) * static_cast<std::size_t>(l.image.height());
    }
    return n;
}

MultiscaleCrop plan_crop(geometry::PixelPoint center, const geometry::CameraModel& model,
                         const CropSpec& spec) {
    spec.validate();
    if (!model.contains(center) || !std::isfinite(center.u) || !std::isfinite(center.v)) {
        throw DomainError("multiscale_crop: center outside the frame");
    }
    const int max_side = std::min(model.width(), model.height());
    MultiscaleCrop crop;
    crop.center = center;
    for (int i = 0; i < spec.levels; ++i) {
        const double fov = spec.finest_fov * std::pow(spec.scale_factor, i);
        CropLevel level;
        level.level = i;
        long side = max_side;
        if (fov < 180.0) {
            side = std::lround(2.0 * model.fx() * std::tan(deg_to_rad(fov) / 2.0));
        }
        if (side >= max_side) {
            if (i != spec.levels - 1) {
                throw DomainError("CropSpec: level " + std::to_string(i) +
                                  " is wider than the frame; only the widest level may clamp");
            }
            side = max_side;
            level.clamped = true;
            level.fov = rad_to_deg(2.0 * std::atan(static_cast<double>(side) / (2.0 * model.fx())));
        } else {
            level.fov = fov;
        }
        side = std::max(side, 1L);
        const int size = static_cast<int>(side);
        // Window [x, x + size) has its continuous center at x + size / 2 - 0.5.
        const long ideal_x = std::lround(center.u + 0.5 - size / 2.0);
        const long ideal_y = std::lround(center.v + 0.5 - size / 2.0);
        const long x = std::clamp(ideal_x, 0L, static_cast<long>(model.width() - size));
        const long y = std::clamp(ideal_y, 0L, static_cast<long>(model.height() - size));
        level.window = {static_cast<int>(x), static_cast<int>(y), size};
        level.offset_x = static_cast<int>(x - ideal_x);
        level.offset_y = static_cast<int>(y - ideal_y);
        crop.levels.push_back(std::move(level));
    }
    return crop;
}

namespace {

struct Tap {
    int index;
    double weight;
};

// For each output cell o, the source cells overlapping [o*s, (o+1)*s) with normalized weights.
std::vector<std::vector<Tap>> box_taps(int src, int out) {
    const double s = static_cast<double>(src) / out;
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
        const double lo = o * s;
        const double hi = (o + 1) * s;
        const int first = static_cast<int>(std::floor(lo));
        const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
        for (int i = first; i <= last; ++i) {
            const double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            if (w > 0.0) taps[static_cast<std::size_t>(o)].push_back({i, w / s});
        }
    }
    return taps;
}

}  // namespace

Image resample_area(const Image& src, const Window& window, int out_px) {
    if (out_px <= 0 || window.size <= 0 || window.x < 0 || window.y < 0 ||
        window.x + window.size > src.width() || window.y + window.size > src.height()) {
        throw DomainError("resample_area: window outside the source image");
    }
    const auto taps = box_taps(window.size, out_px);
    const auto n = static_cast<std::size_t>(out_px);
    // Horizontal pass over every source row of the window.
    std::vector<double> rows(static_cast<std::size_t>(window.size) * n * 3, 0.0);
    for (int y = 0; y < window.size; ++y) {
        const std::uint8_t* line = src.pixel(window.x, window.y + y);
        double* dst = rows.data() + static_cast<std::size_t>(y) * n * 3;
        for (std::size_t o = 0; o < n; ++o) {
            double r = 0.0, g = 0.0, b = 0.0;
            for (const Tap& t : taps[o]) {
                const std::uint8_t* p = line + static_cast<std::size_t>(t.index) * 3;
                r += t.weight * p[0];
                g += t.weight * p[1];
                b += t.weight * p[2];
            }
            dst[o * 3] = r;
            dst[o * 3 + 1] = g;
            dst[o * 3 + 2] = b;
        }
    }
    Image out(out_px, out_px);
    std::vector<double> acc(n * 3);
    for (std::size_t oy = 0; oy < n; ++oy) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (const Tap& t : taps[oy]) {
            const double* row = rows.data() + static_cast<std::size_t>(t.index) * n * 3;
            for (std::size_t k = 0; k < n * 3; ++k) acc[k] += t.weight * row[k];
        }
        std::uint8_t* dst = out.pixel(0, static_cast<int>(oy));
        for (std::size_t k = 0; k < n * 3; ++k) {
            dst[k] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[k]), 0L, 255L));
        }
    }
    return out;
}

MultiscaleCrop multiscale_crop(const Image& frame, geometry::PixelPoint center,
                               const geometry::CameraModel& model, const CropSpec& spec) {
    if (frame.width() != model.width() || frame.height() != model.height()) {
        throw DomainError("multiscale_crop: frame size does not match the camera model");
    }
    MultiscaleCrop crop = plan_crop(center, model, spec);
    for (auto& level : crop.levels) {
        level.image = resample_area(frame, level.window, spec.out_px);
    }
    return crop;
}

BudgetReport data_budget(const CropSpec& spec, int full_width, int full_height) {
    spec.validate();
    if (full_width <= 0 || full_height <= 0) {
        throw DomainError("data_budget: frame dimensions must be positive");
    }
    BudgetReport r;
    r.full_pixels = static_cast<std::uint64_t>(full_width) * static_cast<std::uint64_t>(full_height);
    r.crop_pixels = static_cast<std::uint64_t>(spec.levels) * static_cast<std::uint64_t>(spec.out_px) *
                    static_cast<std::uint64_t>(spec.out_px);
    r.reduction = static_cast<double>(r.full_pixels) / static_cast<double>(r.crop_pixels);
    return r;
}

AcuityBudget acuity_budget(double gaze_range_h, double gaze_range_v, double fovea_margin,
                           double px_per_deg) {
    if (gaze_range_h < 0.0 || gaze_range_v < 0.0 || fovea_margin < 0.0 || !(px_per_deg > 0.0)) {
        throw DomainError("acuity_budget: inputs must be non-negative with positive px_per_deg");
    }
    AcuityBudget b;
    b.width_px = (gaze_range_h + 2.0 * fovea_margin) * px_per_deg;
    b.height_px = (gaze_range_v + 2.0 * fovea_margin) * px_per_deg;
    b.megapixels = b.width_px * b.height_px / 1e6;
    return b;
}

double foveal_window(double px_per_deg, double fovea_radius) {
    if (!(px_per_deg > 0.0) || fovea_radius < 0.0) {
        throw DomainError("foveal_window: px_per_deg must be positive and radius non-negative");
    }
    return 2.0 * fovea_radius * px_per_deg;
}

nlohmann::json to_json(const CropSpec& spec) {
    return {{"levels", spec.levels},
            {"finest_fov_deg", spec.finest_fov},
            {"scale_factor", spec.scale_factor},
            {"out_px", spec.out_px}};
}

CropSpec crop_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("crop", "expected an object");
    CropSpec spec;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "levels") spec.levels = value.get<int>();
            else if (key == "finest_fov_deg") spec.finest_fov = value.get<double>();
            else if (key == "scale_factor") spec.scale_factor = value.get<double>();
            else if (key == "out_px") spec.out_px = value.get<int>();
            else throw SchemaError("crop." + key, "unknown key");
        } catch (const nlohmann::json::exception&) {
            throw SchemaError("crop." + key, "wrong type");
        }
    }
    try {
        spec.validate();
    } catch (const DomainError& e) {
        throw SchemaError("crop", e.what());
    }
    return spec;
}

nlohmann::json crop_metadata(const MultiscaleCrop& crop) {
    auto levels = nlohmann::json::array();
    for (const auto& l : crop.levels) {
        levels.push_back({{"level", l.level},
                          {"fov_deg", l.fov},
                          {"clamped", l.clamped},
                          {"window", {l.window.x, l.window.y, l.window.size}},
                          {"center_offset", {l.offset_x, l.offset_y}},
                          {"out_px", l.image.width()}});
    }
    return {{"center", {crop.center.u, crop.center.v}}, {"levels", levels}};
}

void export_crops(const MultiscaleCrop& crop, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& l : crop.levels) {
        if (!l.image.empty()) {
            write_png(l.image, dir / ("level_" + std::to_string(l.level) + ".png"));
        }
    }
    std::ofstream out(dir / "crops.json");
    out << crop_metadata(crop).dump(2) << '\n';
}

}  // namespace gazegpt::foveation
