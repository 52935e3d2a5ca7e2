#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gazegpt/geometry.hpp"
#include "gazegpt/rng.hpp"

namespace gazegpt::selection {

enum class ModeKind { gaze, head, body, phone };

std::string_view to_string(ModeKind kind) noexcept;
ModeKind mode_kind_from_string(std::string_view name);

/// Angular pointing error, all in degrees.
///
/// A selection lands at target + bias + jitter, where the bias has a uniform direction and
/// half-normal magnitude and the jitter is isotropic normal with per-axis sd `precision`.
/// The half-normal scale is solved so that the mean radial error of the sum equals
/// `accuracy`. `bias_spread` is the sd of a participant-level shift of `accuracy` applied by
/// the experiment harnesses (see participant_model).
struct ErrorModel {
    double accuracy = 0.0;
    double precision = 0.0;
    double bias_spread = 0.0;

    void validate() const;

    /// Scale of the half-normal bias magnitude. Throws DomainError when `accuracy` is below
    /// what jitter alone produces (precision * sqrt(pi / 2)).
    double bias_scale() const;

    /// Mean radial error the model produces for a given bias scale (Rice mean integrated
    /// over the half-normal bias).
    static double mean_radial_error(double bias_scale, double precision);

    /// Manufacturer rating of the eye tracker: 1 degree accuracy, 0.4 degree precision.
    static ErrorModel rated_eye_tracker() { return {1.0, 0.4, 0.0}; }
};

struct TimeModel {
    double mean_s = 1.0;
    double sd_s = 0.0;

    void validate() const;
};

struct SelectionMode {
    ModeKind kind = ModeKind::gaze;
    ErrorModel error;
    TimeModel time;
};

struct SelectionOutcome {
    geometry::PixelPoint selected_px;
    double elapsed = 0.0;
    ModeKind mode = ModeKind::gaze;
    /// The perturbed point left the frame and was clamped to its border.
    bool clamped = false;
};

/// Simulated selection of `target_px`, expressed in the scene camera's image. Gaze mode
/// projects the perturbed gaze ray; the camera-pointing modes land the camera center on the
/// perturbed direction, which is the same image point. Deterministic in `seed`.
SelectionOutcome select(const SelectionMode& mode, geometry::PixelPoint target_px,
                        const geometry::CameraModel& model, std::uint64_t seed);

/// Same as select() but drawing from a caller-owned stream.
SelectionOutcome select(const SelectionMode& mode, geometry::PixelPoint target_px,
                        const geometry::CameraModel& model, Rng& rng);

/// The mode as experienced by one simulated participant: accuracy shifted by
/// N(0, bias_spread^2), floored at the jitter-only error.
SelectionMode participant_model(const SelectionMode& mode, std::uint64_t seed);

/// Gaze, phone, head, body with error means 1.9/1.9/7.0/7.5 deg and time means
/// 0.8/2.5/1.1/1.5 s. Values are read from reported figure magnitudes and are approximate.
std::vector<SelectionMode> default_modes();

SelectionMode default_mode(ModeKind kind);

// {kind, accuracy_deg, precision_deg, bias_deg, time_mean_s, time_sd_s}
nlohmann::json to_json(const SelectionMode& mode);
SelectionMode mode_from_json(const nlohmann::json& j);
/// Accepts a single mode object or an array of them.
std::vector<SelectionMode> load_modes(const std::filesystem::path& path);

}  // namespace gazegpt::selection
