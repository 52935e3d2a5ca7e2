#include "gazegpt/selection.hpp"

#include <Eigen/Geometry>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

#include <nlohmann/json.hpp>

#include "gazegpt/error.hpp"

namespace gazegpt::selection {

using geometry::deg_to_rad;
using geometry::PixelPoint;
using geometry::Vec3;

std::string_view to_string(ModeKind kind) noexcept {
    switch (kind) {
        case ModeKind::gaze: return "gaze";
        case ModeKind::head: return "head";
        case ModeKind::body: return "body";
        case ModeKind::phone: return "phone";
    }
    return "unknown";
}

ModeKind mode_kind_from_string(std::string_view name) {
    if (name == "gaze") return ModeKind::gaze;
    if (name == "head") return ModeKind::head;
    if (name == "body") return ModeKind::body;
    if (name == "phone") return ModeKind::phone;
    throw DomainError("unknown selection mode '" + std::string(name) + "'");
}

void ErrorModel::validate() const {
    if (!(accuracy >= 0.0) || !(precision >= 0.0) || !(bias_spread >= 0.0)) {
        throw DomainError("ErrorModel: accuracy, precision and bias spread must be non-negative");
    }
}

void TimeModel::validate() const {
    if (!(mean_s > 0.0) || !(sd_s >= 0.0)) {
        throw DomainError("TimeModel: mean must be positive and sd non-negative");
    }
}

namespace {

// exp(-a) * I_n(a), switching to the large-argument expansion before I_n overflows.
double scaled_bessel_i(int n, double a) {
    if (a < 500.0) {
        return std::exp(-a) * boost::math::cyl_bessel_i(n, a);
    }
    const double mu = 4.0 * n * n;
    const double z = 8.0 * a;
    const double series = 1.0 - (mu - 1.0) / z + (mu - 1.0) * (mu - 9.0) / (2.0 * z * z) -
                          (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (6.0 * z * z * z);
    return series / std::sqrt(2.0 * std::numbers::pi * a);
}

// Mean of the Rice distribution with offset nu and per-axis sd sigma.
double rice_mean(double nu, double sigma) {
    if (sigma == 0.0) return nu;
    const double a = nu * nu / (4.0 * sigma * sigma);
    const double laguerre = (1.0 + 2.0 * a) * scaled_bessel_i(0, a) + 2.0 * a * scaled_bessel_i(1, a);
    return sigma * std::sqrt(std::numbers::pi / 2.0) * laguerre;
}

}  // namespace

double ErrorModel::mean_radial_error(double bias_scale, double precision) {
    if (bias_scale == 0.0) return rice_mean(0.0, precision);
    if (precision == 0.0) return bias_scale * std::sqrt(2.0 / std::numbers::pi);
    // E over r ~ HalfNormal(bias_scale); substitute r = bias_scale * z.
    auto integrand = [&](double z) {
        return rice_mean(bias_scale * z, precision) * std::sqrt(2.0 / std::numbers::pi) *
               std::exp(-0.5 * z * z);
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 12.0, 10, 1e-13);
}

double ErrorModel::bias_scale() const {
    validate();
    if (precision == 0.0) return accuracy * std::sqrt(std::numbers::pi / 2.0);

    static std::mutex mutex;
    static std::map<std::pair<double, double>, double> cache;
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find({accuracy, precision}); it != cache.end()) return it->second;
    }
    const double floor = mean_radial_error(0.0, precision);
    double scale = 0.0;
    if (std::abs(accuracy - floor) <= 1e-12 * std::max(1.0, accuracy)) {
        scale = 0.0;
    } else if (accuracy < floor) {
        throw DomainError("ErrorModel: accuracy " + std::to_string(accuracy) +
                          " is below the jitter-only error " + std::to_string(floor));
    } else {
        auto f = [&](double s) { return mean_radial_error(s, precision) - accuracy; };
        // E|bias + jitter| >= E|bias| = s sqrt(2/pi), so this upper bound brackets the root.
        const double hi = accuracy * std::sqrt(std::numbers::pi / 2.0);
        std::uintmax_t iters = 200;
        const auto [lo_s, hi_s] = boost::math::tools::toms748_solve(
            f, 0.0, hi, f(0.0), f(hi), boost::math::tools::eps_tolerance<double>(48), iters);
        scale = 0.5 * (lo_s + hi_s);
    }
    std::lock_guard lock(mutex);
    cache[{accuracy, precision}] = scale;
    return scale;
}

namespace {

// Rotates `ray` by `angle` radians toward direction `psi` measured in the image plane.
Vec3 deflect(const Vec3& ray, double angle, double psi) {
    Vec3 eu = Vec3::UnitX() - ray * ray.x();
    if (eu.norm() < 1e-9) eu = Vec3::UnitY() - ray * ray.y();
    eu.normalize();
    const Vec3 ev = ray.cross(eu).normalized();
    return (std::cos(angle) * ray + std::sin(angle) * (std::cos(psi) * eu + std::sin(psi) * ev)).normalized();
}

}  // namespace

SelectionOutcome select(const SelectionMode& mode, PixelPoint target_px,
                        const geometry::CameraModel& model, Rng& rng) {
    mode.error.validate();
    mode.time.validate();
    if (!model.contains(target_px)) {
        throw DomainError("select: target outside the frame");
    }
    boost::random::normal_distribution<double> unit_normal(0.0, 1.0);
    boost::random::uniform_real_distribution<double> unit_angle(0.0, 2.0 * std::numbers::pi);

    const double scale = mode.error.bias_scale();
    const double bias = std::abs(unit_normal(rng)) * scale;
    const double bias_dir = unit_angle(rng);
    const double jx = unit_normal(rng) * mode.error.precision;
    const double jy = unit_normal(rng) * mode.error.precision;
    const double ex = bias * std::cos(bias_dir) + jx;
    const double ey = bias * std::sin(bias_dir) + jy;

    double elapsed = 0.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double t = mode.time.mean_s + mode.time.sd_s * unit_normal(rng);
        if (t >= 0.0) {
            elapsed = t;
            break;
        }
    }

    SelectionOutcome out;
    out.mode = mode.kind;
    out.elapsed = elapsed;
    const double magnitude = std::hypot(ex, ey);
    if (magnitude == 0.0) {
        out.selected_px = target_px;
        return out;
    }
    const Vec3 ray = deflect(model.back_project(target_px), deg_to_rad(magnitude), std::atan2(ey, ex));
    PixelPoint selected;
    if (ray.z() <= 1e-6) {
        out.clamped = true;
        selected = model.clamp({model.cx() + ray.x() * 1e9, model.cy() + ray.y() * 1e9});
    } else if (mode.kind == ModeKind::gaze) {
        const auto gaze = geometry::GazeSample::make(0.0, Vec3::Zero(), ray);
        selected = geometry::project_gaze(model, gaze, geometry::kInfiniteDepth);
    } else {
        selected = model.project(ray);
    }
    if (!model.contains(selected)) {
        out.clamped = true;
        selected = model.clamp(selected);
    }
    out.selected_px = selected;
    return out;
}

SelectionOutcome select(const SelectionMode& mode, PixelPoint target_px,
                        const geometry::CameraModel& model, std::uint64_t seed) {
    Rng rng(seed);
    return select(mode, target_px, model, rng);
}

SelectionMode participant_model(const SelectionMode& mode, std::uint64_t seed) {
    mode.error.validate();
    SelectionMode out = mode;
    if (mode.error.bias_spread == 0.0) return out;
    Rng rng(seed);
    boost::random::normal_distribution<double> shift(0.0, mode.error.bias_spread);
    const double floor = ErrorModel::mean_radial_error(0.0, mode.error.precision);
    out.error.accuracy = std::max(floor, mode.error.accuracy + shift(rng));
    return out;
}

SelectionMode default_mode(ModeKind kind) {
    switch (kind) {
        case ModeKind::gaze: return {kind, {1.9, 0.4, 0.3}, {0.8, 0.2}};
        case ModeKind::phone: return {kind, {1.9, 0.3, 0.4}, {2.5, 0.5}};
        case ModeKind::head: return {kind, {7.0, 1.0, 1.5}, {1.1, 0.3}};
        case ModeKind::body: return {kind, {7.5, 1.0, 1.5}, {1.5, 0.35}};
    }
    throw DomainError("default_mode: unknown kind");
}

std::vector<SelectionMode> default_modes() {
    return {default_mode(ModeKind::gaze), default_mode(ModeKind::phone), default_mode(ModeKind::head),
            default_mode(ModeKind::body)};
}

nlohmann::json to_json(const SelectionMode& m) {
    return {{"kind", std::string(to_string(m.kind))},
            {"accuracy_deg", m.error.accuracy},
            {"precision_deg", m.error.precision},
            {"bias_deg", m.error.bias_spread},
            {"time_mean_s", m.time.mean_s},
            {"time_sd_s", m.time.sd_s}};
}

SelectionMode mode_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw SchemaError("kind", "expected a mode name");
    }
    SelectionMode m = default_mode(mode_kind_from_string(j.at("kind").get<std::string>()));
    auto read = [&](const char* key, double& dst) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number()) throw SchemaError(key, "expected a number");
        dst = j.at(key).get<double>();
    };
    read("accuracy_deg", m.error.accuracy);
    read("precision_deg", m.error.precision);
    read("bias_deg", m.error.bias_spread);
    read("time_mean_s", m.time.mean_s);
    read("time_sd_s", m.time.sd_s);
    try {
        m.error.validate();
        m.time.validate();
    } catch (const DomainError& e) {
        throw SchemaError(std::string(to_string(m.kind)), e.what());
    }
    return m;
}

std::vector<SelectionMode> load_modes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingAssetError(path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("modes", e.what());
    }
    std::vector<SelectionMode> modes;
    if (j.is_array()) {
        for (const auto& m : j) modes.push_back(mode_from_json(m));
    } else {
        modes.push_back(mode_from_json(j));
    }
    return modes;
}

}  // namespace gazegpt::selection
