#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gazegpt/clients.hpp"
#include "gazegpt/foveation.hpp"
#include "gazegpt/geometry.hpp"
#include "gazegpt/rng.hpp"
#include "gazegpt/scene.hpp"
#include "gazegpt/selection.hpp"
#include "gazegpt/stats.hpp"

namespace gazegpt::evalstats {

struct SelectionExperimentConfig {
    int grid = 5;
    double spacing_deg = 11.0;
    double cross_deg = 1.06;
    double viewing_distance = 1.0;
    int trials_per_mode = 25;  ///< must equal grid * grid: every location once per mode
    std::vector<double> delay_choices{2.0, 3.0, 4.0};
    int users = 12;
    geometry::CameraModel camera = geometry::world_camera();

    void validate() const;
};

struct ClassificationExperimentConfig {
    std::vector<std::string> breeds;  ///< empty means default_breeds()
    int test_set_size = 25;
    int grid = 9;
    double image_deg = 8.0;
    double vertical_gap_deg = 2.0;
    int center_grid = 5;
    double center_spacing_deg = 8.0;
    double viewing_distance = 1.0;
    int users = 12;
    foveation::CropSpec crop;
    geometry::CameraModel camera = geometry::world_camera();

    void validate() const;
    const std::vector<std::string>& labels() const;
};

nlohmann::json to_json(const SelectionExperimentConfig& c);
nlohmann::json to_json(const ClassificationExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
SelectionExperimentConfig selection_config_from_json(const nlohmann::json& j);
ClassificationExperimentConfig classification_config_from_json(const nlohmann::json& j);

struct TrialRecord {
    int user = 0;
    std::string mode;
    int order = 0;     ///< position within this user's session
    int location = 0;  ///< row-major target location
    int target_row = 0;
    int target_col = 0;
    geometry::PixelPoint target_px;
    geometry::PixelPoint selected_px;
    bool clamped = false;
    double delay_s = 0.0;
    double elapsed_s = 0.0;
    double error_deg = 0.0;
    std::string target_label;
    std::string predicted_label;  ///< empty when the backend produced no match
    int correct = -1;             ///< 0/1 for classification, -1 otherwise
};

struct TrialSet {
    std::string experiment;  ///< selection | classification
    std::uint64_t seed = 0;
    int users = 0;
    std::vector<std::string> modes;
    std::vector<TrialRecord> trials;
};

TrialSet run_selection_experiment(const SelectionExperimentConfig& config,
                                  const std::vector<selection::SelectionMode>& modes, std::uint64_t seed);

/// Answers a classification trial. Returns nullopt for "no usable answer".
class ClassificationBackend {
public:
    virtual ~ClassificationBackend() = default;
    /// Whether crops must carry pixels (otherwise only window geometry is computed).
    virtual bool needs_pixels() const { return false; }
    virtual std::optional<std::string> classify(const capture::SceneLayout& layout,
                                                const foveation::MultiscaleCrop& crop,
                                                std::span<const std::string> labels, Rng& rng) = 0;
};

class CoverageOracleBackend final : public ClassificationBackend {
public:
    explicit CoverageOracleBackend(double base_accuracy);
    std::optional<std::string> classify(const capture::SceneLayout& layout, const foveation::MultiscaleCrop& crop,
                                        std::span<const std::string> labels, Rng& rng) override;

private:
    double base_accuracy_;
};

/// Sends rendered crops to a vision model through the classification prompt. Ambiguous
/// or unmatched responses count as no answer.
class VisionModelBackend final : public ClassificationBackend {
public:
    VisionModelBackend(std::shared_ptr<pipeline::VisionModel> model, double timeout_s = 60.0);
    bool needs_pixels() const override { return true; }
    std::optional<std::string> classify(const capture::SceneLayout& layout, const foveation::MultiscaleCrop& crop,
                                        std::span<const std::string> labels, Rng& rng) override;

private:
    std::shared_ptr<pipeline::VisionModel> model_;
    double timeout_s_;
};

TrialSet run_classification_experiment(const ClassificationExperimentConfig& config,
                                       const std::vector<selection::SelectionMode>& modes,
                                       ClassificationBackend& backend, std::uint64_t seed);

void write_trials_csv(const TrialSet& trials, std::ostream& out);
std::string trials_csv(const TrialSet& trials);
/// Inverse of write_trials_csv.
TrialSet read_trials_csv(std::istream& in);

struct ModeSummary {
    std::string mode;
    double mean = 0.0;
    double se = 0.0;  ///< standard error across per-user means
    std::size_t users = 0;
};

struct OmnibusResult {
    std::string test;  ///< rm_anova | one_way_anova
    double statistic = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double p = 1.0;
    std::optional<double> epsilon;
    std::string correction;  ///< greenhouse_geisser | none
};

struct MetricReport {
    std::string metric;  ///< error_deg | time_s | accuracy
    std::vector<ModeSummary> modes;
    std::optional<OmnibusResult> omnibus;
    std::vector<PairwiseComparison> pairwise;
    std::string note;
};

struct StatsReport {
    std::string experiment;
    std::vector<MetricReport> metrics;

    const MetricReport& metric(std::string_view name) const;
};

/// users x modes matrix of per-user means of `metric`.
Matrix user_means(const TrialSet& trials, std::string_view metric);

/// Selection: error_deg and time_s, each with RM-ANOVA (GG) and Bonferroni paired t-tests.
/// Classification: accuracy with a between-groups one-way ANOVA and Bonferroni t-tests.
/// A single mode yields summaries only.
StatsReport report(const TrialSet& trials);

nlohmann::json to_json(const StatsReport& report);
/// metric,mode,mean,se,users
std::string summary_csv(const StatsReport& report);

}  // namespace gazegpt::evalstats
