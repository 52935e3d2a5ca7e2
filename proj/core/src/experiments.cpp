#include "gazegpt/experiments.hpp"

#include <boost/random/uniform_int_distribution.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gazegpt/breeds.hpp"
#include "gazegpt/error.hpp"
#include "gazegpt/oracle.hpp"
#include "gazegpt/pipeline.hpp"

namespace gazegpt::evalstats {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kModeOrder = 1;
constexpr std::uint64_t kParticipant = 2;
constexpr std::uint64_t kTrialOrder = 3;
constexpr std::uint64_t kTrial = 4;
constexpr std::uint64_t kTestSet = 5;
constexpr std::uint64_t kTargetOrder = 6;
constexpr std::uint64_t kRender = 7;

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(v[i - 1], v[pick(rng)]);
    }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    shuffle(idx, rng);
    return idx;
}

std::vector<std::string> mode_names(const std::vector<selection::SelectionMode>& modes) {
    if (modes.empty()) throw DomainError("experiment: at least one mode is required");
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (const auto& m : modes) {
        m.error.validate();
        m.time.validate();
        std::string name(selection::to_string(m.kind));
        if (!seen.insert(name).second) throw DomainError("experiment: duplicate mode " + name);
        names.push_back(std::move(name));
    }
    return names;
}

bool csv_safe(const std::string& s) {
    return s.find_first_of(",\"\n\r") == std::string::npos;
}

}  // namespace

void SelectionExperimentConfig::validate() const {
    if (grid < 1) throw DomainError("selection config: grid must be >= 1");
    if (trials_per_mode != grid * grid) {
        throw DomainError("selection config: trials_per_mode must equal grid * grid");
    }
    if (!(spacing_deg > 0.0) || !(cross_deg > 0.0) || !(viewing_distance > 0.0)) {
        throw DomainError("selection config: spacing, cross size and viewing distance must be positive");
    }
    if (delay_choices.empty()) throw DomainError("selection config: delay_choices is empty");
    for (double d : delay_choices) {
        if (!(d >= 0.0)) throw DomainError("selection config: delays must be non-negative");
    }
    if (users < 1) throw DomainError("selection config: users must be >= 1");
}

void ClassificationExperimentConfig::validate() const {
    const auto& all = labels();
    if (grid < 1 || grid % 2 == 0) throw DomainError("classification config: grid must be odd and >= 1");
    if (static_cast<int>(all.size()) < grid * grid) {
        throw DomainError("classification config: need at least grid * grid labels");
    }
    std::set<std::string> unique(all.begin(), all.end());
    if (unique.size() != all.size()) throw DomainError("classification config: duplicate labels");
    for (const auto& l : all) {
        if (l.empty() || !csv_safe(l)) throw DomainError("classification config: bad label '" + l + "'");
    }
    if (center_grid < 1 || center_grid % 2 == 0) {
        throw DomainError("classification config: center_grid must be odd and >= 1");
    }
    if (test_set_size != center_grid * center_grid) {
        throw DomainError("classification config: test_set_size must equal center_grid * center_grid");
    }
    if (test_set_size > static_cast<int>(all.size())) {
        throw DomainError("classification config: test set larger than the label set");
    }
    if (!(image_deg > 0.0) || !(vertical_gap_deg >= 0.0) || !(center_spacing_deg >= 0.0) ||
        !(viewing_distance > 0.0)) {
        throw DomainError("classification config: bad scene dimensions");
    }
    if (users < 1) throw DomainError("classification config: users must be >= 1");
    crop.validate();
}

const std::vector<std::string>& ClassificationExperimentConfig::labels() const {
    return breeds.empty() ? default_breeds() : breeds;
}

nlohmann::json to_json(const SelectionExperimentConfig& c) {
    return {{"grid", c.grid},
            {"spacing_deg", c.spacing_deg},
            {"cross_deg", c.cross_deg},
            {"viewing_distance_m", c.viewing_distance},
            {"trials_per_mode", c.trials_per_mode},
            {"delay_choices_s", c.delay_choices},
            {"users", c.users},
            {"camera", geometry::to_json(c.camera)}};
}

nlohmann::json to_json(const ClassificationExperimentConfig& c) {
    return {{"breeds", c.labels()},
            {"test_set_size", c.test_set_size},
            {"grid", c.grid},
            {"image_deg", c.image_deg},
            {"vertical_gap_deg", c.vertical_gap_deg},
            {"center_grid", c.center_grid},
            {"center_spacing_deg", c.center_spacing_deg},
            {"viewing_distance_m", c.viewing_distance},
            {"users", c.users},
            {"crop", foveation::to_json(c.crop)},
            {"camera", geometry::to_json(c.camera)}};
}

SelectionExperimentConfig selection_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("selection", "expected an object");
    SelectionExperimentConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "grid") c.grid = v.get<int>();
            else if (key == "spacing_deg") c.spacing_deg = v.get<double>();
            else if (key == "cross_deg") c.cross_deg = v.get<double>();
            else if (key == "viewing_distance_m") c.viewing_distance = v.get<double>();
            else if (key == "trials_per_mode") c.trials_per_mode = v.get<int>();
            else if (key == "delay_choices_s") c.delay_choices = v.get<std::vector<double>>();
            else if (key == "users") c.users = v.get<int>();
            else if (key == "camera") c.camera = geometry::camera_from_json(v);
            else throw SchemaError(key, "unknown key");
        } catch (const nlohmann::json::exception&) {
            throw SchemaError(key, "wrong type");
        }
    }
    if (!j.contains("trials_per_mode")) c.trials_per_mode = c.grid * c.grid;
    try {
        c.validate();
    } catch (const DomainError& e) {
        throw SchemaError("selection", e.what());
    }
    return c;
}

ClassificationExperimentConfig classification_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("classification", "expected an object");
    ClassificationExperimentConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "breeds") c.breeds = v.get<std::vector<std::string>>();
            else if (key == "breeds_file") c.breeds = load_labels(v.get<std::string>());
            else if (key == "test_set_size") c.test_set_size = v.get<int>();
            else if (key == "grid") c.grid = v.get<int>();
            else if (key == "image_deg") c.image_deg = v.get<double>();
            else if (key == "vertical_gap_deg") c.vertical_gap_deg = v.get<double>();
            else if (key == "center_grid") c.center_grid = v.get<int>();
            else if (key == "center_spacing_deg") c.center_spacing_deg = v.get<double>();
            else if (key == "viewing_distance_m") c.viewing_distance = v.get<double>();
            else if (key == "users") c.users = v.get<int>();
            else if (key == "crop") c.crop = foveation::crop_spec_from_json(v);
            else if (key == "camera") c.camera = geometry::camera_from_json(v);
            else throw SchemaError(key, "unknown key");
        } catch (const nlohmann::json::exception&) {
            throw SchemaError(key, "wrong type");
        }
    }
    if (!j.contains("test_set_size")) c.test_set_size = c.center_grid * c.center_grid;
    try {
        c.validate();
    } catch (const DomainError& e) {
        throw SchemaError("classification", e.what());
    }
    return c;
}

TrialSet run_selection_experiment(const SelectionExperimentConfig& config,
                                  const std::vector<selection::SelectionMode>& modes, std::uint64_t seed) {
    config.validate();
    TrialSet out;
    out.experiment = "selection";
    out.seed = seed;
    out.users = config.users;
    out.modes = mode_names(modes);

    const int locations = config.grid * config.grid;
    std::vector<capture::SceneLayout> layouts;
    layouts.reserve(static_cast<std::size_t>(locations));
    for (int i = 0; i < locations; ++i) {
        capture::CrossGridScene scene;
        scene.grid = config.grid;
        scene.spacing_deg = config.spacing_deg;
        scene.cross_deg = config.cross_deg;
        scene.viewing_distance = config.viewing_distance;
        scene.active = i;
        layouts.push_back(capture::layout_scene(scene, config.camera));
    }
    const auto registration = geometry::register_plane(layouts.front().marker_pixels(),
                                                       layouts.front().marker_plane(), config.viewing_distance);

    for (int u = 0; u < config.users; ++u) {
        const auto uu = static_cast<std::uint64_t>(u);
        int order = 0;
        for (std::size_t mi : shuffled_indices(modes.size(), derive_seed(seed, {kModeOrder, uu}))) {
            const auto participant = selection::participant_model(modes[mi], derive_seed(seed, {kParticipant, uu, mi}));
            const auto trial_order =
                shuffled_indices(static_cast<std::size_t>(locations), derive_seed(seed, {kTrialOrder, uu, mi}));
            for (std::size_t loc : trial_order) {
                const auto& layout = layouts[loc];
                Rng rng(derive_seed(seed, {kTrial, uu, mi, loc}));
                boost::random::uniform_int_distribution<std::size_t> pick(0, config.delay_choices.size() - 1);
                TrialRecord r;
                r.user = u;
                r.mode = out.modes[mi];
                r.order = order++;
                r.location = static_cast<int>(loc);
                r.target_row = static_cast<int>(loc) / config.grid;
                r.target_col = static_cast<int>(loc) % config.grid;
                r.target_px = *layout.target_px;
                r.delay_s = config.delay_choices[pick(rng)];
                const auto outcome = selection::select(participant, r.target_px, config.camera, rng);
                r.selected_px = outcome.selected_px;
                r.clamped = outcome.clamped;
                r.elapsed_s = outcome.elapsed;
                r.error_deg = geometry::selection_error(registration, outcome.selected_px, *layout.target_plane);
                out.trials.push_back(std::move(r));
            }
        }
    }
    return out;
}

CoverageOracleBackend::CoverageOracleBackend(double base_accuracy) : base_accuracy_(base_accuracy) {
    if (!(base_accuracy >= 0.0 && base_accuracy <= 1.0)) {
        throw DomainError("CoverageOracleBackend: base_accuracy must lie in [0, 1]");
    }
}

std::optional<std::string> CoverageOracleBackend::classify(const capture::SceneLayout& layout,
                                                           const foveation::MultiscaleCrop& crop,
                                                           std::span<const std::string>, Rng& rng) {
    return coverage_oracle(layout, crop, base_accuracy_, rng);
}

VisionModelBackend::VisionModelBackend(std::shared_ptr<pipeline::VisionModel> model, double timeout_s)
    : model_(std::move(model)), timeout_s_(timeout_s) {
    if (!model_) throw DomainError("VisionModelBackend: model is null");
}

std::optional<std::string> VisionModelBackend::classify(const capture::SceneLayout&,
                                                        const foveation::MultiscaleCrop& crop,
                                                        std::span<const std::string> labels, Rng&) {
    pipeline::CallContext ctx;
    ctx.timeout_s = timeout_s_;
    try {
        return pipeline::classify_query(crop, labels, *model_, ctx).label;
    } catch (const pipeline::AmbiguousResponseError&) {
        return std::nullopt;
    }
}

TrialSet run_classification_experiment(const ClassificationExperimentConfig& config,
                                       const std::vector<selection::SelectionMode>& modes,
                                       ClassificationBackend& backend, std::uint64_t seed) {
    config.validate();
    TrialSet out;
    out.experiment = "classification";
    out.seed = seed;
    out.users = config.users;
    out.modes = mode_names(modes);

    const auto& labels = config.labels();
    std::vector<std::string> test_set = labels;
    {
        Rng rng(derive_seed(seed, {kTestSet}));
        shuffle(test_set, rng);
        test_set.resize(static_cast<std::size_t>(config.test_set_size));
    }
    const int half = config.center_grid / 2;
    const int cells = config.grid * config.grid;
    const int center_cell = (config.grid / 2) * config.grid + config.grid / 2;
    const auto n_targets = static_cast<std::size_t>(config.test_set_size);

    for (int u = 0; u < config.users; ++u) {
        const auto uu = static_cast<std::uint64_t>(u);
        int order = 0;
        for (std::size_t mi : shuffled_indices(modes.size(), derive_seed(seed, {kModeOrder, uu}))) {
            const auto participant = selection::participant_model(modes[mi], derive_seed(seed, {kParticipant, uu, mi}));
            const auto positions = shuffled_indices(n_targets, derive_seed(seed, {kTrialOrder, uu, mi}));
            const auto targets = shuffled_indices(n_targets, derive_seed(seed, {kTargetOrder, uu, mi}));
            for (std::size_t t = 0; t < n_targets; ++t) {
                const std::size_t loc = positions[t];
                const std::string& target = test_set[targets[t]];
                Rng rng(derive_seed(seed, {kTrial, uu, mi, loc}));

                std::vector<std::string> others;
                others.reserve(labels.size());
                for (const auto& l : labels) {
                    if (l != target) others.push_back(l);
                }
                shuffle(others, rng);
                capture::DogGridScene scene;
                scene.grid = config.grid;
                scene.image_deg = config.image_deg;
                scene.vertical_gap_deg = config.vertical_gap_deg;
                scene.viewing_distance = config.viewing_distance;
                scene.center_spacing_deg = config.center_spacing_deg;
                scene.center_row = static_cast<int>(loc) / config.center_grid - half;
                scene.center_col = static_cast<int>(loc) % config.center_grid - half;
                scene.labels.reserve(static_cast<std::size_t>(cells));
                for (int c = 0, o = 0; c < cells; ++c) {
                    scene.labels.push_back(c == center_cell ? target : others[static_cast<std::size_t>(o++)]);
                }
                const auto layout = capture::layout_scene(scene, config.camera);

                TrialRecord r;
                r.user = u;
                r.mode = out.modes[mi];
                r.order = order++;
                r.location = static_cast<int>(loc);
                r.target_row = scene.center_row;
                r.target_col = scene.center_col;
                r.target_px = *layout.target_px;
                r.target_label = target;
                const auto outcome = selection::select(participant, r.target_px, config.camera, rng);
                r.selected_px = outcome.selected_px;
                r.clamped = outcome.clamped;
                r.elapsed_s = outcome.elapsed;
                r.error_deg = geometry::pixel_angle(config.camera, r.target_px, r.selected_px);

                foveation::MultiscaleCrop crop;
                if (backend.needs_pixels()) {
                    const auto frame = capture::render_scene(scene, layout, config.camera,
                                                             derive_seed(seed, {kRender, uu, mi, loc}));
                    crop = foveation::multiscale_crop(frame, r.selected_px, config.camera, config.crop);
                } else {
                    crop = foveation::plan_crop(r.selected_px, config.camera, config.crop);
                }
                const auto predicted = backend.classify(layout, crop, labels, rng);
                r.predicted_label = predicted.value_or("");
                r.correct = (predicted && *predicted == target) ? 1 : 0;
                out.trials.push_back(std::move(r));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr const char* kCsvHeader =
    "user,mode,order,location,target_row,target_col,target_u,target_v,selected_u,selected_v,"
    "clamped,delay_s,elapsed_s,error_deg,target_label,predicted_label,correct";

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(const std::string& s, const char* field) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw SchemaError(field, "not a number: '" + s + "'");
    }
    return v;
}

}  // namespace

void write_trials_csv(const TrialSet& trials, std::ostream& out) {
    std::string modes;
    for (std::size_t i = 0; i < trials.modes.size(); ++i) {
        if (i) modes += ';';
        modes += trials.modes[i];
    }
    out << "# experiment=" << trials.experiment << " seed=" << trials.seed << " users=" << trials.users
        << " modes=" << modes << '\n';
    out << kCsvHeader << '\n';
    for (const auto& r : trials.trials) {
        if (!csv_safe(r.target_label) || !csv_safe(r.predicted_label) || !csv_safe(r.mode)) {
            throw DomainError("write_trials_csv: field contains a separator");
        }
        out << r.user << ',' << r.mode << ',' << r.order << ',' << r.location << ',' << r.target_row << ','
            << r.target_col << ',' << num(r.target_px.u) << ',' << num(r.target_px.v) << ','
            << num(r.selected_px.u) << ',' << num(r.selected_px.v) << ',' << (r.clamped ? 1 : 0) << ','
            << num(r.delay_s) << ',' << num(r.elapsed_s) << ',' << num(r.error_deg) << ',' << r.target_label
            << ',' << r.predicted_label << ',' << r.correct << '\n';
    }
}

std::string trials_csv(const TrialSet& trials) {
    std::ostringstream out;
    write_trials_csv(trials, out);
    return out.str();
}

TrialSet read_trials_csv(std::istream& in) {
    TrialSet set;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw SchemaError("header", "missing '# experiment=...' line");
    }
    for (const auto& kv : split(line.substr(2), ' ')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq);
        const auto value = kv.substr(eq + 1);
        if (key == "experiment") set.experiment = value;
        else if (key == "seed") set.seed = parse_number<std::uint64_t>(value, "seed");
        else if (key == "users") set.users = parse_number<int>(value, "users");
        else if (key == "modes" && !value.empty()) set.modes = split(value, ';');
    }
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw SchemaError("header", "unexpected column header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 17) throw SchemaError("row", "expected 17 fields, got " + std::to_string(f.size()));
        TrialRecord r;
        r.user = parse_number<int>(f[0], "user");
        r.mode = f[1];
        r.order = parse_number<int>(f[2], "order");
        r.location = parse_number<int>(f[3], "location");
        r.target_row = parse_number<int>(f[4], "target_row");
        r.target_col = parse_number<int>(f[5], "target_col");
        r.target_px = {parse_number<double>(f[6], "target_u"), parse_number<double>(f[7], "target_v")};
        r.selected_px = {parse_number<double>(f[8], "selected_u"), parse_number<double>(f[9], "selected_v")};
        r.clamped = f[10] == "1";
        r.delay_s = parse_number<double>(f[11], "delay_s");
        r.elapsed_s = parse_number<double>(f[12], "elapsed_s");
        r.error_deg = parse_number<double>(f[13], "error_deg");
        r.target_label = f[14];
        r.predicted_label = f[15];
        r.correct = parse_number<int>(f[16], "correct");
        set.trials.push_back(std::move(r));
    }
    return set;
}

// ---------------------------------------------------------------------------
// Reports

const MetricReport& StatsReport::metric(std::string_view name) const {
    for (const auto& m : metrics) {
        if (m.metric == name) return m;
    }
    throw DomainError("StatsReport: no metric " + std::string(name));
}

Matrix user_means(const TrialSet& trials, std::string_view metric) {
    double TrialRecord::*field = nullptr;
    if (metric == "error_deg") field = &TrialRecord::error_deg;
    else if (metric == "time_s") field = &TrialRecord::elapsed_s;
    else if (metric != "accuracy") throw DomainError("user_means: unknown metric " + std::string(metric));

    std::map<std::string, Eigen::Index> col;
    for (std::size_t i = 0; i < trials.modes.size(); ++i) col[trials.modes[i]] = static_cast<Eigen::Index>(i);
    Matrix sum = Matrix::Zero(trials.users, static_cast<Eigen::Index>(trials.modes.size()));
    Matrix count = Matrix::Zero(sum.rows(), sum.cols());
    for (const auto& r : trials.trials) {
        const auto it = col.find(r.mode);
        if (it == col.end() || r.user < 0 || r.user >= trials.users) {
            throw DomainError("user_means: trial outside the declared users/modes");
        }
        double v = 0.0;
        if (field != nullptr) {
            v = r.*field;
        } else {
            if (r.correct < 0) throw DomainError("user_means: accuracy needs classification trials");
            v = r.correct;
        }
        sum(r.user, it->second) += v;
        count(r.user, it->second) += 1.0;
    }
    if ((count.array() == 0.0).any()) {
        throw DomainError("user_means: incomplete trialset (a user/mode cell has no trials)");
    }
    return sum.array() / count.array();
}

namespace {

MetricReport metric_report(const TrialSet& trials, const std::string& metric, bool repeated) {
    MetricReport rep;
    rep.metric = metric;
    const Matrix m = user_means(trials, metric);
    const auto n = static_cast<double>(m.rows());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        ModeSummary s;
        s.mode = trials.modes[static_cast<std::size_t>(j)];
        s.users = static_cast<std::size_t>(m.rows());
        s.mean = m.col(j).mean();
        if (m.rows() > 1) {
            const double var = (m.col(j).array() - s.mean).square().sum() / (n - 1.0);
            s.se = std::sqrt(var / n);
        }
        rep.modes.push_back(s);
    }
    if (m.cols() < 2) {
        rep.note = "single mode: no tests";
        return rep;
    }
    try {
        if (repeated) {
            const auto a = rm_anova_gg(m);
            rep.omnibus = OmnibusResult{"rm_anova", a.f, a.df_conditions_gg, a.df_error_gg, a.p, a.epsilon,
                                        "greenhouse_geisser"};
        } else {
            const auto a = one_way_anova(m);
            rep.omnibus = OmnibusResult{"one_way_anova", a.f, a.df_between, a.df_within, a.p, std::nullopt, "none"};
        }
    } catch (const DegenerateDataError& e) {
        rep.note = e.what();
    } catch (const DomainError& e) {
        rep.note = e.what();
    }
    if (m.rows() >= 2) rep.pairwise = pairwise_tests(m, trials.modes);
    return rep;
}

}  // namespace

StatsReport report(const TrialSet& trials) {
    StatsReport rep;
    rep.experiment = trials.experiment;
    if (trials.experiment == "selection") {
        rep.metrics.push_back(metric_report(trials, "error_deg", true));
        rep.metrics.push_back(metric_report(trials, "time_s", true));
    } else if (trials.experiment == "classification") {
        rep.metrics.push_back(metric_report(trials, "accuracy", false));
    } else {
        throw DomainError("report: unknown experiment '" + trials.experiment + "'");
    }
    return rep;
}

nlohmann::json to_json(const StatsReport& report) {
    auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& m : report.metrics) {
        nlohmann::json modes = nlohmann::json::array();
        for (const auto& s : m.modes) {
            modes.push_back({{"mode", s.mode}, {"mean", s.mean}, {"se", s.se}, {"users", s.users}});
        }
        nlohmann::json omnibus = nullptr;
        if (m.omnibus) {
            omnibus = {{"test", m.omnibus->test},
                       {"statistic", finite(m.omnibus->statistic)},
                       {"df1", m.omnibus->df1},
                       {"df2", m.omnibus->df2},
                       {"p", m.omnibus->p},
                       {"correction", m.omnibus->correction}};
            omnibus["epsilon"] = m.omnibus->epsilon ? nlohmann::json(*m.omnibus->epsilon) : nlohmann::json(nullptr);
        }
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& p : m.pairwise) pairs.push_back(to_json(p));
        metrics.push_back(
            {{"metric", m.metric}, {"modes", modes}, {"omnibus", omnibus}, {"pairwise", pairs}, {"note", m.note}});
    }
    return {{"experiment", report.experiment}, {"metrics", metrics}};
}

std::string summary_csv(const StatsReport& report) {
    std::string out = "metric,mode,mean,se,users\n";
    for (const auto& m : report.metrics) {
        for (const auto& s : m.modes) {
            out += m.metric + ',' + s.mode + ',' + num(s.mean) + ',' + num(s.se) + ',' + std::to_string(s.users) + '\n';
        }
    }
    return out;
}

}  // namespace gazegpt::evalstats
