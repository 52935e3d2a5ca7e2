#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "gazegpt/breeds.hpp"
#include "gazegpt/capture.hpp"
#include "gazegpt/codec.hpp"
#include "gazegpt/error.hpp"
#include "gazegpt/experiments.hpp"
#include "gazegpt/foveation.hpp"
#include "gazegpt/geometry.hpp"
#include "gazegpt/pipeline.hpp"
#include "gazegpt/selection.hpp"
#include "gazegpt/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gazegpt;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingAssetError(path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string(), e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    write_text(path, std::string(bytes.begin(), bytes.end()));
}

capture::Session open_session(const std::string& path) {
    if (path.empty() || path == "demo") return service::demo_session();
    return capture::load_session(path);
}

std::vector<selection::SelectionMode> pick_modes(const std::string& modes_file, const std::vector<std::string>& names) {
    auto modes = modes_file.empty() ? selection::default_modes() : selection::load_modes(modes_file);
    if (names.empty()) return modes;
    std::vector<selection::SelectionMode> out;
    for (const auto& n : names) {
        const auto kind = selection::mode_kind_from_string(n);
        auto it = std::find_if(modes.begin(), modes.end(), [&](const auto& m) { return m.kind == kind; });
        if (it == modes.end()) throw DomainError("mode " + n + " not defined");
        out.push_back(*it);
    }
    return out;
}

void print_report(const evalstats::StatsReport& rep) {
    for (const auto& m : rep.metrics) {
        std::cout << m.metric << '\n';
        for (const auto& s : m.modes) {
            std::printf("  %-6s mean %.4f  se %.4f  (n=%zu)\n", s.mode.c_str(), s.mean, s.se, s.users);
        }
        if (m.omnibus) {
            std::printf("  %s: F(%.2f, %.2f) = %.3f, p = %.3g", m.omnibus->test.c_str(), m.omnibus->df1,
                        m.omnibus->df2, m.omnibus->statistic, m.omnibus->p);
            if (m.omnibus->epsilon) std::printf(", eps = %.3f", *m.omnibus->epsilon);
            std::printf("\n");
        }
        for (const auto& p : m.pairwise) {
            std::printf("  %s vs %s: t = %.3f, p_bonf = %.3g\n", p.a.c_str(), p.b.c_str(), p.statistic,
                        p.p_corrected);
        }
        if (!m.note.empty()) std::cout << "  note: " << m.note << '\n';
    }
}

void save_results(const evalstats::TrialSet& trials, const std::string& out_dir) {
    const auto rep = evalstats::report(trials);
    print_report(rep);
    if (out_dir.empty()) return;
    const fs::path dir(out_dir);
    write_text(dir / "trials.csv", evalstats::trials_csv(trials));
    write_text(dir / "report.json", evalstats::to_json(rep).dump(2) + "\n");
    write_text(dir / "summary.csv", evalstats::summary_csv(rep));
    std::cout << "wrote " << (dir / "trials.csv").string() << ", report.json, summary.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaze-contingent multimodal query toolkit"};
    app.require_subcommand(1);

    // budget
    auto* budget = app.add_subcommand("budget", "Pixel budgets of multiscale crops and a foveal sensor");
    foveation::CropSpec spec;
    int frame_w = 3264, frame_h = 2448;
    std::vector<double> acuity;
    budget->add_option("--levels", spec.levels, "Crop levels")->capture_default_str();
    budget->add_option("--out-px", spec.out_px, "Output side per level")->capture_default_str();
    budget->add_option("--width", frame_w, "Frame width")->capture_default_str();
    budget->add_option("--height", frame_h, "Frame height")->capture_default_str();
    budget->add_option("--acuity", acuity, "Gaze range h, v, fovea margin (deg) and px/deg")->expected(4);

    // intrinsics
    auto* intr = app.add_subcommand("intrinsics", "Pinhole intrinsics from a diagonal field of view");
    int iw = 3264, ih = 2448;
    double fov = 78.0;
    std::string intr_out;
    intr->add_option("--width", iw)->capture_default_str();
    intr->add_option("--height", ih)->capture_default_str();
    intr->add_option("--fov", fov, "Diagonal FOV in degrees")->capture_default_str();
    intr->add_option("-o,--out", intr_out, "Write calibration JSON here");

    // synth
    auto* synth = app.add_subcommand("synth", "Render a synthetic session");
    std::string synth_scene = "dog", synth_out;
    std::uint64_t synth_seed = 1;
    int synth_active = 12;
    std::vector<int> synth_center;
    double synth_duration = 2.0;
    synth->add_option("--scene", synth_scene, "cross | dog | empty")->capture_default_str();
    synth->add_option("--active", synth_active, "Active cross (cross scene)")->capture_default_str();
    synth->add_option("--center", synth_center, "Central image row, col offset (dog scene)")->expected(2);
    synth->add_option("--duration", synth_duration)->capture_default_str();
    synth->add_option("--seed", synth_seed)->capture_default_str();
    synth->add_option("-o,--out", synth_out, "Session directory")->required();

    // crop
    auto* crop = app.add_subcommand("crop", "Multiscale crop of a session frame");
    std::string crop_session, crop_out;
    std::size_t crop_frame = 0;
    std::vector<double> crop_px;
    crop->add_option("--session", crop_session, "Session directory or 'demo'")->capture_default_str();
    crop->add_option("--frame", crop_frame)->capture_default_str();
    crop->add_option("--at", crop_px, "Pixel u v (default: projected gaze)")->expected(2);
    crop->add_option("--levels", spec.levels)->capture_default_str();
    crop->add_option("--finest-fov", spec.finest_fov)->capture_default_str();
    crop->add_option("--scale", spec.scale_factor)->capture_default_str();
    crop->add_option("--out-px", spec.out_px)->capture_default_str();
    crop->add_option("-o,--out", crop_out, "Output directory")->required();

    // query
    auto* query = app.add_subcommand("query", "Run one query against mock or live backends");
    std::string q_session, q_config, q_question, q_audio, q_out;
    double q_t = -1.0;
    std::vector<double> q_gaze;
    query->add_option("--session", q_session, "Session directory or 'demo'");
    query->add_option("--config", q_config, "Service config (mode, backends, crop)");
    query->add_option("--t", q_t, "Trigger time (default: session start)");
    query->add_option("--gaze", q_gaze, "Override gaze pixel u v")->expected(2);
    auto* q_text_opt = query->add_option("--question", q_question, "Question text");
    auto* q_audio_opt = query->add_option("--audio", q_audio, "Question as a WAV file");
    q_text_opt->excludes(q_audio_opt);
    query->add_option("-o,--out", q_out, "Write transcript, crops and audio here");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Simulated user studies");
    exp->require_subcommand(1);
    std::string e_config, e_modes, e_out, e_backend = "oracle", e_service_config;
    std::uint64_t e_seed = 1;
    int e_users = 0;
    double e_base = 0.64;
    std::vector<std::string> e_mode_names;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", e_config, "Experiment config JSON");
        sub->add_option("--modes", e_modes, "Selection modes JSON");
        sub->add_option("--mode", e_mode_names, "Restrict to these modes (repeatable)");
        sub->add_option("--users", e_users, "Override the number of simulated users");
        sub->add_option("--seed", e_seed)->capture_default_str();
        sub->add_option("-o,--out", e_out, "Directory for trials.csv, report.json, summary.csv");
    };
    auto* e_sel = exp->add_subcommand("selection", "Pointing speed and accuracy on a cross grid");
    add_common(e_sel);
    auto* e_cls = exp->add_subcommand("classification", "Dog-breed identification on a 9x9 grid");
    add_common(e_cls);
    e_cls->add_option("--backend", e_backend, "oracle | live")->capture_default_str();
    e_cls->add_option("--base-accuracy", e_base, "Coverage oracle accuracy")->capture_default_str();
    e_cls->add_option("--service-config", e_service_config, "Backend endpoints for --backend live");

    // stats
    auto* st = app.add_subcommand("stats", "Statistics report for a trials CSV");
    std::string st_in, st_out;
    st->add_option("trials", st_in, "trials.csv")->required()->check(CLI::ExistingFile);
    st->add_option("-o,--out", st_out, "Write report JSON here");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP/WebSocket service for the companion UI");
    std::string s_config;
    int s_port = -1;
    serve->add_option("--config", s_config, "Service config JSON");
    serve->add_option("--port", s_port, "Override the port (0 = any free port)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*budget) {
            const auto b = foveation::data_budget(spec, frame_w, frame_h);
            json out{{"full_pixels", b.full_pixels}, {"crop_pixels", b.crop_pixels}, {"reduction", b.reduction}};
            if (!acuity.empty()) {
                const auto a = foveation::acuity_budget(acuity[0], acuity[1], acuity[2], acuity[3]);
                out["acuity"] = {{"width_px", a.width_px}, {"height_px", a.height_px}, {"megapixels", a.megapixels}};
            }
            std::cout << out.dump(2) << '\n';
        } else if (*intr) {
            const auto cam = geometry::intrinsics_from_fov(iw, ih, fov);
            if (!intr_out.empty()) geometry::save_calibration(cam, intr_out);
            std::cout << geometry::to_json(cam).dump(2) << '\n';
        } else if (*synth) {
            const auto camera = geometry::world_camera();
            capture::SceneDescription scene;
            capture::GazeScript script;
            script.duration = synth_duration;
            if (synth_scene == "cross") {
                capture::CrossGridScene s;
                s.active = synth_active;
                scene = s;
            } else if (synth_scene == "dog") {
                capture::DogGridScene s;
                if (synth_center.size() == 2) {
                    s.center_row = synth_center[0];
                    s.center_col = synth_center[1];
                }
                const auto& breeds = evalstats::default_breeds();
                s.labels.assign(breeds.begin(), breeds.begin() + s.grid * s.grid);
                scene = s;
            } else if (synth_scene == "empty") {
                scene = capture::EmptyScene{};
            } else {
                throw DomainError("unknown scene " + synth_scene);
            }
            if (auto layout = capture::layout_scene(scene, camera); layout.target_plane) {
                script.fixations.push_back({0.0, *layout.target_plane});
            }
            const auto session = capture::synth_session(scene, camera, script, synth_seed, fs::path(synth_out).filename().string());
            capture::save_session(session, synth_out);
            std::cout << "wrote " << session.frames().size() << " frames and " << session.gaze().size()
                      << " gaze samples to " << synth_out << '\n';
        } else if (*crop) {
            const auto session = open_session(crop_session);
            const auto frame = session.frame(crop_frame);
            geometry::PixelPoint center;
            if (crop_px.size() == 2) {
                center = {crop_px[0], crop_px[1]};
            } else {
                const auto [f, gaze] = capture::sample_at(session, frame.t);
                center = geometry::project_gaze(session.camera(), gaze, session.metadata().value("fixation_depth_m", 1.0));
            }
            const auto c = foveation::multiscale_crop(*frame.image, center, session.camera(), spec);
            foveation::export_crops(c, crop_out);
            std::cout << foveation::crop_metadata(c).dump(2) << '\n';
        } else if (*query) {
            const auto config = q_config.empty() ? service::ServiceConfig{} : service::load_service_config(q_config);
            const auto session = open_session(q_session);
            const auto clients = service::make_clients(config);
            pipeline::QueryInput input;
            if (!q_audio.empty()) {
                std::ifstream in(q_audio, std::ios::binary);
                if (!in) throw MissingAssetError(q_audio);
                input.audio = pipeline::AudioClip{{std::istreambuf_iterator<char>(in), {}}};
            } else {
                input.text = q_question.empty() ? config.mock.transcript : q_question;
            }
            pipeline::QueryOptions opts;
            opts.crop = config.crop;
            opts.fixation_depth = session.metadata().value("fixation_depth_m", config.fixation_depth);
            opts.stt_timeout_s = config.stt_timeout_s;
            opts.lmm_timeout_s = config.lmm_timeout_s;
            opts.tts_timeout_s = config.tts_timeout_s;
            if (q_gaze.size() == 2) opts.gaze_override = geometry::PixelPoint{q_gaze[0], q_gaze[1]};
            const double t = q_t >= 0.0 ? q_t : session.start_time();
            const auto result = pipeline::run_query(session, t, input, clients, opts);
            const auto transcript = pipeline::to_json(result.transcript);
            std::cout << transcript.dump(2) << '\n';
            if (!q_out.empty()) {
                const fs::path dir(q_out);
                write_text(dir / "transcript.json", transcript.dump(2) + "\n");
                for (const auto& level : result.crop.levels) {
                    write_bytes(dir / "crops" / (result.transcript.query_id + "_level" + std::to_string(level.level) + ".png"),
                                encode_png(level.image));
                }
                if (input.audio && !result.transcript.audio_in_ref.empty()) {
                    write_bytes(dir / result.transcript.audio_in_ref, input.audio->wav);
                }
                if (!result.transcript.audio_out_ref.empty()) {
                    write_bytes(dir / result.transcript.audio_out_ref, result.response_audio.wav);
                }
            }
            return result.transcript.status == "ok" ? 0 : 3;
        } else if (*e_sel) {
            auto config = e_config.empty() ? evalstats::SelectionExperimentConfig{}
                                           : evalstats::selection_config_from_json(read_json(e_config));
            if (e_users > 0) config.users = e_users;
            const auto trials = evalstats::run_selection_experiment(config, pick_modes(e_modes, e_mode_names), e_seed);
            save_results(trials, e_out);
        } else if (*e_cls) {
            auto config = e_config.empty() ? evalstats::ClassificationExperimentConfig{}
                                           : evalstats::classification_config_from_json(read_json(e_config));
            if (e_users > 0) config.users = e_users;
            auto names = e_mode_names;
            if (names.empty()) names = {"gaze", "head", "body"};
            const auto modes = pick_modes(e_modes, names);
            std::unique_ptr<evalstats::ClassificationBackend> backend;
            if (e_backend == "oracle") {
                backend = std::make_unique<evalstats::CoverageOracleBackend>(e_base);
            } else if (e_backend == "live") {
                auto sc = e_service_config.empty() ? service::ServiceConfig{} : service::load_service_config(e_service_config);
                backend = std::make_unique<evalstats::VisionModelBackend>(
                    pipeline::make_chat_vision_model(sc.live.lmm), sc.lmm_timeout_s);
            } else {
                throw DomainError("unknown backend " + e_backend);
            }
            const auto trials = evalstats::run_classification_experiment(config, modes, *backend, e_seed);
            save_results(trials, e_out);
        } else if (*st) {
            std::ifstream in(st_in);
            const auto trials = evalstats::read_trials_csv(in);
            const auto rep = evalstats::report(trials);
            print_report(rep);
            if (!st_out.empty()) write_text(st_out, evalstats::to_json(rep).dump(2) + "\n");
        } else if (*serve) {
            auto config = s_config.empty() ? service::ServiceConfig{} : service::load_service_config(s_config);
            if (s_port >= 0) config.port = static_cast<unsigned short>(s_port);

            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);

            service::Service svc(config);
            svc.start();
            std::cout << "serving " << svc.session_ids().size() << " session(s) on http://" << config.host << ':'
                      << svc.port() << " (" << config.mode << " mode)" << std::endl;
            int sig = 0;
            sigwait(&signals, &sig);
            std::cout << "stopping" << std::endl;
            svc.stop();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
