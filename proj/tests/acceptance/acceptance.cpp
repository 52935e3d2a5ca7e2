// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "gazegpt/codec.hpp"
#include "gazegpt/error.hpp"
#include "gazegpt/experiments.hpp"
#include "gazegpt/foveation.hpp"
#include "gazegpt/geometry.hpp"
#include "gazegpt/pipeline.hpp"
#include "gazegpt/service.hpp"
#include "gazegpt/stats.hpp"
#include "oracles.hpp"

using namespace gazegpt;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void run(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.require(secs < budget_s, "runtime under " + std::to_string(budget_s) + " s");
    if (!c.ok) ++failures;
    std::printf("%s %s (%.2f s)%s\n", c.ok ? "PASS" : "FAIL", name.c_str(), secs, c.detail.str().c_str());
    std::fflush(stdout);
}

std::vector<std::vector<double>> rows_of(const evalstats::Matrix& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(m(i, j));
    }
    return rows;
}

evalstats::Matrix normal_matrix(std::mt19937_64& rng, int n, int k) {
    std::normal_distribution<double> z;
    evalstats::Matrix m(n, k);
    for (int i = 0; i < n; ++i) {
        const double subject = z(rng);
        for (int j = 0; j < k; ++j) m(i, j) = subject + z(rng);
    }
    return m;
}

std::map<std::string, double> mode_means(const evalstats::MetricReport& m) {
    std::map<std::string, double> out;
    for (const auto& s : m.modes) out[s.mode] = s.mean;
    return out;
}

double pair_p(const evalstats::MetricReport& m, const std::string& a, const std::string& b) {
    for (const auto& c : m.pairwise) {
        if ((c.a == a && c.b == b) || (c.a == b && c.b == a)) return c.p_corrected;
    }
    return 1.0;
}

}  // namespace

int main() {
    using foveation::CropSpec;

    run("data budget: 3 x 512^2 of 3264x2448 reduces data 10.16x", 1.0, [](Check& c) {
        const auto b = foveation::data_budget(CropSpec{}, 3264, 2448);
        c.detail << " reduction=" << b.reduction;
        c.require(b.full_pixels == 3264ull * 2448, "full pixels");
        c.require(b.crop_pixels == 3ull * 512 * 512, "crop pixels");
        c.require(b.reduction == 10.16015625, "reduction exactly 10.16015625");
    });

    run("acuity budget: 5760 px wide, 4 x 480^2 saves over 25x", 1.0, [](Check& c) {
        const auto a = foveation::acuity_budget(44, 33, 2, 120);
        const double printed_height = 4320.0;
        CropSpec spec;
        spec.levels = 4;
        spec.out_px = 480;
        const double crop_pixels = 4.0 * 480 * 480;
        const double reduction = a.width_px * printed_height / crop_pixels;
        c.detail << " width=" << a.width_px << " height=" << a.height_px << " (printed " << printed_height
                 << ") reduction=" << reduction;
        c.require(a.width_px == 5760.0, "width 5760");
        // The stated formula gives (33 + 2*2) * 120 = 4440, not the printed 4320.
        c.require(a.height_px == 4440.0, "formula height 4440");
        c.require(a.height_px != printed_height, "vertical discrepancy present");
        c.require(std::abs(reduction - 27.0) < 1e-12 && reduction > 25.0, "reduction 27.0 > 25");
        c.require(static_cast<double>(foveation::data_budget(spec, 5760, 4320).reduction) == reduction,
                  "data_budget agrees");
    });

    run("geometry: principal point, 39 deg corner, 1000 homographies under 1e-9", 10.0, [](Check& c) {
        const auto cam = geometry::intrinsics_from_fov(3264, 2448, 78.0);
        const auto pp = geometry::project_gaze(cam, geometry::GazeSample::make(0, {0, 0, 0}, {0, 0, 1}), 1.0);
        c.require(pp.u == cam.cx() && pp.v == cam.cy(), "optical axis hits the principal point exactly");
        const double corner = geometry::pixel_angle(cam, cam.principal_point(), {-0.5, -0.5});
        c.detail << " corner=" << corner;
        c.require(std::abs(corner - 39.0) <= 0.01, "corner angle 39 +/- 0.01");

        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        const Eigen::Matrix3d K = (Eigen::Matrix3d() << cam.fx(), 0, cam.cx(), 0, cam.fy(), cam.cy(), 0, 0, 1).finished();
        double worst_plane = 0.0, worst_px = 0.0;
        int configs = 0;
        while (configs < 1000) {
            const Eigen::Matrix3d R = (Eigen::AngleAxisd(0.6 * unit(rng), Eigen::Vector3d::UnitX()) *
                                       Eigen::AngleAxisd(0.6 * unit(rng), Eigen::Vector3d::UnitY()) *
                                       Eigen::AngleAxisd(3.1 * unit(rng), Eigen::Vector3d::UnitZ()))
                                          .toRotationMatrix();
            const Eigen::Vector3d t(0.2 * unit(rng), 0.2 * unit(rng), 1.5 + 0.6 * unit(rng));
            Eigen::Matrix3d Rt;
            Rt << R.col(0), R.col(1), t;
            const Eigen::Matrix3d H = K * Rt;
            auto to_px = [&](geometry::PlanePoint p) {
                const Eigen::Vector3d q = H * Eigen::Vector3d(p.x, p.y, 1.0);
                return geometry::PixelPoint{q.x() / q.z(), q.y() / q.z()};
            };
            std::array<geometry::PlanePoint, 4> plane;
            const double sx[4] = {-1, 1, 1, -1}, sy[4] = {-1, -1, 1, 1};
            for (int i = 0; i < 4; ++i) {
                plane[static_cast<std::size_t>(i)] = {sx[i] * (0.3 + 0.1 * unit(rng)), sy[i] * (0.2 + 0.1 * unit(rng))};
            }
            std::array<geometry::PixelPoint, 4> px;
            bool in_front = true;
            for (int i = 0; i < 4; ++i) {
                const auto& p = plane[static_cast<std::size_t>(i)];
                in_front = in_front && (R * Eigen::Vector3d(p.x, p.y, 0.0) + t).z() > 0.3;
                px[static_cast<std::size_t>(i)] = to_px(p);
            }
            if (!in_front) continue;
            ++configs;
            const auto reg = geometry::register_plane(px, plane, 1.0);
            for (int k = 0; k < 24; ++k) {
                const geometry::PlanePoint p = k < 4 ? plane[static_cast<std::size_t>(k)]
                                                     : geometry::PlanePoint{0.3 * unit(rng), 0.2 * unit(rng)};
                const auto q = to_px(p);
                const auto back = reg.to_plane(q);
                worst_plane = std::max({worst_plane, std::abs(back.x - p.x), std::abs(back.y - p.y)});
                const auto img = reg.to_image(p);
                worst_px = std::max({worst_px, std::abs(img.u - q.u), std::abs(img.v - q.v)});
            }
        }
        c.detail << " max_plane_err=" << worst_plane << " m max_pixel_err=" << worst_px << " px";
        c.require(worst_plane < 1e-9, "plane error < 1e-9");
        c.require(worst_px < 1e-9, "pixel error < 1e-9");
    });

    run("pipeline latency: mock delays 0.9/4.0/0.3 s sum to 5.2 s", 10.0, [](Check& c) {
        const auto session = service::demo_session(geometry::intrinsics_from_fov(640, 480, 78.0), 3);
        pipeline::Clients clients{
            std::make_shared<pipeline::ScriptedTranscriber>("what dog is this", pipeline::MockBehavior{0.9}),
            std::make_shared<pipeline::ScriptedVisionModel>(std::vector<std::string>{"A beagle."},
                                                            pipeline::MockBehavior{4.0}),
            std::make_shared<pipeline::ToneSynthesizer>(pipeline::MockBehavior{0.3})};
        pipeline::QueryOptions opts;
        opts.crop.out_px = 64;
        pipeline::QueryInput input;
        input.audio = pipeline::AudioClip{tone_wav(1.0)};
        const auto result = pipeline::run_query(session, 1.0, input, clients, opts);
        const auto& t = result.transcript;
        const double stt = t.stage_latencies.at(pipeline::Stage::stt);
        const double lmm = t.stage_latencies.at(pipeline::Stage::lmm);
        const double tts = t.stage_latencies.at(pipeline::Stage::tts);
        c.detail << " stt=" << stt << " lmm=" << lmm << " tts=" << tts << " total=" << t.total_latency;
        c.require(t.status == "ok", "query ok");
        c.require(std::abs(t.total_latency - 5.2) <= 0.05, "total 5.2 +/- 0.05");
        c.require(std::abs(stt - 0.9) <= 0.05 && std::abs(lmm - 4.0) <= 0.05 && std::abs(tts - 0.3) <= 0.05,
                  "each stage within 50 ms");
    });

    run("selection: {gaze, phone} more accurate than {head, body}; time gaze < head < body < phone", 30.0,
        [](Check& c) {
            evalstats::SelectionExperimentConfig cfg;
            const auto modes = selection::default_modes();
            const auto trials = evalstats::run_selection_experiment(cfg, modes, 1);
            const auto rep = evalstats::report(trials);
            const auto& err = rep.metric("error_deg");
            const auto e = mode_means(err);
            const auto tm = mode_means(rep.metric("time_s"));
            c.detail << " error: gaze=" << e.at("gaze") << " phone=" << e.at("phone") << " head=" << e.at("head")
                     << " body=" << e.at("body") << "; time: gaze=" << tm.at("gaze") << " head=" << tm.at("head")
                     << " body=" << tm.at("body") << " phone=" << tm.at("phone");
            double worst_p = 0.0;
            for (const char* good : {"gaze", "phone"}) {
                for (const char* bad : {"head", "body"}) {
                    c.require(e.at(good) < e.at(bad), std::string(good) + " < " + bad);
                    worst_p = std::max(worst_p, pair_p(err, good, bad));
                }
            }
            c.detail << " max_corrected_p=" << worst_p;
            c.require(worst_p < 0.01, "Bonferroni p < 0.01");
            c.require(tm.at("gaze") < tm.at("head") && tm.at("head") < tm.at("body") && tm.at("body") < tm.at("phone"),
                      "time ordering");
            c.require(evalstats::trials_csv(trials) ==
                          evalstats::trials_csv(evalstats::run_selection_experiment(cfg, modes, 1)),
                      "reproducible");
        });

    run("classification: gaze >= 50%, head/body <= 35%, gaze significantly highest", 60.0, [](Check& c) {
        evalstats::ClassificationExperimentConfig cfg;
        const std::vector<selection::SelectionMode> modes{selection::default_mode(selection::ModeKind::gaze),
                                                          selection::default_mode(selection::ModeKind::head),
                                                          selection::default_mode(selection::ModeKind::body)};
        evalstats::CoverageOracleBackend oracle(0.64);
        const auto trials = evalstats::run_classification_experiment(cfg, modes, oracle, 1);
        const auto rep = evalstats::report(trials);
        const auto& acc = rep.metric("accuracy");
        const auto a = mode_means(acc);
        c.detail << " gaze=" << a.at("gaze") << " head=" << a.at("head") << " body=" << a.at("body");
        c.require(a.at("gaze") >= 0.50, "gaze >= 0.50");
        c.require(a.at("head") <= 0.35 && a.at("body") <= 0.35, "head, body <= 0.35");
        const double p_head = pair_p(acc, "gaze", "head"), p_body = pair_p(acc, "gaze", "body");
        c.detail << " p(gaze,head)=" << p_head << " p(gaze,body)=" << p_body
                 << " omnibus_p=" << (acc.omnibus ? acc.omnibus->p : 1.0);
        c.require(acc.omnibus && acc.omnibus->p < 0.01, "omnibus p < 0.01");
        c.require(p_head < 0.01 && p_body < 0.01, "gaze vs head/body p < 0.01");
    });

    run("statistics: sums of squares, GG bounds, exact Wilcoxon, null rejection rates", 300.0, [](Check& c) {
        std::mt19937_64 rng(99);
        double worst_ss = 0.0;
        for (int i = 0; i < 5; ++i) {
            const auto m = normal_matrix(rng, 6, 4);
            const auto ss = evalstats::rm_sums_of_squares(m);
            const auto o = oracle::rm_sums_of_squares(rows_of(m));
            worst_ss = std::max({worst_ss, std::abs(ss.total - o.total), std::abs(ss.subjects - o.subjects),
                                 std::abs(ss.conditions - o.conditions), std::abs(ss.error - o.error)});
            const double eps = evalstats::greenhouse_geisser_epsilon(m);
            c.require(eps >= 1.0 / 3.0 - 1e-12 && eps <= 1.0 + 1e-12, "GG epsilon in [1/(k-1), 1]");
        }
        c.detail << " ss_err=" << worst_ss;
        c.require(worst_ss < 1e-10, "sums of squares match to 1e-10");

        double worst_pmf = 0.0;
        std::uniform_int_distribution<int> tie(1, 4);
        for (int n = 1; n <= 10; ++n) {
            std::vector<double> vals;
            for (int i = 0; i < n; ++i) vals.push_back(tie(rng));
            const auto ranks = evalstats::midranks(vals);
            const auto pmf = evalstats::signed_rank_null_pmf(ranks);
            const auto enumerated = oracle::signed_rank_enumeration(ranks);
            for (std::size_t k = 0; k < pmf.size(); ++k) {
                const auto it = enumerated.find(static_cast<long>(k));
                worst_pmf = std::max(worst_pmf, std::abs(pmf[k] - (it == enumerated.end() ? 0.0 : it->second)));
            }
        }
        c.detail << " wilcoxon_pmf_err=" << worst_pmf;
        c.require(worst_pmf < 1e-12, "Wilcoxon pmf matches enumeration");

        const int sims = 10000;
        std::map<std::string, int> rejections;
        std::normal_distribution<double> z;
        for (int s = 0; s < sims; ++s) {
            const auto m = normal_matrix(rng, 12, 4);
            rejections["rm_anova_gg"] += evalstats::rm_anova_gg(m).p < 0.05;
            rejections["friedman"] += evalstats::friedman_test(m).p < 0.05;
            evalstats::Matrix groups(12, 3);
            for (int i = 0; i < 12; ++i) {
                for (int j = 0; j < 3; ++j) groups(i, j) = z(rng);
            }
            rejections["one_way_anova"] += evalstats::one_way_anova(groups).p < 0.05;
            std::vector<double> a(12), b(12);
            for (int i = 0; i < 12; ++i) {
                a[static_cast<std::size_t>(i)] = m(i, 0);
                b[static_cast<std::size_t>(i)] = m(i, 1);
            }
            rejections["paired_t"] += evalstats::paired_t_test(a, b).p < 0.05;
            rejections["wilcoxon"] += evalstats::wilcoxon_signed_rank(a, b).p < 0.05;
            std::vector<double> la(30), lb(30);
            for (int i = 0; i < 30; ++i) {
                const double subject = z(rng);
                la[static_cast<std::size_t>(i)] = subject + z(rng);
                lb[static_cast<std::size_t>(i)] = subject + z(rng);
            }
            rejections["wilcoxon_normal"] += evalstats::wilcoxon_signed_rank(la, lb).p < 0.05;
        }
        for (const auto& [name, count] : rejections) {
            const double rate = static_cast<double>(count) / sims;
            c.detail << " " << name << "=" << rate;
            c.require(rate >= 0.03 && rate <= 0.07, name + " rejection rate in [0.03, 0.07]");
        }
    });

    run("determinism: seeded experiments give bit-identical trial CSVs", 60.0, [](Check& c) {
        evalstats::SelectionExperimentConfig scfg;
        scfg.users = 4;
        const auto modes = selection::default_modes();
        const auto s1 = evalstats::trials_csv(evalstats::run_selection_experiment(scfg, modes, 31337));
        const auto s2 = evalstats::trials_csv(evalstats::run_selection_experiment(scfg, modes, 31337));
        c.require(s1 == s2, "selection CSV identical");

        evalstats::ClassificationExperimentConfig ccfg;
        ccfg.users = 4;
        evalstats::CoverageOracleBackend o1(0.64), o2(0.64);
        const std::vector<selection::SelectionMode> cmodes{selection::default_mode(selection::ModeKind::gaze),
                                                           selection::default_mode(selection::ModeKind::body)};
        const auto c1 = evalstats::trials_csv(evalstats::run_classification_experiment(ccfg, cmodes, o1, 31337));
        const auto c2 = evalstats::trials_csv(evalstats::run_classification_experiment(ccfg, cmodes, o2, 31337));
        c.require(c1 == c2, "classification CSV identical");
        c.require(s1 != evalstats::trials_csv(evalstats::run_selection_experiment(scfg, modes, 31338)),
                  "seed changes the output");
        c.detail << " selection_bytes=" << s1.size() << " classification_bytes=" << c1.size();
    });

    std::printf("%s: %d failing criteria\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
