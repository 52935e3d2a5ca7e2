#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gazegpt/experiments.hpp"
#include "gazegpt/foveation.hpp"
#include "gazegpt/geometry.hpp"
#include "gazegpt/image.hpp"
#include "gazegpt/stats.hpp"

using namespace gazegpt;

namespace {

Image noise_frame(int w, int h) {
    Image img(w, h);
    std::mt19937_64 rng(1);
    for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng());
    return img;
}

void BM_MultiscaleCropWorldFrame(benchmark::State& state) {
    const auto cam = geometry::world_camera();
    const auto frame = noise_frame(cam.width(), cam.height());
    foveation::CropSpec spec;
    for (auto _ : state) {
        benchmark::DoNotOptimize(foveation::multiscale_crop(frame, {1700.0, 1100.0}, cam, spec));
    }
}
BENCHMARK(BM_MultiscaleCropWorldFrame)->Unit(benchmark::kMillisecond);

void BM_ResampleArea(benchmark::State& state) {
    const auto frame = noise_frame(2448, 2448);
    const foveation::Window w{0, 0, static_cast<int>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(foveation::resample_area(frame, w, 512));
}
BENCHMARK(BM_ResampleArea)->Arg(397)->Arg(1210)->Arg(2448)->Unit(benchmark::kMillisecond);

void BM_RegisterPlane(benchmark::State& state) {
    const std::array<geometry::PixelPoint, 4> px{{{310, 205}, {1010, 230}, {990, 770}, {300, 745}}};
    const std::array<geometry::PlanePoint, 4> plane{{{-0.4, -0.3}, {0.4, -0.3}, {0.4, 0.3}, {-0.4, 0.3}}};
    for (auto _ : state) benchmark::DoNotOptimize(geometry::register_plane(px, plane, 1.0));
}
BENCHMARK(BM_RegisterPlane);

void BM_WilcoxonExact(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = z(rng);
        b[i] = z(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(evalstats::wilcoxon_signed_rank(a, b));
}
BENCHMARK(BM_WilcoxonExact)->Arg(12)->Arg(25);

void BM_SelectionExperiment(benchmark::State& state) {
    const auto modes = selection::default_modes();
    evalstats::SelectionExperimentConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(evalstats::run_selection_experiment(cfg, modes, 1));
}
BENCHMARK(BM_SelectionExperiment)->Unit(benchmark::kMillisecond);

void BM_ClassificationExperimentOracle(benchmark::State& state) {
    const std::vector<selection::SelectionMode> modes{selection::default_mode(selection::ModeKind::gaze),
                                                      selection::default_mode(selection::ModeKind::head),
                                                      selection::default_mode(selection::ModeKind::body)};
    evalstats::ClassificationExperimentConfig cfg;
    evalstats::CoverageOracleBackend oracle(0.64);
    for (auto _ : state) benchmark::DoNotOptimize(evalstats::run_classification_experiment(cfg, modes, oracle, 1));
}
BENCHMARK(BM_ClassificationExperimentOracle)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
