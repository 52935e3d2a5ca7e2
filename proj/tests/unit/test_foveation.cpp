#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "gazegpt/error.hpp"
#include "gazegpt/foveation.hpp"

using namespace gazegpt;
using namespace gazegpt::foveation;

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
    Image img(w, h);
    std::mt19937_64 rng(seed);
    for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng() & 0xFF);
    return img;
}

// Area average computed cell by cell in 2-D: output cell (ox, oy) covers the source square
// [ox*s, (ox+1)*s) x [oy*s, (oy+1)*s) measured from the window origin.
double area_oracle(const Image& src, const Window& w, int out, int ox, int oy, int ch) {
    const double s = static_cast<double>(w.size) / out;
    const double x0 = ox * s, x1 = (ox + 1) * s, y0 = oy * s, y1 = (oy + 1) * s;
    double acc = 0.0;
    for (int y = static_cast<int>(std::floor(y0)); y < std::min(w.size, static_cast<int>(std::ceil(y1))); ++y) {
        for (int x = static_cast<int>(std::floor(x0)); x < std::min(w.size, static_cast<int>(std::ceil(x1))); ++x) {
            const double ax = std::min(x1, x + 1.0) - std::max(x0, static_cast<double>(x));
            const double ay = std::min(y1, y + 1.0) - std::max(y0, static_cast<double>(y));
            if (ax > 0 && ay > 0) acc += ax * ay * src.pixel(w.x + x, w.y + y)[ch];
        }
    }
    return acc / (s * s);
}

}  // namespace

TEST(Resample, MatchesTwoDimensionalAreaOracle) {
    const auto img = noise_image(97, 83, 3);
    for (const auto& [w, out] : std::vector<std::pair<Window, int>>{
             {{5, 7, 61}, 17}, {{0, 0, 83}, 83}, {{10, 3, 13}, 40}, {{20, 20, 50}, 7}, {{1, 2, 64}, 32}}) {
        const auto r = resample_area(img, w, out);
        ASSERT_EQ(r.width(), out);
        for (int oy = 0; oy < out; ++oy)
            for (int ox = 0; ox < out; ++ox)
                for (int ch = 0; ch < 3; ++ch) {
                    const double expect = area_oracle(img, w, out, ox, oy, ch);
                    ASSERT_LE(std::abs(r.pixel(ox, oy)[ch] - expect), 0.5 + 1e-9) << ox << "," << oy;
                }
    }
}

TEST(Resample, IdentitySizeCopiesPixels) {
    const auto img = noise_image(40, 30, 4);
    const auto r = resample_area(img, {3, 4, 20}, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x)
            for (int c = 0; c < 3; ++c) ASSERT_EQ(r.pixel(x, y)[c], img.pixel(x + 3, y + 4)[c]);
}

TEST(Resample, ConstantImageStaysConstant) {
    const Image img(50, 50, 12, 200, 77);
    const auto r = resample_area(img, {0, 0, 49}, 23);
    for (int y = 0; y < 23; ++y)
        for (int x = 0; x < 23; ++x) {
            ASSERT_EQ(r.pixel(x, y)[0], 12);
            ASSERT_EQ(r.pixel(x, y)[1], 200);
            ASSERT_EQ(r.pixel(x, y)[2], 77);
        }
}

TEST(Resample, RejectsWindowsOutsideTheImage) {
    const Image img(10, 10);
    EXPECT_THROW(resample_area(img, {5, 0, 6}, 4), DomainError);
    EXPECT_THROW(resample_area(img, {-1, 0, 4}, 4), DomainError);
    EXPECT_THROW(resample_area(img, {0, 0, 4}, 0), DomainError);
}

TEST(PlanCrop, DefaultLadderOnTheWorldCamera) {
    const auto cam = geometry::world_camera();
    const auto crop = plan_crop(cam.principal_point(), cam, CropSpec{});
    ASSERT_EQ(crop.levels.size(), 3u);
    const double f = cam.fx();
    EXPECT_EQ(crop.levels[0].window.size, std::lround(2 * f * std::tan(4.5 * M_PI / 180)));
    EXPECT_EQ(crop.levels[0].window.size, 397);
    EXPECT_EQ(crop.levels[1].window.size, 1210);
    EXPECT_FALSE(crop.levels[0].clamped);
    EXPECT_FALSE(crop.levels[1].clamped);
    EXPECT_DOUBLE_EQ(crop.levels[0].fov, 9.0);
    EXPECT_DOUBLE_EQ(crop.levels[1].fov, 27.0);
    EXPECT_TRUE(crop.levels[2].clamped);
    EXPECT_EQ(crop.levels[2].window.size, 2448);
    EXPECT_NEAR(crop.levels[2].fov, 2 * std::atan(1224.0 / f) * 180 / M_PI, 1e-12);
    EXPECT_NEAR(crop.levels[2].fov, 51.83, 0.01);
    for (const auto& l : crop.levels) {
        EXPECT_EQ(l.offset_x, 0);
        EXPECT_EQ(l.offset_y, 0);
        EXPECT_TRUE(l.image.empty());
        // The window center sits within half a pixel of the requested center.
        EXPECT_LE(std::abs(l.window.x + l.window.size / 2.0 - 0.5 - cam.cx()), 0.5);
        EXPECT_LE(std::abs(l.window.y + l.window.size / 2.0 - 0.5 - cam.cy()), 0.5);
    }
}

TEST(PlanCrop, LevelsAreNestedAndIncreasing) {
    const auto cam = geometry::world_camera();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, cam.width() - 0.51), v(-0.5, cam.height() - 0.51);
    for (int i = 0; i < 300; ++i) {
        const auto crop = plan_crop({u(rng), v(rng)}, cam, CropSpec{});
        for (std::size_t k = 0; k < crop.levels.size(); ++k) {
            const auto& w = crop.levels[k].window;
            ASSERT_GE(w.x, 0);
            ASSERT_GE(w.y, 0);
            ASSERT_LE(w.x + w.size, cam.width());
            ASSERT_LE(w.y + w.size, cam.height());
            if (k > 0) {
                ASSERT_GT(w.size, crop.levels[k - 1].window.size);
                ASSERT_GT(crop.levels[k].fov, crop.levels[k - 1].fov);
            }
        }
    }
}

TEST(PlanCrop, ShiftsWindowsInsideTheFrameNearEdges) {
    const auto cam = geometry::world_camera();
    const auto crop = plan_crop({0.0, 0.0}, cam, CropSpec{});
    for (const auto& l : crop.levels) {
        EXPECT_EQ(l.window.x, 0);
        EXPECT_EQ(l.window.y, 0);
        EXPECT_GT(l.offset_x, 0);
        EXPECT_GT(l.offset_y, 0);
    }
    const auto br = plan_crop({cam.width() - 1.0, cam.height() - 1.0}, cam, CropSpec{});
    EXPECT_EQ(br.levels[0].window.x + br.levels[0].window.size, cam.width());
    EXPECT_LT(br.levels[0].offset_x, 0);
}

TEST(PlanCrop, OnlyTheWidestLevelMayClamp) {
    const auto cam = geometry::world_camera();
    CropSpec spec;
    spec.levels = 4;
    EXPECT_THROW(plan_crop(cam.principal_point(), cam, spec), DomainError);
    spec = {};
    spec.finest_fov = 200.0;
    spec.levels = 1;
    const auto one = plan_crop(cam.principal_point(), cam, spec);
    EXPECT_TRUE(one.levels[0].clamped);
    EXPECT_THROW(plan_crop({-3.0, 0.0}, cam, CropSpec{}), DomainError);
}

TEST(MultiscaleCrop, ProducesOutPxImagesFromPlannedWindows) {
    const auto cam = geometry::intrinsics_from_fov(320, 240, 78.0);
    const auto img = noise_image(320, 240, 6);
    CropSpec spec;
    spec.out_px = 32;
    const auto crop = multiscale_crop(img, {100.3, 50.8}, cam, spec);
    const auto plan = plan_crop({100.3, 50.8}, cam, spec);
    ASSERT_EQ(crop.levels.size(), plan.levels.size());
    for (std::size_t i = 0; i < crop.levels.size(); ++i) {
        EXPECT_EQ(crop.levels[i].window, plan.levels[i].window);
        EXPECT_EQ(crop.levels[i].image, resample_area(img, plan.levels[i].window, 32));
    }
    EXPECT_EQ(crop.pixel_count(), 3u * 32 * 32);
    EXPECT_THROW(multiscale_crop(Image(10, 10), {5, 5}, cam, spec), DomainError);
}

TEST(Budget, DataReductionOfTheDefaultLadder) {
    const auto b = data_budget(CropSpec{}, 3264, 2448);
    EXPECT_EQ(b.full_pixels, 7990272u);
    EXPECT_EQ(b.crop_pixels, 786432u);
    EXPECT_DOUBLE_EQ(b.reduction, 3264.0 * 2448.0 / (3.0 * 512.0 * 512.0));
    EXPECT_DOUBLE_EQ(b.reduction, 10.16015625);
    EXPECT_THROW(data_budget(CropSpec{}, 0, 10), DomainError);
}

TEST(Budget, AcuitySensor) {
    const auto a = acuity_budget(44, 33, 2, 120);
    EXPECT_DOUBLE_EQ(a.width_px, 5760.0);
    EXPECT_DOUBLE_EQ(a.height_px, 4440.0);
    EXPECT_NEAR(a.megapixels, 25.5744, 1e-9);
    EXPECT_DOUBLE_EQ(foveal_window(120, 2), 480.0);
    EXPECT_THROW(acuity_budget(1, 1, 1, 0), DomainError);
}

TEST(CropSpecJson, RoundTripAndFieldErrors) {
    CropSpec spec{4, 5.0, 2.0, 256};
    const auto back = crop_spec_from_json(to_json(spec));
    EXPECT_EQ(back.levels, 4);
    EXPECT_EQ(back.finest_fov, 5.0);
    EXPECT_EQ(back.scale_factor, 2.0);
    EXPECT_EQ(back.out_px, 256);
    try {
        crop_spec_from_json({{"levels", "three"}});
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.field(), "crop.levels");
    }
    EXPECT_THROW(crop_spec_from_json({{"zoom", 2}}), SchemaError);
}

TEST(CropMetadata, DescribesEveryLevel) {
    const auto cam = geometry::world_camera();
    const auto crop = plan_crop({10.0, 2000.0}, cam, CropSpec{});
    const auto meta = crop_metadata(crop);
    EXPECT_EQ(meta["center"][0].get<double>(), 10.0);
    const auto& j = meta["levels"];
    ASSERT_EQ(j.size(), 3u);
    EXPECT_EQ(j[0]["window"][2].get<int>(), 397);
    EXPECT_EQ(j[0]["center_offset"][0].get<int>(), crop.levels[0].offset_x);
    EXPECT_TRUE(j[2]["clamped"].get<bool>());
}
