// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "matseg/calibration.hpp"
#include "matseg/error.hpp"
#include "test_support.hpp"

namespace {

using namespace matseg;
using matseg::testutil::simple_band;
using matseg::testutil::simple_bands;
using matseg::testutil::simple_geometry;

BandSpec eq1_band() {
    BandSpec b = simple_band(0);
    b.gain = 0.95;
    b.abscal_factor = 0.012;
    b.effective_bandwidth = 0.06;
    b.offset = -2.5;
    return b;
}

ImageStack dn_stack(std::vector<float> dn, ViewGeometry g, int w, int h, int bands = 1) {
    return ImageStack("r", {MultispectralImage("d", w, h, PixelKind::raw_dn, simple_bands(bands), g, std::move(dn))});
}

TEST(Radiance, HandEvaluatedExample) {
    EXPECT_NEAR(dn_to_radiance_value(100.0, eq1_band()), 16.5, 1e-12);
}

TEST(Radiance, ZeroDnGivesOffsetAndIdentityConfiguration) {
    BandSpec b = eq1_band();
    EXPECT_EQ(dn_to_radiance_value(0.0, b), -2.5);
    b.gain = 1.0;
    b.abscal_factor = b.effective_bandwidth;
    b.offset = 0.0;
    EXPECT_EQ(dn_to_radiance_value(1234.5, b), 1234.5);
}

TEST(Radiance, MapIsAffine) {
    const BandSpec b = eq1_band();
    for (const double alpha : {0.0, 0.25, 0.5, 0.9}) {
        const double a = 37.0, c = 912.0;
        const double mixed = dn_to_radiance_value(alpha * a + (1 - alpha) * c, b);
        const double expected = alpha * dn_to_radiance_value(a, b) + (1 - alpha) * dn_to_radiance_value(c, b);
        EXPECT_NEAR(mixed, expected, 1e-12 * std::abs(expected));
    }
}

TEST(Radiance, MissingConstantsAndWrongKindAreRejected) {
    BandSpec b = eq1_band();
    b.gain = kUnset;
    EXPECT_THROW(dn_to_radiance_value(1.0, b), ValidationError);
    MultispectralImage refl("r", 1, 1, PixelKind::reflectance, simple_bands(1), simple_geometry(), {0.1f});
    EXPECT_THROW(dn_to_radiance(refl), ValidationError);
    EXPECT_THROW(radiance_to_reflectance(refl), ValidationError);
}

TEST(Reflectance, HandEvaluatedExample) {
    BandSpec b = simple_band(0);
    b.solar_irradiance = 1580.0;
    ViewGeometry g = simple_geometry(0.0, 30.0);
    g.earth_sun_distance = 1.0167;
    // 50 * 1.0167^2 * pi / (1580 * cos 30deg), evaluated independently.
    EXPECT_NEAR(radiance_to_reflectance_value(50.0, b, g), 0.11866367806989439, 1e-12);
}

TEST(Reflectance, ZeroAndUnitConstructions) {
    const BandSpec b = simple_band(0);
    const ViewGeometry g = simple_geometry(0.0, 40.0);
    EXPECT_EQ(radiance_to_reflectance_value(0.0, b, g), 0.0);
    const double unit = b.solar_irradiance * std::cos(40.0 * std::numbers::pi / 180.0) / std::numbers::pi;
    EXPECT_NEAR(radiance_to_reflectance_value(unit, b, g), 1.0, 1e-15);
}

TEST(Reflectance, ClampsAreCounted) {
    MultispectralImage rad("r", 3, 1, PixelKind::radiance, simple_bands(1), simple_geometry(0.0, 0.0),
                           {-5.0f, 100.0f, 1e6f});
    std::size_t clamped = 0;
    const auto out = radiance_to_reflectance(rad, &clamped);
    EXPECT_EQ(clamped, 2u);
    EXPECT_EQ(out.band(0)[0], 0.0f);
    EXPECT_EQ(out.band(0)[2], 2.0f);
    EXPECT_GT(out.band(0)[1], 0.0f);
    EXPECT_EQ(out.geometry(), rad.geometry());
}

TEST(Reflectance, RejectsBadIrradiance) {
    auto bands = simple_bands(1);
    bands[0].solar_irradiance = kUnset;
    MultispectralImage rad("r", 1, 1, PixelKind::radiance, bands, simple_geometry(), {1.0f});
    EXPECT_THROW(radiance_to_reflectance(rad), ValidationError);
}

TEST(CalibrateStack, IdenticalImagesGiveIdenticalOutputs) {
    const std::vector<float> dn{10, 20, 30, 40};
    const auto g = simple_geometry();
    const ImageStack stack("r", {MultispectralImage("a", 2, 2, PixelKind::raw_dn, simple_bands(1), g, dn),
                                 MultispectralImage("b", 2, 2, PixelKind::raw_dn, simple_bands(1), g, dn)});
    const auto [out, report] = calibrate_stack(stack);
    EXPECT_TRUE(std::equal(out.image(0).data().begin(), out.image(0).data().end(), out.image(1).data().begin()));
    EXPECT_EQ(out.kind(), PixelKind::reflectance);
    EXPECT_EQ(report.total_pixels, 8u);
    EXPECT_EQ(report.clamped_pixels, 0u);
}

TEST(CalibrateStack, SunZenithChangesOutputByCosineRatio) {
    const std::vector<float> dn{500, 800};
    const ImageStack stack("r", {MultispectralImage("a", 2, 1, PixelKind::raw_dn, simple_bands(1), simple_geometry(5, 20), dn),
                                 MultispectralImage("b", 2, 1, PixelKind::raw_dn, simple_bands(1), simple_geometry(5, 50), dn)});
    const auto [out, report] = calibrate_stack(stack);
    const double ratio = std::cos(20.0 * std::numbers::pi / 180) / std::cos(50.0 * std::numbers::pi / 180);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(out.image(1).at(0, i) / out.image(0).at(0, i), ratio, 1e-6);
    }
}

TEST(CalibrateStack, ErrorsNameTheImage) {
    auto g = simple_geometry();
    auto bands = simple_bands(1);
    bands[0].abscal_factor = kUnset;
    const ImageStack stack("r", {MultispectralImage("a", 1, 1, PixelKind::raw_dn, simple_bands(1), g, {1.0f}),
                                 MultispectralImage("b", 1, 1, PixelKind::raw_dn, bands, g, {1.0f})});
    try {
        calibrate_stack(stack);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("image 1"), std::string::npos) << e.what();
    }
}

TEST(CalibrateStack, ParallelMatchesSerialReference) {
    std::vector<MultispectralImage> images;
    SplitMix64 rng(8);
    for (int j = 0; j < 4; ++j) {
        std::vector<float> dn(3 * 17 * 13);
        for (auto& v : dn) v = static_cast<float>(4000.0 * rng.uniform());
        images.emplace_back("i" + std::to_string(j), 17, 13, PixelKind::raw_dn, simple_bands(3),
                            simple_geometry(3.0 * j, 20.0 + 10.0 * j), std::move(dn));
    }
    const ImageStack stack("r", std::move(images));
    const auto serial = reference::calibrate_stack(stack);
    for (const int threads : {1, 2, 4}) {
        const auto parallel = calibrate_stack(stack, threads);
        EXPECT_EQ(parallel.first, serial.first);
        EXPECT_EQ(parallel.second, serial.second);
    }
    EXPECT_GT(serial.second.clamped_pixels, 0u);
}

TEST(CalibrateStack, ReportSerializes) {
    const auto [out, report] = calibrate_stack(dn_stack({0, 1, 2, 3}, simple_geometry(), 2, 2));
    const auto j = report.to_json();
    EXPECT_EQ(j.at("total_pixels"), 4);
    EXPECT_EQ(j.at("bands").size(), 1u);
}

}  // namespace
