// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "matseg/brdf.hpp"
#include "matseg/error.hpp"
#include "matseg/raw_io.hpp"
#include "matseg/rng.hpp"
#include "test_support.hpp"

namespace {

using namespace matseg;
using matseg::testutil::simple_bands;
using matseg::testutil::TempDir;

AngleSample any_angles() { return make_angle_sample(17.0, 250.0, 33.0, 140.0); }

/// 3 x 4 x 2 x 3 grid, 2 wavelengths, values from a seeded generator.
TabulatedModel random_table(std::uint64_t seed) {
    TabulatedModel t;
    t.axes = {std::vector<double>{0.0, 30.0, 60.0}, std::vector<double>{0.0, 90.0, 180.0, 270.0},
              std::vector<double>{10.0, 50.0}, std::vector<double>{0.0, 120.0, 240.0}};
    SplitMix64 rng(seed);
    t.values.resize(3 * 4 * 2 * 3 * 2);
    for (auto& v : t.values) v = static_cast<float>(rng.uniform());
    return t;
}

TEST(Lambertian, ClosedForm) {
    const Brdf b("white", {500.0}, LambertianModel{{0.3}});
    EXPECT_NEAR(b.sample(any_angles(), 0), 0.095493, 1e-6);
    EXPECT_EQ(b.sample(any_angles(), 0), 0.3 / std::numbers::pi);
    EXPECT_EQ(b.kind(), "lambertian");
}

TEST(Glossy, PeaksAtTheMirrorDirection) {
    const GlossyModel m{{0.2}, 0.5, 20.0};
    const Brdf b("g", {500.0}, m);
    const double peak = b.sample(make_angle_sample(30.0, 0.0, 30.0, 180.0), 0);
    EXPECT_NEAR(peak, 0.2 / std::numbers::pi + 0.5 * 22.0 / (2 * std::numbers::pi), 1e-12);
    EXPECT_LT(b.sample(make_angle_sample(30.0, 90.0, 30.0, 180.0), 0), peak);
    EXPECT_GT(b.sample(make_angle_sample(30.0, 90.0, 30.0, 180.0), 0), 0.2 / std::numbers::pi - 1e-15);
}

TEST(Tabulated, ReproducesGridNodes) {
    const auto t = random_table(1);
    const Brdf b("t", {500.0, 600.0}, t);
    for (std::size_t vz = 0; vz < 3; ++vz)
        for (std::size_t va = 0; va < 4; ++va)
            for (std::size_t iz = 0; iz < 2; ++iz)
                for (std::size_t ia = 0; ia < 3; ++ia)
                    for (std::size_t wl = 0; wl < 2; ++wl) {
                        const auto a = make_angle_sample(t.axes[0][vz], t.axes[1][va], t.axes[2][iz], t.axes[3][ia]);
                        ASSERT_EQ(b.sample(a, wl), t.values[t.index(vz, va, iz, ia, wl, 2)]);
                    }
}

TEST(Tabulated, MidpointAlongOneAxisIsTheMean) {
    const auto t = random_table(2);
    const Brdf b("t", {500.0, 600.0}, t);
    const double expected = 0.5 * (static_cast<double>(t.values[t.index(0, 1, 1, 2, 1, 2)]) +
                                   static_cast<double>(t.values[t.index(1, 1, 1, 2, 1, 2)]));
    EXPECT_NEAR(b.sample(make_angle_sample(15.0, 90.0, 50.0, 240.0), 1), expected, 1e-12);
    // Between the last azimuth node (270) and the wrapped first node (360 = 0).
    const double wrap = 0.5 * (static_cast<double>(t.values[t.index(1, 3, 0, 0, 0, 2)]) +
                               static_cast<double>(t.values[t.index(1, 0, 0, 0, 0, 2)]));
    EXPECT_NEAR(b.sample(make_angle_sample(30.0, 315.0, 10.0, 0.0), 0), wrap, 1e-12);
}

TEST(Tabulated, ZenithBeyondLastNodeClamps) {
    const auto t = random_table(3);
    const Brdf b("t", {500.0, 600.0}, t);
    EXPECT_EQ(b.sample(make_angle_sample(80.0, 0.0, 5.0, 0.0), 0), t.values[t.index(2, 0, 0, 0, 0, 2)]);
}

TEST(Tabulated, AzimuthIsPeriodic) {
    const Brdf b("t", {500.0, 600.0}, random_table(4));
    SplitMix64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const double vz = 80 * rng.uniform(), va = 360 * rng.uniform(), iz = 80 * rng.uniform(), ia = 360 * rng.uniform();
        const double a = b.sample(make_angle_sample(vz, va, iz, ia), 1);
        EXPECT_NEAR(a, b.sample(make_angle_sample(vz, va + 360.0, iz, ia - 360.0), 1), 1e-12);
    }
}

TEST(Tabulated, BoundedByEnclosingCell) {
    const auto t = random_table(6);
    const Brdf b("t", {500.0, 600.0}, t);
    SplitMix64 rng(7);
    for (int i = 0; i < 500; ++i) {
        const double vz = 60 * rng.uniform(), va = 270 * rng.uniform(), iz = 10 + 40 * rng.uniform(),
                     ia = 240 * rng.uniform();
        auto lo = [](const std::vector<double>& ax, double x) {
            return static_cast<std::size_t>(std::upper_bound(ax.begin(), ax.end(), x) - ax.begin() - 1);
        };
        const std::size_t c[4] = {lo(t.axes[0], vz), lo(t.axes[1], va), lo(t.axes[2], iz), lo(t.axes[3], ia)};
        double mn = 1e9, mx = -1e9;
        for (int corner = 0; corner < 16; ++corner) {
            std::size_t idx[4];
            for (int ax = 0; ax < 4; ++ax) {
                idx[ax] = std::min(c[ax] + ((corner >> ax) & 1), t.axes[ax].size() - 1);
            }
            const double v = t.values[t.index(idx[0], idx[1], idx[2], idx[3], 0, 2)];
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        const double s = b.sample(make_angle_sample(vz, va, iz, ia), 0);
        EXPECT_GE(s, mn - 1e-12);
        EXPECT_LE(s, mx + 1e-12);
    }
}

TEST(Tabulated, ContinuousInEveryAngle) {
    const auto t = random_table(8);
    const Brdf b("t", {500.0, 600.0}, t);
    const auto [mn, mx] = std::minmax_element(t.values.begin(), t.values.end());
    const double range = *mx - *mn;
    SplitMix64 rng(9);
    for (int i = 0; i < 200; ++i) {
        double a[4] = {70 * rng.uniform(), 360 * rng.uniform(), 70 * rng.uniform(), 360 * rng.uniform()};
        const double base = b.sample(make_angle_sample(a[0], a[1], a[2], a[3]), 0);
        for (int ax = 0; ax < 4; ++ax) {
            double d[4] = {a[0], a[1], a[2], a[3]};
            d[ax] += 1e-3;
            const double moved = b.sample(make_angle_sample(d[0], d[1], d[2], d[3]), 0);
            EXPECT_LT(std::abs(moved - base), 1e-4 * range);
        }
    }
}

TEST(Brdf, InvalidModelsAreRejected) {
    EXPECT_THROW(Brdf("x", {500.0}, LambertianModel{{1.5}}), ValidationError);
    EXPECT_THROW(Brdf("x", {500.0}, GlossyModel{{0.2}, -1.0, 10.0}), ValidationError);
    EXPECT_THROW(Brdf("x", {500.0}, GlossyModel{{0.2}, 0.1, 0.5}), ValidationError);
    auto t = random_table(1);
    t.axes[0] = {0.0, 30.0, 30.0};
    EXPECT_THROW(Brdf("x", {500.0, 600.0}, t), ValidationError);
    t = random_table(1);
    t.values[3] = -0.1f;
    EXPECT_THROW(Brdf("x", {500.0, 600.0}, t), ValidationError);
    EXPECT_THROW(make_angle_sample(95.0, 0.0, 10.0, 0.0), ValidationError);
}

TEST(SampleSet, ElementWiseAndOrdered) {
    const BrdfDictionary dict({Brdf("l", {500.0}, LambertianModel{{0.4}}), Brdf("g", {500.0}, GlossyModel{{0.1}, 0.3, 8.0})}, {0});
    EXPECT_TRUE(dict.sample_set(0, {}, 0).empty());
    const std::vector<AngleSample> same(3, any_angles());
    const auto rep = dict.sample_set(1, same, 0);
    EXPECT_EQ(rep[0], rep[1]);
    EXPECT_EQ(rep[1], rep[2]);
    SplitMix64 rng(10);
    std::vector<AngleSample> angles;
    for (int i = 0; i < 15; ++i) angles.push_back(make_angle_sample(60 * rng.uniform(), 360 * rng.uniform(), 60 * rng.uniform(), 360 * rng.uniform()));
    for (const double v : dict.sample_set(0, angles, 0)) EXPECT_EQ(v, 0.4 / std::numbers::pi);
    const auto g = dict.sample_set(1, angles, 0);
    for (std::size_t i = 0; i < angles.size(); ++i) EXPECT_EQ(g[i], dict.sample(1, angles[i], 0));
}

TEST(Dictionary, NearestWavelengthBandMap) {
    const BrdfDictionary dict({Brdf("l", {450.0, 550.0, 650.0}, LambertianModel{{0.1, 0.2, 0.3}})});
    auto bands = simple_bands(3);
    bands[0].center_wavelength = 440.0;
    bands[1].center_wavelength = 640.0;
    bands[2].center_wavelength = 560.0;
    const auto bound = dict.bind(bands);
    EXPECT_EQ(bound.band_map(), (std::vector<int>{0, 2, 1}));
    EXPECT_EQ(bound.sample(0, any_angles(), 1), 0.3 / std::numbers::pi);
    EXPECT_THROW(bound.require_bands(4), ValidationError);
    EXPECT_THROW(dict.sample(0, any_angles(), 0), ValidationError);
}

TEST(Dictionary, ExplicitBandMapWins) {
    const BrdfDictionary dict({Brdf("l", {450.0, 550.0}, LambertianModel{{0.1, 0.2}})}, {1, 1});
    EXPECT_EQ(dict.bind(simple_bands(2)).band_map(), (std::vector<int>{1, 1}));
    EXPECT_THROW(BrdfDictionary({Brdf("l", {450.0}, LambertianModel{{0.1}})}, {0, 3}), ValidationError);
}

TEST(Dictionary, SaveLoadRoundTrip) {
    TempDir dir;
    const BrdfDictionary dict({Brdf("lam", {500.0, 600.0}, LambertianModel{{0.1, 0.2}}),
                               Brdf("glo", {500.0, 600.0}, GlossyModel{{0.3, 0.25}, 0.2, 12.0}),
                               Brdf("tab", {500.0, 600.0}, random_table(11)),
                               Brdf("lam2", {500.0, 600.0}, LambertianModel{{0.5, 0.6}}),
                               Brdf("tab2", {500.0, 600.0}, random_table(12))});
    save_dictionary(dict, dir / "dict.json");
    const auto back = load_dictionary(dir / "dict.json");
    EXPECT_EQ(back, dict);
    ASSERT_EQ(back.size(), 5u);
    EXPECT_EQ(back.names(), (std::vector<std::string>{"lam", "glo", "tab", "lam2", "tab2"}));
}

TEST(Dictionary, SingleEntryAndMalformedFiles) {
    TempDir dir;
    write_json_file(dir / "one.json", json{{"entries", {{{"name", "w"}, {"kind", "lambertian"}, {"wavelengths", {500.0}}, {"params", {{"albedo", {0.5}}}}}}}});
    EXPECT_EQ(load_dictionary(dir / "one.json").size(), 1u);
    write_json_file(dir / "bad.json", json{{"entries", json::array()}});
    EXPECT_THROW(load_dictionary(dir / "bad.json"), Error);
    write_json_file(dir / "neg.json", json{{"entries", {{{"name", "w"}, {"kind", "lambertian"}, {"wavelengths", {500.0}}, {"params", {{"albedo", {-0.5}}}}}}}});
    EXPECT_THROW(load_dictionary(dir / "neg.json"), ValidationError);
}

}  // namespace
