// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numbers>
#include <set>

#include "matseg/encoder.hpp"
#include "matseg/error.hpp"
#include "matseg/rng.hpp"
#include "matseg/synth.hpp"
#include "test_support.hpp"

namespace {

using namespace matseg;
using matseg::testutil::random_stack;

std::vector<AngleSample> random_angles(std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<AngleSample> a;
    for (std::size_t j = 0; j < n; ++j) {
        a.push_back(make_angle_sample(40 * rng.uniform(), 360 * rng.uniform(), 20 + 20 * rng.uniform(), 130 + 30 * rng.uniform()));
    }
    return a;
}

/// Noise-free observation of entry k at the given angles.
PixelSampleSet render_entry(const BrdfDictionary& dict, std::size_t k, const std::vector<AngleSample>& angles, int bands) {
    PixelSampleSet p;
    p.bands = bands;
    p.angles = angles;
    for (const auto& a : angles) {
        for (int b = 0; b < bands; ++b) p.reflectance.push_back(dict.sample(k, a, b));
    }
    return p;
}

BrdfDictionary bound_default() { return default_dictionary().bind(worldview3_bands()); }

TEST(Residual, ScalarSingleView) {
    const DictionarySamples s{1, 1, 1, {0.5}};
    const std::vector<double> f{0.7};
    std::vector<double> r(1);
    compute_residual(f, s, r);
    EXPECT_NEAR(r[0], 0.08, 1e-12);
}

TEST(Residual, ScalarTwoViews) {
    const DictionarySamples s{2, 1, 1, {0.5, 0.5}};
    const std::vector<double> f{0.7, 0.3};
    std::vector<double> r(1);
    compute_residual(f, s, r);
    EXPECT_NEAR(r[0], 0.08, 1e-12);
}

TEST(Residual, TinyDictionaryValuesAreFloored) {
    const DictionarySamples s{1, 1, 1, {0.0}};
    const std::vector<double> f{0.001};
    std::vector<double> r(1);
    compute_residual(f, s, r);
    EXPECT_NEAR(r[0], 1e-6 / kResidualFloor, 1e-12);
    EXPECT_TRUE(std::isfinite(r[0]));
}

TEST(Residual, TrueEntryIsZeroAndOthersPositive) {
    const auto dict = bound_default();
    for (const std::size_t n : {1u, 4u, 15u}) {
        const auto angles = random_angles(n, 100 + n);
        for (std::size_t k = 0; k < dict.size(); ++k) {
            const auto r = compute_residual(render_entry(dict, k, angles, 8), dict);
            EXPECT_EQ(r.best_match(), k);
            for (int b = 0; b < 8; ++b) EXPECT_EQ(r.at(k, b), 0.0);
            for (std::size_t other = 0; other < dict.size(); ++other) {
                if (other != k) EXPECT_GT(r.total(other), 0.0);
            }
        }
    }
}

TEST(Residual, InvariantUnderImagePermutation) {
    const auto dict = bound_default();
    auto pixel = render_entry(dict, 2, random_angles(6, 3), 8);
    SplitMix64 rng(4);
    for (auto& v : pixel.reflectance) v += 0.01 * rng.normal();
    const auto base = compute_residual(pixel, dict);
    std::vector<std::size_t> order{5, 3, 0, 1, 4, 2};
    PixelSampleSet shuffled;
    shuffled.bands = 8;
    for (const auto j : order) {
        shuffled.angles.push_back(pixel.angles[j]);
        const auto row = pixel.row(j);
        shuffled.reflectance.insert(shuffled.reflectance.end(), row.begin(), row.end());
    }
    const auto perm = compute_residual(shuffled, dict);
    for (std::size_t i = 0; i < base.values.size(); ++i) EXPECT_NEAR(perm.values[i], base.values[i], 1e-15);
}

TEST(Residual, ExpectedTrueResidualGrowsWithNoise) {
    const auto dict = bound_default();
    const auto angles = random_angles(8, 5);
    const auto clean = render_entry(dict, 1, angles, 8);
    double previous = -1.0;
    for (const double sigma : {0.0, 0.005, 0.01, 0.02, 0.04}) {
        SplitMix64 rng(6);
        double mean = 0.0;
        for (int t = 0; t < 200; ++t) {
            auto noisy = clean;
            for (auto& v : noisy.reflectance) v += sigma * rng.normal();
            mean += compute_residual(noisy, dict).total(1);
        }
        EXPECT_GE(mean, previous);
        previous = mean;
    }
}

TEST(Residual, UnboundDictionaryIsRejected) {
    const auto pixel = render_entry(bound_default(), 0, random_angles(2, 1), 8);
    EXPECT_THROW(compute_residual(pixel, default_dictionary()), ValidationError);
}

TEST(Mssa, RepeatsEachValueFourTimes) {
    EXPECT_EQ(encode_mssa(std::vector<double>{1.5, 2.5}), (std::vector<double>{1.5, 1.5, 1.5, 1.5, 2.5, 2.5, 2.5, 2.5}));
    EXPECT_EQ(encode_mssa(std::vector<double>(3, 0.0)), std::vector<double>(12, 0.0));
    SplitMix64 rng(7);
    std::vector<double> row(8);
    for (auto& v : row) v = rng.uniform();
    const auto f = encode_mssa(row);
    ASSERT_EQ(f.size(), 32u);
    for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(f[i], row[i / 4]);
}

TEST(Msma, FullSelectionIsSortedByViewZenith) {
    const auto angles = random_angles(6, 8);
    const auto sel = select_msma_images(angles, 6, 1);
    ASSERT_EQ(sel.size(), 6u);
    EXPECT_TRUE(std::is_sorted(sel.begin(), sel.end(), [&](auto a, auto b) { return angles[a].view_zenith < angles[b].view_zenith; }));
    EXPECT_EQ(std::set<std::size_t>(sel.begin(), sel.end()).size(), 6u);
}

TEST(Msma, SingleImageIsVerbatim) {
    const auto dict = bound_default();
    const auto pixel = render_entry(dict, 3, random_angles(5, 9), 8);
    const auto f = encode_msma(pixel, 1, 77);
    ASSERT_EQ(f.source_images.size(), 1u);
    const auto row = pixel.row(f.source_images[0]);
    EXPECT_EQ(f.values, std::vector<double>(row.begin(), row.end()));
}

TEST(Msma, SeededAndCoversAllSubsets) {
    const auto angles = random_angles(4, 10);
    EXPECT_EQ(select_msma_images(angles, 2, 5, 3), select_msma_images(angles, 2, 5, 3));
    std::set<std::vector<std::size_t>> subsets;
    std::map<std::vector<std::size_t>, int> counts;
    for (std::uint64_t seed = 0; seed < 600; ++seed) {
        auto s = select_msma_images(angles, 2, seed);
        std::sort(s.begin(), s.end());
        ++counts[s];
    }
    EXPECT_EQ(counts.size(), 6u);
    for (const auto& [subset, c] : counts) EXPECT_GT(c, 60) << "subset drawn too rarely";
}

TEST(Msma, KLargerThanNIsRejected) {
    EXPECT_THROW(select_msma_images(random_angles(3, 1), 4, 1), ValidationError);
    EXPECT_THROW(select_msma_images(random_angles(3, 1), 0, 1), ValidationError);
}

TEST(EncodeTile, OnePixelMatchesPerPixelOperations) {
    const ImageStack stack = random_stack(1, 1, 8, 5, 11);
    const auto dict = default_dictionary();
    // random_stack bands are not WV3 centers; bind to whatever the stack carries.
    const auto bound = dict.bind(stack.bands());
    const auto pixel = pixel_samples(stack, 0);

    EncodeOptions rr;
    const auto g = encode_tile(stack, dict, rr);
    const auto r = compute_residual(pixel, bound);
    ASSERT_EQ(g.feature_len, 40u);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(g.values[i], static_cast<float>(r.values[i]));

    EncodeOptions mssa{EncodingMode::mssa, 15, std::nullopt, 2};
    const auto gm = encode_tile(stack, dict, mssa);
    const auto m = encode_mssa(pixel.row(2));
    for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(gm.values[i], static_cast<float>(m[i]));

    EncodeOptions msma{EncodingMode::msma, 3, 99, 0};
    const auto ga = encode_tile(stack, dict, msma);
    const auto a = encode_msma(pixel, 3, 99, 0);
    for (std::size_t i = 0; i < 24; ++i) EXPECT_EQ(ga.values[i], static_cast<float>(a.values[i]));
}

TEST(EncodeTile, ConstantStackGivesConstantGrid) {
    std::vector<MultispectralImage> images;
    for (int j = 0; j < 3; ++j) {
        std::vector<float> data(4 * 3 * 2);
        for (int b = 0; b < 2; ++b) std::fill(data.begin() + b * 12, data.begin() + (b + 1) * 12, 0.1f * (b + 1) + 0.05f * j);
        auto g = testutil::simple_geometry(5.0 + 10 * j);
        images.emplace_back("i", 4, 3, PixelKind::reflectance, testutil::simple_bands(2), g, std::move(data));
    }
    const ImageStack stack("c", std::move(images));
    for (const auto mode : {EncodingMode::mssa, EncodingMode::msma, EncodingMode::rr}) {
        EncodeOptions o{mode, 3, 5, 0};
        const auto grid = encode_tile(stack, default_dictionary(), o);
        if (mode == EncodingMode::msma) continue;  // subsets differ per pixel, values do not
        for (std::size_t p = 1; p < grid.pixel_count(); ++p) {
            EXPECT_TRUE(std::equal(grid.feature(p).begin(), grid.feature(p).end(), grid.feature(0).begin()));
        }
    }
}

TEST(EncodeTile, ParallelMatchesReference) {
    const ImageStack stack = random_stack(13, 11, 8, 6, 12);
    const auto dict = default_dictionary();
    for (const auto mode : {EncodingMode::mssa, EncodingMode::msma, EncodingMode::rr}) {
        EncodeOptions o{mode, 4, 21, 1};
        const auto serial = reference::encode_tile(stack, dict, o);
        for (const int threads : {1, 3}) EXPECT_EQ(encode_tile(stack, dict, o, threads), serial);
    }
}

TEST(EncodeTile, RequiresReflectanceAndSeed) {
    const ImageStack raw = random_stack(2, 2, 8, 2, 1, PixelKind::raw_dn);
    EXPECT_THROW(encode_tile(raw, default_dictionary(), EncodeOptions{}), ValidationError);
    const ImageStack refl = random_stack(2, 2, 8, 2, 1);
    EXPECT_THROW(encode_tile(refl, default_dictionary(), EncodeOptions{EncodingMode::msma, 2, std::nullopt, 0}), ValidationError);
    EXPECT_THROW(encode_tile(refl, default_dictionary(), EncodeOptions{EncodingMode::mssa, 2, std::nullopt, 5}), ValidationError);
}

}  // namespace
