// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "matseg/error.hpp"
#include "matseg/parallel.hpp"
#include "matseg/rng.hpp"

namespace matseg {

void PixelSampleSet::validate() const {
    if (angles.empty()) throw ValidationError("pixel sample set needs at least one image");
    if (bands < 1) throw ValidationError("pixel sample set needs at least one band");
    if (reflectance.size() != angles.size() * static_cast<std::size_t>(bands)) {
        throw ValidationError("pixel sample set rows do not match its angle list");
    }
}

PixelSampleSet pixel_samples(const ImageStack& stack, std::size_t pixel) {
    PixelSampleSet s;
    s.bands = stack.band_count();
    s.reflectance.reserve(stack.size() * s.bands);
    for (const auto& img : stack.images()) {
        for (int b = 0; b < s.bands; ++b) s.reflectance.push_back(img.at(b, pixel));
        s.angles.push_back(angles_of(img.geometry()));
    }
    return s;
}

double ReflectanceResidual::total(std::size_t k) const {
    double sum = 0.0;
    for (int b = 0; b < bands; ++b) sum += at(k, b);
    return sum;
}

std::size_t ReflectanceResidual::best_match() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < dictionary_size; ++k) {
        if (total(k) < total(best)) best = k;
    }
    return best;
}

DictionarySamples sample_dictionary(const BrdfDictionary& dict, std::span<const AngleSample> angles,
                                    int bands) {
    dict.require_bands(bands);
    DictionarySamples s{angles.size(), dict.size(), bands, {}};
    s.values.resize(angles.size() * dict.size() * bands);
    std::size_t i = 0;
    for (const auto& a : angles) {
        for (std::size_t k = 0; k < dict.size(); ++k) {
            for (int b = 0; b < bands; ++b) s.values[i++] = dict.sample(k, a, b);
        }
    }
    return s;
}

void compute_residual(std::span<const double> reflectance, const DictionarySamples& samples,
                      std::span<double> out) {
    const std::size_t n = samples.images;
    const std::size_t d = samples.entries;
    const auto bands = static_cast<std::size_t>(samples.bands);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double* f = reflectance.data() + j * bands;
        const double* m = samples.values.data() + j * d * bands;
        for (std::size_t k = 0; k < d; ++k) {
            for (std::size_t b = 0; b < bands; ++b) {
                const double mk = m[k * bands + b];
                const double diff = mk - f[b];
                out[k * bands + b] += diff * diff / std::max(mk, kResidualFloor);
            }
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= inv_n;
}

ReflectanceResidual compute_residual(const PixelSampleSet& pixel, const BrdfDictionary& dict) {
    pixel.validate();
    const auto samples = sample_dictionary(dict, pixel.angles, pixel.bands);
    ReflectanceResidual r{dict.size(), pixel.bands, std::vector<double>(dict.size() * pixel.bands)};
    compute_residual(pixel.reflectance, samples, r.values);
    return r;
}

std::vector<double> encode_mssa(std::span<const double> row) {
    std::vector<double> out;
    out.reserve(row.size() * 4);
    for (const double v : row) out.insert(out.end(), 4, v);
    return out;
}

std::vector<std::size_t> select_msma_images(std::span<const AngleSample> angles, std::size_t k,
                                            std::uint64_t seed, std::uint64_t stream) {
    const std::size_t n = angles.size();
    if (k < 1 || k > n) {
        throw ValidationError("msma needs 1 <= k <= N (k=" + std::to_string(k) + ", N=" +
                              std::to_string(n) + ")");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = SplitMix64::stream(seed, stream);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (angles[a].view_zenith != angles[b].view_zenith) {
            return angles[a].view_zenith < angles[b].view_zenith;
        }
        return a < b;
    });
    return idx;
}

MsmaFeature encode_msma(const PixelSampleSet& pixel, std::size_t k, std::uint64_t seed,
                        std::uint64_t stream) {
    pixel.validate();
    MsmaFeature f;
    f.source_images = select_msma_images(pixel.angles, k, seed, stream);
    f.values.reserve(k * pixel.bands);
    for (const auto j : f.source_images) {
        const auto row = pixel.row(j);
        f.values.insert(f.values.end(), row.begin(), row.end());
    }
    return f;
}

std::size_t feature_length(EncodingMode mode, int bands, std::size_t k, std::size_t dictionary_size) {
    switch (mode) {
        case EncodingMode::mssa: return 4 * static_cast<std::size_t>(bands);
        case EncodingMode::msma: return k * static_cast<std::size_t>(bands);
        case EncodingMode::rr: return dictionary_size * static_cast<std::size_t>(bands);
    }
    return 0;
}

namespace {

void check_tile_inputs(const ImageStack& stack, const EncodeOptions& opt) {
    if (stack.kind() != PixelKind::reflectance) {
        throw ValidationError("encoding needs a reflectance stack (got " +
                              std::string(to_string(stack.kind())) + "); calibrate it first");
    }
    if (opt.mode == EncodingMode::mssa && opt.image >= stack.size()) {
        throw ValidationError("mssa source image " + std::to_string(opt.image) + " out of range");
    }
    if (opt.mode == EncodingMode::msma) {
        if (!opt.seed) throw ValidationError("msma encoding requires an explicit seed");
        if (opt.k < 1 || opt.k > stack.size()) {
            throw ValidationError("msma needs 1 <= k <= N (k=" + std::to_string(opt.k) +
                                  ", N=" + std::to_string(stack.size()) + ")");
        }
    }
}

FeatureGrid empty_grid(const ImageStack& stack, const EncodeOptions& opt, std::size_t dict_size) {
    FeatureGrid g;
    g.width = stack.width();
    g.height = stack.height();
    g.mode = opt.mode;
    g.feature_len = feature_length(opt.mode, stack.band_count(), opt.k, dict_size);
    g.values.resize(g.pixel_count() * g.feature_len);
    return g;
}

template <typename Vec>
void store(float* dst, const Vec& src) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
}

}  // namespace

FeatureGrid encode_tile(const ImageStack& stack, const BrdfDictionary& dict, const EncodeOptions& opt,
                        int threads) {
    check_tile_inputs(stack, opt);
    const BrdfDictionary bound = opt.mode == EncodingMode::rr ? dict.bind(stack.bands()) : dict;
    FeatureGrid grid = empty_grid(stack, opt, bound.size());
    const auto n_pixels = static_cast<long long>(grid.pixel_count());
    const int bands = stack.band_count();
    const std::size_t n = stack.size();

    std::vector<AngleSample> angles;
    for (const auto& img : stack.images()) angles.push_back(angles_of(img.geometry()));
    // Flat-surface model: every pixel shares the same angle set.
    const DictionarySamples samples = opt.mode == EncodingMode::rr
                                          ? sample_dictionary(bound, angles, bands)
                                          : DictionarySamples{};

#pragma omp parallel num_threads(resolve_threads(threads))
    {
        std::vector<double> refl(n * bands);
        std::vector<double> feature(grid.feature_len);
#pragma omp for schedule(static)
        for (long long p = 0; p < n_pixels; ++p) {
            const auto pixel = static_cast<std::size_t>(p);
            float* dst = grid.values.data() + pixel * grid.feature_len;
            switch (opt.mode) {
                case EncodingMode::mssa: {
                    const auto& img = stack.image(opt.image);
                    for (int b = 0; b < bands; ++b) {
                        const float v = img.at(b, pixel);
                        for (int r = 0; r < 4; ++r) dst[4 * b + r] = v;
                    }
                    break;
                }
                case EncodingMode::msma: {
                    const auto chosen = select_msma_images(angles, opt.k, *opt.seed, pixel);
                    std::size_t i = 0;
                    for (const auto j : chosen) {
                        for (int b = 0; b < bands; ++b) dst[i++] = stack.image(j).at(b, pixel);
                    }
                    break;
                }
                case EncodingMode::rr: {
                    for (std::size_t j = 0; j < n; ++j) {
                        for (int b = 0; b < bands; ++b) refl[j * bands + b] = stack.image(j).at(b, pixel);
                    }
                    compute_residual(refl, samples, feature);
                    store(dst, feature);
                    break;
                }
            }
        }
    }
    return grid;
}

namespace reference {

FeatureGrid encode_tile(const ImageStack& stack, const BrdfDictionary& dict, const EncodeOptions& opt) {
    check_tile_inputs(stack, opt);
    const BrdfDictionary bound = opt.mode == EncodingMode::rr ? dict.bind(stack.bands()) : dict;
    FeatureGrid grid = empty_grid(stack, opt, bound.size());
    for (std::size_t p = 0; p < grid.pixel_count(); ++p) {
        const PixelSampleSet pixel = pixel_samples(stack, p);
        float* dst = grid.values.data() + p * grid.feature_len;
        switch (opt.mode) {
            case EncodingMode::mssa:
                store(dst, encode_mssa(pixel.row(opt.image)));
                break;
            case EncodingMode::msma:
                store(dst, encode_msma(pixel, opt.k, *opt.seed, p).values);
                break;
            case EncodingMode::rr:
                store(dst, compute_residual(pixel, bound).values);
                break;
        }
    }
    return grid;
}

}  // namespace reference

}  // namespace matseg
