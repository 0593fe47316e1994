// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "matseg/brdf.hpp"
#include "matseg/grids.hpp"
#include "matseg/imagery.hpp"

namespace matseg {

/// Observed reflectance of one pixel in N images (row j = image j, Λ values)
/// together with the angles each image sampled the surface at.
struct PixelSampleSet {
    int bands = 0;
    std::vector<double> reflectance;  // N x bands, row-major
    std::vector<AngleSample> angles;  // N

    std::size_t size() const noexcept { return angles.size(); }
    std::span<const double> row(std::size_t j) const {
        return std::span<const double>(reflectance).subspan(j * bands, bands);
    }
    void validate() const;
};

/// Samples of `pixel` across the stack under the flat-surface angle model.
PixelSampleSet pixel_samples(const ImageStack& stack, std::size_t pixel);

/// d x Λ residual matrix, flattened k-major.
struct ReflectanceResidual {
    std::size_t dictionary_size = 0;
    int bands = 0;
    std::vector<double> values;

    double at(std::size_t k, int band) const { return values[k * bands + band]; }
    /// Sum over bands of entry k.
    double total(std::size_t k) const;
    /// Entry with the smallest total; lowest index on ties.
    std::size_t best_match() const;
};

/// Dictionary denominators smaller than this are floored to it.
inline constexpr double kResidualFloor = 1e-6;

/// Dictionary values m_{k,λ}(a_j) for one angle set, laid out [j][k][λ].
struct DictionarySamples {
    std::size_t images = 0;
    std::size_t entries = 0;
    int bands = 0;
    std::vector<double> values;
};

DictionarySamples sample_dictionary(const BrdfDictionary& dict, std::span<const AngleSample> angles,
                                    int bands);

/// r_{k,λ} = 1/N * sum_j (m_{k,λ}(a_j) - f_λ(a_j))^2 / m_{k,λ}(a_j)
ReflectanceResidual compute_residual(const PixelSampleSet& pixel, const BrdfDictionary& dict);

/// Residual kernel over precomputed dictionary samples; `out` holds d*Λ values.
void compute_residual(std::span<const double> reflectance, const DictionarySamples& samples,
                      std::span<double> out);

/// Nearest-neighbour 4x upsampling of one band vector.
std::vector<double> encode_mssa(std::span<const double> row);

struct MsmaFeature {
    std::vector<double> values;               // k * Λ
    std::vector<std::size_t> source_images;   // ascending view zenith
};

/// k of the N images without replacement, ordered by view zenith (then index).
std::vector<std::size_t> select_msma_images(std::span<const AngleSample> angles, std::size_t k,
                                            std::uint64_t seed, std::uint64_t stream = 0);

/// Draws use SplitMix64::stream(seed, stream); encode_tile passes the pixel index.
MsmaFeature encode_msma(const PixelSampleSet& pixel, std::size_t k, std::uint64_t seed,
                        std::uint64_t stream = 0);

struct EncodeOptions {
    EncodingMode mode = EncodingMode::rr;
    std::size_t k = 15;                 // msma
    std::optional<std::uint64_t> seed;  // msma; required
    std::size_t image = 0;              // mssa source image
};

std::size_t feature_length(EncodingMode mode, int bands, std::size_t k, std::size_t dictionary_size);

/// Encodes every pixel of a reflectance stack. The dictionary is only used in
/// rr mode and is bound to the stack's bands first.
FeatureGrid encode_tile(const ImageStack& stack, const BrdfDictionary& dict,
                        const EncodeOptions& options, int threads = 0);

namespace reference {
/// Pixel-by-pixel serial encoder built directly on the per-pixel operations.
FeatureGrid encode_tile(const ImageStack& stack, const BrdfDictionary& dict,
                        const EncodeOptions& options);
}  // namespace reference

}  // namespace matseg
