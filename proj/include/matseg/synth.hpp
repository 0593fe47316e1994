// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "matseg/brdf.hpp"
#include "matseg/imagery.hpp"

namespace matseg {

struct NoiseSpec {
    std::vector<double> gaussian_sigma;  // per band; a single value applies to all bands
    double gain_jitter = 0.0;            // sigma of the per-image multiplicative gain

    double sigma(int band) const;
};

/// Everything needed to render a synthetic registered stack.
struct SceneSpec {
    int width = 0;
    int height = 0;
    std::vector<int> material_map;  // row-major dictionary indices
    std::vector<ViewGeometry> views;
    std::vector<BandSpec> bands;    // defaults to worldview3_bands() when empty
    NoiseSpec noise;
    std::optional<std::uint64_t> seed;
    std::string region_id = "synthetic";

    void validate(std::size_t dictionary_size) const;
    nlohmann::json to_json() const;
    /// Accepts either an explicit `material_map` array or a
    /// `material_voronoi: {cells, classes, seed}` generator.
    static SceneSpec from_json(const nlohmann::json& j);
};

struct SceneBundle {
    ImageStack stack;      // reflectance
    LabelMask truth;       // material map, palette = dictionary names
    SegmentMask segments;  // 4-connected components of the material map
};

/// Eight WorldView-3 style multispectral bands (coastal .. NIR2) with
/// representative calibration constants.
std::vector<BandSpec> worldview3_bands();

/// Five-material dictionary over the WorldView-3 band centers: three
/// lambertian surfaces and two glossy ones whose diffuse spectra resemble
/// lambertian entries.
BrdfDictionary default_dictionary();

/// N views with off-nadir angles spread over [2, 40) degrees and a sun that
/// moves a few degrees between acquisitions.
std::vector<ViewGeometry> default_views(std::size_t n, std::uint64_t seed);

/// Voronoi partition with `cells` seeded sites, each labeled uniformly in [0, classes).
std::vector<int> voronoi_material_map(int width, int height, std::size_t cells, std::size_t classes,
                                      std::uint64_t seed);

/// 4-connected components of equal material, numbered from 1 in raster order of
/// their first pixel.
SegmentMask connected_components(int width, int height, std::span<const int> material_map);

/// observed = m_material(view angles) * gain_j + noise, clamped to [0, 2].
/// gain_j uses SplitMix64::stream(seed, 2^32 + j); pixel p draws its N*Λ
/// noise values (image-major, band-minor) from SplitMix64::stream(seed, p).
SceneBundle render(const SceneSpec& spec, const BrdfDictionary& dict, int threads = 0);

/// Raw digital numbers that calibrate back to render(spec, dict).stack.
ImageStack render_dn(const SceneSpec& spec, const BrdfDictionary& dict, int threads = 0);

/// Inverts both calibration steps for one value.
double reflectance_to_dn(double reflectance, const BandSpec& band, const ViewGeometry& geometry);

namespace reference {
SceneBundle render(const SceneSpec& spec, const BrdfDictionary& dict);
}  // namespace reference

}  // namespace matseg
