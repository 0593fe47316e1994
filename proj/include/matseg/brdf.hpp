// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "matseg/imagery.hpp"

namespace matseg {

/// One (view, illumination) direction pair in degrees. Zeniths lie in [0, 90),
/// azimuths are normalized to [0, 360).
struct AngleSample {
    double view_zenith = 0.0;
    double view_azimuth = 0.0;
    double illum_zenith = 0.0;
    double illum_azimuth = 0.0;

    bool operator==(const AngleSample&) const = default;
};

double normalize_azimuth(double degrees) noexcept;

/// Validates zeniths and normalizes azimuths.
AngleSample make_angle_sample(double view_zenith, double view_azimuth, double illum_zenith,
                              double illum_azimuth);

/// Flat-surface model: local angles equal the image's global angles.
AngleSample angles_of(const ViewGeometry& geometry);

/// f = albedo / pi
struct LambertianModel {
    std::vector<double> albedo;  // per wavelength, in [0, 1]
};

/// Lambertian plus a normalized Phong lobe around the mirror direction:
/// f = diffuse / pi + specular * (exponent + 2) / (2 pi) * max(0, cos a)^exponent
struct GlossyModel {
    std::vector<double> diffuse;  // per wavelength, in [0, 1]
    double specular = 0.0;        // k_s >= 0, wavelength independent
    double exponent = 1.0;        // n >= 1
};

/// Dense measured table over (view zenith, view azimuth, illum zenith,
/// illum azimuth, wavelength), stored with the view zenith varying slowest and
/// the wavelength fastest. Zenith axes clamp, azimuth axes wrap at 360.
struct TabulatedModel {
    std::array<std::vector<double>, 4> axes;  // vz, va, iz, ia
    std::vector<float> values;

    std::size_t index(std::size_t vz, std::size_t va, std::size_t iz, std::size_t ia,
                      std::size_t wl, std::size_t n_wavelengths) const noexcept {
        return (((vz * axes[1].size() + va) * axes[2].size() + iz) * axes[3].size() + ia) *
                   n_wavelengths + wl;
    }
};

class Brdf {
public:
    using Model = std::variant<LambertianModel, GlossyModel, TabulatedModel>;

    Brdf(std::string name, std::vector<double> wavelengths, Model model);

    const std::string& name() const noexcept { return name_; }
    const std::vector<double>& wavelengths() const noexcept { return wavelengths_; }
    const Model& model() const noexcept { return model_; }
    std::string_view kind() const noexcept;

    /// Reflectance value at one wavelength index; never negative.
    double sample(const AngleSample& angles, std::size_t wavelength) const;

    bool operator==(const Brdf&) const;

private:
    std::string name_;
    std::vector<double> wavelengths_;
    Model model_;
};

/// Ordered dictionary of material BRDFs sharing one wavelength list, plus the
/// map from image band index to dictionary wavelength index.
class BrdfDictionary {
public:
    BrdfDictionary() = default;
    explicit BrdfDictionary(std::vector<Brdf> entries, std::vector<int> band_map = {});

    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<Brdf>& entries() const noexcept { return entries_; }
    const Brdf& entry(std::size_t k) const { return entries_.at(k); }
    const std::vector<double>& wavelengths() const noexcept { return entries_.front().wavelengths(); }
    const std::vector<int>& band_map() const noexcept { return band_map_; }
    std::vector<std::string> names() const;

    /// Nearest-wavelength band map for the given image bands unless this
    /// dictionary already carries an explicit map.
    BrdfDictionary bind(std::span<const BandSpec> bands) const;

    /// Throws ValidationError unless the band map covers exactly `bands` image bands.
    void require_bands(int bands) const;

    double sample(std::size_t k, const AngleSample& angles, int band) const;
    std::vector<double> sample_set(std::size_t k, std::span<const AngleSample> angles, int band) const;

    bool operator==(const BrdfDictionary&) const = default;

private:
    std::vector<Brdf> entries_;
    std::vector<int> band_map_;
};

/// Index of the nearest dictionary wavelength for every band center.
std::vector<int> nearest_band_map(std::span<const BandSpec> bands, std::span<const double> wavelengths);

BrdfDictionary load_dictionary(const std::filesystem::path& path);
/// Writes the JSON header and, for tabulated entries, `<stem>.<k>.f32` sidecars.
void save_dictionary(const BrdfDictionary& dict, const std::filesystem::path& path);

}  // namespace matseg
