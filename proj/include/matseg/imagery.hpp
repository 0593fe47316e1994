// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace matseg {

enum class PixelKind { raw_dn, radiance, reflectance };

std::string_view to_string(PixelKind kind) noexcept;
PixelKind parse_pixel_kind(std::string_view text);

inline constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

/// One spectral band of a sensor with its absolute calibration constants.
/// Constants that a stack does not carry are NaN; calibration refuses them.
struct BandSpec {
    int index = 0;
    std::string name;
    double center_wavelength = kUnset;   // nm
    double solar_irradiance = kUnset;    // W m^-2 um^-1
    double gain = kUnset;
    double offset = kUnset;              // radiance units
    double abscal_factor = kUnset;
    double effective_bandwidth = kUnset; // um

    bool operator==(const BandSpec&) const = default;
};

/// Global acquisition geometry of one image. Azimuths are measured clockwise
/// from north and point from the ground toward the sensor / the sun.
struct ViewGeometry {
    double view_zenith = 0.0;
    double view_azimuth = 0.0;
    double sun_zenith = 0.0;
    double sun_azimuth = 0.0;
    double earth_sun_distance = 1.0;  // AU
    std::string acquisition_time;

    bool operator==(const ViewGeometry&) const = default;
};

/// Throws ValidationError if angles or the Earth-Sun distance are out of range.
void validate_geometry(const ViewGeometry& geometry);

/// Validates positivity of irradiance/bandwidth when present and contiguous indices.
void validate_bands(std::span<const BandSpec> bands);

/// Planar multispectral raster. Band b occupies
/// data[b*width*height, (b+1)*width*height) in row-major order.
class MultispectralImage {
public:
    MultispectralImage() = default;
    MultispectralImage(std::string id, int width, int height, PixelKind kind,
                       std::vector<BandSpec> bands, ViewGeometry geometry,
                       std::vector<float> data);

    const std::string& id() const noexcept { return id_; }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    int band_count() const noexcept { return static_cast<int>(bands_.size()); }
    PixelKind kind() const noexcept { return kind_; }
    const std::vector<BandSpec>& bands() const noexcept { return bands_; }
    const ViewGeometry& geometry() const noexcept { return geometry_; }

    std::span<const float> band(int b) const;
    std::span<const float> data() const noexcept { return data_; }
    float at(int b, std::size_t pixel) const { return data_[b * pixel_count() + pixel]; }

    /// Same id, size, bands and geometry with new pixel values.
    MultispectralImage with_data(PixelKind kind, std::vector<float> data) const;

    bool operator==(const MultispectralImage& other) const;

private:
    std::string id_;
    int width_ = 0;
    int height_ = 0;
    PixelKind kind_ = PixelKind::raw_dn;
    std::vector<BandSpec> bands_;
    ViewGeometry geometry_;
    std::vector<float> data_;
};

/// N pixel-registered images of one region.
class ImageStack {
public:
    ImageStack() = default;
    ImageStack(std::string region_id, std::vector<MultispectralImage> images);

    const std::string& region_id() const noexcept { return region_id_; }
    const std::vector<MultispectralImage>& images() const noexcept { return images_; }
    const MultispectralImage& image(std::size_t j) const { return images_.at(j); }
    std::size_t size() const noexcept { return images_.size(); }
    int width() const noexcept { return images_.front().width(); }
    int height() const noexcept { return images_.front().height(); }
    std::size_t pixel_count() const noexcept { return images_.front().pixel_count(); }
    int band_count() const noexcept { return images_.front().band_count(); }
    const std::vector<BandSpec>& bands() const noexcept { return images_.front().bands(); }
    PixelKind kind() const noexcept { return images_.front().kind(); }

    bool operator==(const ImageStack&) const = default;

private:
    std::string region_id_;
    std::vector<MultispectralImage> images_;
};

inline constexpr std::uint8_t kUnlabeled = 255;
inline constexpr std::size_t kMaxClasses = 254;

struct LabelMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;  // row-major, kUnlabeled for missing truth
    std::vector<std::string> palette;  // class names; size is C

    std::size_t classes() const noexcept { return palette.size(); }
    std::size_t pixel_count() const noexcept { return labels.size(); }
    void validate() const;
    bool operator==(const LabelMask&) const = default;
};

struct SegmentMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> segment_ids;  // 0 = background

    void validate() const;
    bool operator==(const SegmentMask&) const = default;
};

// JSON field mapping shared by stack manifests and scene specs.
nlohmann::json view_geometry_to_json(const ViewGeometry& geometry);
ViewGeometry view_geometry_from_json(const nlohmann::json& j);
nlohmann::json band_spec_to_json(const BandSpec& band);
BandSpec band_spec_from_json(const nlohmann::json& j);

// Stack directory: stack.json + one float32 file per image per band.
ImageStack load_stack(const std::filesystem::path& manifest_or_dir);
std::filesystem::path save_stack(const ImageStack& stack, const std::filesystem::path& dir);

// Masks: JSON header + raw grid sidecar next to it.
LabelMask load_mask(const std::filesystem::path& header);
void save_mask(const LabelMask& mask, const std::filesystem::path& header);
SegmentMask load_segments(const std::filesystem::path& header);
void save_segments(const SegmentMask& segments, const std::filesystem::path& header);

}  // namespace matseg
