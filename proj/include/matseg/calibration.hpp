// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <json.hpp>

#include "matseg/imagery.hpp"

namespace matseg {

struct BandRange {
    double min = 0.0;
    double max = 0.0;
};

struct CalibrationReport {
    std::vector<BandRange> bands;  // over all images of the stack
    std::size_t clamped_pixels = 0;
    std::size_t total_pixels = 0;

    nlohmann::json to_json() const;
    bool operator==(const CalibrationReport& o) const;
};

/// L = gain * dn * (abscal_factor / effective_bandwidth) + offset
double dn_to_radiance_value(double dn, const BandSpec& band);

/// R = L * d^2 * pi / (E * cos(sun_zenith)), unclamped.
double radiance_to_reflectance_value(double radiance, const BandSpec& band,
                                     const ViewGeometry& geometry);

/// Per-band absolute calibration of a raw_dn image. No clamping.
MultispectralImage dn_to_radiance(const MultispectralImage& image);

/// TOA reflectance clamped to [0, 2]; the number of clamped values is added to
/// `clamped` when given.
MultispectralImage radiance_to_reflectance(const MultispectralImage& image,
                                           std::size_t* clamped = nullptr);

/// Both conversions for every image, parallel over images and pixels.
std::pair<ImageStack, CalibrationReport> calibrate_stack(const ImageStack& stack, int threads = 0);

namespace reference {
/// Serial calibration kept as the oracle for the parallel kernel.
std::pair<ImageStack, CalibrationReport> calibrate_stack(const ImageStack& stack);
}  // namespace reference

}  // namespace matseg
