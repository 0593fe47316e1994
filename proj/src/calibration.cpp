// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "matseg/error.hpp"
#include "matseg/parallel.hpp"

namespace matseg {

namespace {

constexpr double kReflectanceMax = 2.0;

struct BandFactors {
    double scale = 1.0;   // radiance = scale * dn + offset
    double offset = 0.0;
    double to_reflectance = 1.0;
};

void require_constants(const BandSpec& b) {
    const std::string where = "band " + std::to_string(b.index) + " (" + b.name + ")";
    if (std::isnan(b.gain) || std::isnan(b.offset) || std::isnan(b.abscal_factor) ||
        std::isnan(b.effective_bandwidth)) {
        throw ValidationError(where + ": missing calibration constants");
    }
    if (!(b.effective_bandwidth > 0.0)) throw ValidationError(where + ": effective_bandwidth must be > 0");
}

double reflectance_factor(const BandSpec& b, const ViewGeometry& g) {
    const double cos_sun = std::cos(g.sun_zenith * std::numbers::pi / 180.0);
    if (!(cos_sun > 0.0)) throw ValidationError("sun below horizon (cos(sun_zenith) <= 0)");
    if (std::isnan(b.solar_irradiance) || !(b.solar_irradiance > 0.0)) {
        throw ValidationError("band " + std::to_string(b.index) + ": solar_irradiance must be > 0");
    }
    const double d = g.earth_sun_distance;
    return d * d * std::numbers::pi / (b.solar_irradiance * cos_sun);
}

std::vector<BandFactors> factors_for(const MultispectralImage& img) {
    std::vector<BandFactors> f(img.band_count());
    for (int b = 0; b < img.band_count(); ++b) {
        const auto& band = img.bands()[b];
        require_constants(band);
        f[b].scale = band.gain * band.abscal_factor / band.effective_bandwidth;
        f[b].offset = band.offset;
        f[b].to_reflectance = reflectance_factor(band, img.geometry());
    }
    return f;
}

void require_kind(const MultispectralImage& img, PixelKind kind) {
    if (img.kind() != kind) {
        throw ValidationError("expected pixel_kind " + std::string(to_string(kind)) + ", got " +
                              std::string(to_string(img.kind())));
    }
}

// DN -> radiance -> reflectance for one value, computed in double.
inline float calibrate_value(float dn, const BandFactors& f, std::size_t& clamped) {
    const double radiance = f.scale * static_cast<double>(dn) + f.offset;
    double r = radiance * f.to_reflectance;
    if (r < 0.0) {
        r = 0.0;
        ++clamped;
    } else if (r > kReflectanceMax) {
        r = kReflectanceMax;
        ++clamped;
    }
    return static_cast<float>(r);
}

CalibrationReport summarize(const ImageStack& out, std::size_t clamped) {
    CalibrationReport report;
    report.clamped_pixels = clamped;
    report.total_pixels = out.size() * out.pixel_count() * out.band_count();
    report.bands.assign(out.band_count(), {std::numeric_limits<double>::infinity(),
                                           -std::numeric_limits<double>::infinity()});
    for (const auto& img : out.images()) {
        for (int b = 0; b < img.band_count(); ++b) {
            const auto [lo, hi] = std::minmax_element(img.band(b).begin(), img.band(b).end());
            report.bands[b].min = std::min(report.bands[b].min, static_cast<double>(*lo));
            report.bands[b].max = std::max(report.bands[b].max, static_cast<double>(*hi));
        }
    }
    return report;
}

std::vector<std::vector<BandFactors>> stack_factors(const ImageStack& stack) {
    std::vector<std::vector<BandFactors>> all;
    for (std::size_t j = 0; j < stack.size(); ++j) {
        try {
            require_kind(stack.image(j), PixelKind::raw_dn);
            all.push_back(factors_for(stack.image(j)));
        } catch (const ValidationError& e) {
            throw ValidationError("image " + std::to_string(j) + ": " + e.what());
        }
    }
    return all;
}

}  // namespace

double dn_to_radiance_value(double dn, const BandSpec& band) {
    require_constants(band);
    return band.gain * dn * (band.abscal_factor / band.effective_bandwidth) + band.offset;
}

double radiance_to_reflectance_value(double radiance, const BandSpec& band,
                                     const ViewGeometry& geometry) {
    return radiance * reflectance_factor(band, geometry);
}

MultispectralImage dn_to_radiance(const MultispectralImage& image) {
    require_kind(image, PixelKind::raw_dn);
    std::vector<float> out(image.data().size());
    const std::size_t plane = image.pixel_count();
    for (int b = 0; b < image.band_count(); ++b) {
        const auto& band = image.bands()[b];
        require_constants(band);
        const auto in = image.band(b);
        for (std::size_t i = 0; i < plane; ++i) {
            out[b * plane + i] = static_cast<float>(dn_to_radiance_value(in[i], band));
        }
    }
    return image.with_data(PixelKind::radiance, std::move(out));
}

MultispectralImage radiance_to_reflectance(const MultispectralImage& image, std::size_t* clamped) {
    require_kind(image, PixelKind::radiance);
    std::vector<float> out(image.data().size());
    const std::size_t plane = image.pixel_count();
    std::size_t n_clamped = 0;
    for (int b = 0; b < image.band_count(); ++b) {
        const double factor = reflectance_factor(image.bands()[b], image.geometry());
        const auto in = image.band(b);
        for (std::size_t i = 0; i < plane; ++i) {
            double r = static_cast<double>(in[i]) * factor;
            if (r < 0.0 || r > kReflectanceMax) {
                r = std::clamp(r, 0.0, kReflectanceMax);
                ++n_clamped;
            }
            out[b * plane + i] = static_cast<float>(r);
        }
    }
    if (clamped) *clamped += n_clamped;
    return image.with_data(PixelKind::reflectance, std::move(out));
}

std::pair<ImageStack, CalibrationReport> calibrate_stack(const ImageStack& stack, int threads) {
    const auto factors = stack_factors(stack);
    const std::size_t plane = stack.pixel_count();
    const int bands = stack.band_count();
    const long long n_images = static_cast<long long>(stack.size());
    const long long planes = n_images * bands;

    std::vector<std::vector<float>> outputs(stack.size(), std::vector<float>(bands * plane));
    std::size_t clamped = 0;
#pragma omp parallel for schedule(static) reduction(+ : clamped) num_threads(resolve_threads(threads))
    for (long long p = 0; p < planes; ++p) {
        const auto j = static_cast<std::size_t>(p / bands);
        const int b = static_cast<int>(p % bands);
        const auto in = stack.image(j).band(b);
        float* dst = outputs[j].data() + b * plane;
        const BandFactors& f = factors[j][b];
        std::size_t local = 0;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = calibrate_value(in[i], f, local);
        clamped += local;
    }

    std::vector<MultispectralImage> images;
    images.reserve(stack.size());
    for (std::size_t j = 0; j < stack.size(); ++j) {
        images.push_back(stack.image(j).with_data(PixelKind::reflectance, std::move(outputs[j])));
    }
    ImageStack out(stack.region_id(), std::move(images));
    auto report = summarize(out, clamped);
    return {std::move(out), std::move(report)};
}

namespace reference {

std::pair<ImageStack, CalibrationReport> calibrate_stack(const ImageStack& stack) {
    const auto factors = stack_factors(stack);
    std::size_t clamped = 0;
    std::vector<MultispectralImage> images;
    for (std::size_t j = 0; j < stack.size(); ++j) {
        const auto& img = stack.image(j);
        std::vector<float> out(img.data().size());
        for (int b = 0; b < img.band_count(); ++b) {
            for (std::size_t i = 0; i < img.pixel_count(); ++i) {
                out[b * img.pixel_count() + i] = calibrate_value(img.at(b, i), factors[j][b], clamped);
            }
        }
        images.push_back(img.with_data(PixelKind::reflectance, std::move(out)));
    }
    ImageStack out(stack.region_id(), std::move(images));
    auto report = summarize(out, clamped);
    return {std::move(out), std::move(report)};
}

}  // namespace reference

nlohmann::json CalibrationReport::to_json() const {
    nlohmann::json j;
    j["clamped_pixels"] = clamped_pixels;
    j["total_pixels"] = total_pixels;
    j["bands"] = nlohmann::json::array();
    for (std::size_t b = 0; b < bands.size(); ++b) {
        j["bands"].push_back({{"index", b}, {"min", bands[b].min}, {"max", bands[b].max}});
    }
    return j;
}

bool CalibrationReport::operator==(const CalibrationReport& o) const {
    if (clamped_pixels != o.clamped_pixels || total_pixels != o.total_pixels ||
        bands.size() != o.bands.size()) {
        return false;
    }
    for (std::size_t b = 0; b < bands.size(); ++b) {
        if (bands[b].min != o.bands[b].min || bands[b].max != o.bands[b].max) return false;
    }
    return true;
}

}  // namespace matseg
