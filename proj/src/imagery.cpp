// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/imagery.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "matseg/error.hpp"
#include "matseg/raw_io.hpp"

namespace matseg {

std::string_view to_string(PixelKind kind) noexcept {
    switch (kind) {
        case PixelKind::raw_dn: return "raw_dn";
        case PixelKind::radiance: return "radiance";
        case PixelKind::reflectance: return "reflectance";
    }
    return "unknown";
}

PixelKind parse_pixel_kind(std::string_view text) {
    if (text == "raw_dn") return PixelKind::raw_dn;
    if (text == "radiance") return PixelKind::radiance;
    if (text == "reflectance") return PixelKind::reflectance;
    throw FormatError("unknown pixel_kind '" + std::string(text) + "'");
}

void validate_geometry(const ViewGeometry& g) {
    auto zenith_ok = [](double z) { return std::isfinite(z) && z >= 0.0 && z < 90.0; };
    auto azimuth_ok = [](double a) { return std::isfinite(a) && a >= 0.0 && a < 360.0; };
    if (!zenith_ok(g.view_zenith)) throw ValidationError("view_zenith must lie in [0, 90)");
    if (!azimuth_ok(g.view_azimuth)) throw ValidationError("view_azimuth must lie in [0, 360)");
    if (!azimuth_ok(g.sun_azimuth)) throw ValidationError("sun_azimuth must lie in [0, 360)");
    if (!zenith_ok(g.sun_zenith) || std::cos(g.sun_zenith * std::numbers::pi / 180.0) <= 0.0) {
        throw ValidationError("sun below horizon (sun_zenith must lie in [0, 90))");
    }
    if (!(g.earth_sun_distance >= 0.98 && g.earth_sun_distance <= 1.02)) {
        throw ValidationError("earth_sun_distance must lie in [0.98, 1.02] AU");
    }
}

void validate_bands(std::span<const BandSpec> bands) {
    if (bands.empty()) throw ValidationError("image has no bands");
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const auto& spec = bands[b];
        if (spec.index != static_cast<int>(b)) {
            throw ValidationError("band indices must be contiguous from 0 (band " +
                                  std::to_string(b) + " has index " +
                                  std::to_string(spec.index) + ")");
        }
        if (!std::isnan(spec.effective_bandwidth) && !(spec.effective_bandwidth > 0.0)) {
            throw ValidationError("band " + std::to_string(b) + ": effective_bandwidth must be > 0");
        }
        if (!std::isnan(spec.solar_irradiance) && !(spec.solar_irradiance > 0.0)) {
            throw ValidationError("band " + std::to_string(b) + ": solar_irradiance must be > 0");
        }
    }
}

MultispectralImage::MultispectralImage(std::string id, int width, int height, PixelKind kind,
                                       std::vector<BandSpec> bands, ViewGeometry geometry,
                                       std::vector<float> data)
    : id_(std::move(id)),
      width_(width),
      height_(height),
      kind_(kind),
      bands_(std::move(bands)),
      geometry_(std::move(geometry)),
      data_(std::move(data)) {
    if (width_ < 1 || height_ < 1) throw ValidationError("image dimensions must be positive");
    validate_bands(bands_);
    validate_geometry(geometry_);
    if (data_.size() != bands_.size() * pixel_count()) {
        throw ValidationError("image data holds " + std::to_string(data_.size()) +
                              " values, expected " + std::to_string(bands_.size() * pixel_count()));
    }
    for (const float v : data_) {
        if (!std::isfinite(v)) throw ValidationError("image contains non-finite values");
        if (kind_ == PixelKind::reflectance && (v < 0.0f || v > 2.0f)) {
            throw ValidationError("reflectance values must lie in [0, 2]");
        }
        if (kind_ == PixelKind::raw_dn && v < 0.0f) {
            throw ValidationError("raw_dn values must be non-negative");
        }
    }
}

std::span<const float> MultispectralImage::band(int b) const {
    if (b < 0 || b >= band_count()) throw ValidationError("band index out of range");
    return std::span<const float>(data_).subspan(b * pixel_count(), pixel_count());
}

MultispectralImage MultispectralImage::with_data(PixelKind kind, std::vector<float> data) const {
    return MultispectralImage(id_, width_, height_, kind, bands_, geometry_, std::move(data));
}

bool MultispectralImage::operator==(const MultispectralImage& o) const {
    // Bitwise comparison of pixel data so that round trips are checked exactly.
    return id_ == o.id_ && width_ == o.width_ && height_ == o.height_ && kind_ == o.kind_ &&
           bands_.size() == o.bands_.size() &&
           std::equal(bands_.begin(), bands_.end(), o.bands_.begin(),
                      [](const BandSpec& a, const BandSpec& b) {
                          auto same = [](double x, double y) {
                              return std::memcmp(&x, &y, sizeof(double)) == 0;
                          };
                          return a.index == b.index && a.name == b.name &&
                                 same(a.center_wavelength, b.center_wavelength) &&
                                 same(a.solar_irradiance, b.solar_irradiance) &&
                                 same(a.gain, b.gain) && same(a.offset, b.offset) &&
                                 same(a.abscal_factor, b.abscal_factor) &&
                                 same(a.effective_bandwidth, b.effective_bandwidth);
                      }) &&
           geometry_ == o.geometry_ && data_.size() == o.data_.size() &&
           (data_.empty() ||
            std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(float)) == 0);
}

ImageStack::ImageStack(std::string region_id, std::vector<MultispectralImage> images)
    : region_id_(std::move(region_id)), images_(std::move(images)) {
    if (images_.empty()) throw ValidationError("image stack must contain at least one image");
    const auto& first = images_.front();
    for (std::size_t j = 1; j < images_.size(); ++j) {
        const auto& img = images_[j];
        const std::string where = "image " + std::to_string(j);
        if (img.width() != first.width() || img.height() != first.height()) {
            throw ValidationError(where + ": registration error, size " +
                                  std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                                  " differs from " + std::to_string(first.width()) + "x" +
                                  std::to_string(first.height()));
        }
        if (img.band_count() != first.band_count()) {
            throw ValidationError(where + ": band count differs from image 0");
        }
        for (int b = 0; b < img.band_count(); ++b) {
            if (img.bands()[b].name != first.bands()[b].name) {
                throw ValidationError(where + ": band names differ from image 0");
            }
        }
        if (img.kind() != first.kind()) throw ValidationError(where + ": pixel_kind differs");
    }
}

void LabelMask::validate() const {
    if (width < 1 || height < 1) throw ValidationError("mask dimensions must be positive");
    if (labels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ValidationError("mask grid size does not match width*height");
    }
    if (palette.size() > kMaxClasses) throw ValidationError("at most 254 classes are supported");
    for (const auto v : labels) {
        if (v != kUnlabeled && v >= palette.size()) {
            throw ValidationError("mask contains class index " + std::to_string(v) +
                                  " but the palette has " + std::to_string(palette.size()) +
                                  " classes");
        }
    }
}

void SegmentMask::validate() const {
    if (width < 1 || height < 1) throw ValidationError("segment mask dimensions must be positive");
    if (segment_ids.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ValidationError("segment grid size does not match width*height");
    }
}

// ---------------------------------------------------------------------------
// Stack manifest

namespace {

json band_to_json(const BandSpec& b) {
    auto num = [](double v) -> json { return std::isnan(v) ? json(nullptr) : json(v); };
    return {{"index", b.index},
            {"name", b.name},
            {"center_wavelength", num(b.center_wavelength)},
            {"solar_irradiance", num(b.solar_irradiance)},
            {"gain", num(b.gain)},
            {"offset", num(b.offset)},
            {"abscal_factor", num(b.abscal_factor)},
            {"effective_bandwidth", num(b.effective_bandwidth)}};
}

double optional_number(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return kUnset;
    if (!j.at(key).is_number()) throw FormatError(std::string("field '") + key + "' is not a number");
    return j.at(key).get<double>();
}

BandSpec band_from_json(const json& j) {
    BandSpec b;
    b.index = j.at("index").get<int>();
    b.name = j.at("name").get<std::string>();
    b.center_wavelength = optional_number(j, "center_wavelength");
    b.solar_irradiance = optional_number(j, "solar_irradiance");
    b.gain = optional_number(j, "gain");
    b.offset = optional_number(j, "offset");
    b.abscal_factor = optional_number(j, "abscal_factor");
    b.effective_bandwidth = optional_number(j, "effective_bandwidth");
    return b;
}

json geometry_to_json(const ViewGeometry& g) {
    return {{"view_zenith", g.view_zenith},
            {"view_azimuth", g.view_azimuth},
            {"sun_zenith", g.sun_zenith},
            {"sun_azimuth", g.sun_azimuth},
            {"earth_sun_distance", g.earth_sun_distance},
            {"acquisition_time", g.acquisition_time}};
}

ViewGeometry geometry_from_json(const json& j) {
    ViewGeometry g;
    g.view_zenith = j.at("view_zenith").get<double>();
    g.view_azimuth = j.at("view_azimuth").get<double>();
    g.sun_zenith = j.at("sun_zenith").get<double>();
    g.sun_azimuth = j.at("sun_azimuth").get<double>();
    g.earth_sun_distance = j.at("earth_sun_distance").get<double>();
    g.acquisition_time = j.value("acquisition_time", std::string{});
    return g;
}

fs::path manifest_path(const fs::path& p) {
    return fs::is_directory(p) ? p / "stack.json" : p;
}

}  // namespace

json view_geometry_to_json(const ViewGeometry& g) { return geometry_to_json(g); }
ViewGeometry view_geometry_from_json(const json& j) { return geometry_from_json(j); }
json band_spec_to_json(const BandSpec& b) { return band_to_json(b); }
BandSpec band_spec_from_json(const json& j) { return band_from_json(j); }

ImageStack load_stack(const fs::path& manifest_or_dir) {
    const fs::path manifest = manifest_path(manifest_or_dir);
    const fs::path dir = manifest.parent_path();
    const json doc = read_json_file(manifest);

    std::vector<BandSpec> bands;
    int width = 0;
    int height = 0;
    PixelKind kind{};
    std::string region;
    try {
        region = doc.at("region_id").get<std::string>();
        width = doc.at("width").get<int>();
        height = doc.at("height").get<int>();
        kind = parse_pixel_kind(doc.at("pixel_kind").get<std::string>());
        for (const auto& jb : doc.at("bands")) bands.push_back(band_from_json(jb));
        if (!doc.at("images").is_array() || doc.at("images").empty()) {
            throw FormatError("'images' must be a non-empty array");
        }
    } catch (const json::exception& e) {
        throw FormatError(manifest.string() + ": malformed manifest: " + e.what());
    }
    if (width < 1 || height < 1) throw FormatError(manifest.string() + ": bad dimensions");
    try {
        validate_bands(bands);
    } catch (const ValidationError& e) {
        throw ValidationError(manifest.string() + ": " + e.what());
    }

    const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<MultispectralImage> images;
    const auto& jimages = doc.at("images");
    for (std::size_t j = 0; j < jimages.size(); ++j) {
        const std::string where = manifest.string() + ": image " + std::to_string(j);
        const auto& ji = jimages[j];
        std::string id;
        ViewGeometry geometry;
        std::vector<std::string> files;
        int iw = width;
        int ih = height;
        try {
            id = ji.at("id").get<std::string>();
            geometry = geometry_from_json(ji.at("geometry"));
            files = ji.at("band_files").get<std::vector<std::string>>();
            iw = ji.value("width", width);
            ih = ji.value("height", height);
        } catch (const json::exception& e) {
            throw FormatError(where + ": malformed entry: " + e.what());
        }
        if (iw != width || ih != height) {
            throw ValidationError(where + ": registration error, size " + std::to_string(iw) + "x" +
                                  std::to_string(ih) + " differs from stack size " +
                                  std::to_string(width) + "x" + std::to_string(height));
        }
        if (files.size() != bands.size()) {
            throw FormatError(where + ": lists " + std::to_string(files.size()) +
                              " band files for " + std::to_string(bands.size()) + " bands");
        }
        std::vector<float> data;
        data.reserve(plane * bands.size());
        for (const auto& f : files) {
            const fs::path path = dir / f;
            if (!fs::exists(path)) throw IoError(where + ": missing band file " + path.string());
            std::vector<float> values;
            try {
                values = read_f32_le(path, plane);
            } catch (const FormatError& e) {
                throw ValidationError(where + ": registration error: " + e.what());
            }
            data.insert(data.end(), values.begin(), values.end());
        }
        try {
            images.emplace_back(id, width, height, kind, bands, geometry, std::move(data));
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return ImageStack(region, std::move(images));
}

fs::path save_stack(const ImageStack& stack, const fs::path& dir) {
    fs::create_directories(dir);
    json doc;
    doc["region_id"] = stack.region_id();
    doc["width"] = stack.width();
    doc["height"] = stack.height();
    doc["pixel_kind"] = std::string(to_string(stack.kind()));
    doc["bands"] = json::array();
    for (const auto& b : stack.bands()) doc["bands"].push_back(band_to_json(b));
    doc["images"] = json::array();
    for (std::size_t j = 0; j < stack.size(); ++j) {
        const auto& img = stack.image(j);
        json ji;
        ji["id"] = img.id();
        ji["geometry"] = geometry_to_json(img.geometry());
        ji["band_files"] = json::array();
        for (int b = 0; b < img.band_count(); ++b) {
            const std::string name = "image_" + std::to_string(j) + "_band_" + std::to_string(b) + ".f32";
            write_f32_le(dir / name, img.band(b));
            ji["band_files"].push_back(name);
        }
        doc["images"].push_back(std::move(ji));
    }
    const fs::path manifest = dir / "stack.json";
    write_json_file(manifest, doc);
    return manifest;
}

// ---------------------------------------------------------------------------
// Masks

namespace {

fs::path sidecar(const fs::path& header, const char* ext) {
    fs::path p = header;
    p.replace_extension(ext);
    return p;
}

}  // namespace

LabelMask load_mask(const fs::path& header) {
    const json doc = read_json_file(header);
    LabelMask mask;
    std::string grid;
    try {
        mask.width = doc.at("width").get<int>();
        mask.height = doc.at("height").get<int>();
        mask.palette = doc.at("palette").get<std::vector<std::string>>();
        grid = doc.value("grid_file", sidecar(header, ".u8").filename().string());
    } catch (const json::exception& e) {
        throw FormatError(header.string() + ": malformed mask header: " + e.what());
    }
    if (mask.width < 1 || mask.height < 1) throw FormatError(header.string() + ": bad dimensions");
    mask.labels = read_u8(header.parent_path() / grid,
                          static_cast<std::size_t>(mask.width) * static_cast<std::size_t>(mask.height));
    try {
        mask.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(header.string() + ": " + e.what());
    }
    return mask;
}

void save_mask(const LabelMask& mask, const fs::path& header) {
    mask.validate();
    if (header.has_parent_path()) fs::create_directories(header.parent_path());
    const fs::path grid = sidecar(header, ".u8");
    write_u8(grid, mask.labels);
    write_json_file(header, {{"width", mask.width},
                             {"height", mask.height},
                             {"palette", mask.palette},
                             {"grid_file", grid.filename().string()}});
}

SegmentMask load_segments(const fs::path& header) {
    const json doc = read_json_file(header);
    SegmentMask seg;
    std::string grid;
    try {
        seg.width = doc.at("width").get<int>();
        seg.height = doc.at("height").get<int>();
        grid = doc.value("grid_file", sidecar(header, ".u32").filename().string());
    } catch (const json::exception& e) {
        throw FormatError(header.string() + ": malformed segment header: " + e.what());
    }
    if (seg.width < 1 || seg.height < 1) throw FormatError(header.string() + ": bad dimensions");
    seg.segment_ids = read_u32_le(header.parent_path() / grid,
                                  static_cast<std::size_t>(seg.width) * static_cast<std::size_t>(seg.height));
    return seg;
}

void save_segments(const SegmentMask& seg, const fs::path& header) {
    seg.validate();
    if (header.has_parent_path()) fs::create_directories(header.parent_path());
    const fs::path grid = sidecar(header, ".u32");
    write_u32_le(grid, seg.segment_ids);
    write_json_file(header, {{"width", seg.width},
                             {"height", seg.height},
                             {"grid_file", grid.filename().string()}});
}

}  // namespace matseg
