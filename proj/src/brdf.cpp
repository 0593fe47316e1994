// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/brdf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "matseg/error.hpp"
#include "matseg/raw_io.hpp"

namespace matseg {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct AxisWeight {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double t = 0.0;
};

AxisWeight zenith_weight(const std::vector<double>& axis, double q) {
    const std::size_t n = axis.size();
    if (n == 1 || q <= axis.front()) return {0, 0, 0.0};
    if (q >= axis.back()) return {n - 1, n - 1, 0.0};
    const auto hi = static_cast<std::size_t>(std::upper_bound(axis.begin(), axis.end(), q) - axis.begin());
    const std::size_t lo = hi - 1;
    return {lo, hi, (q - axis[lo]) / (axis[hi] - axis[lo])};
}

AxisWeight azimuth_weight(const std::vector<double>& axis, double q) {
    const std::size_t n = axis.size();
    if (n == 1) return {0, 0, 0.0};
    q = normalize_azimuth(q);
    if (q < axis.front()) {
        const double lo = axis.back() - 360.0;
        return {n - 1, 0, (q - lo) / (axis.front() - lo)};
    }
    if (q >= axis.back()) {
        return {n - 1, 0, (q - axis.back()) / (axis.front() + 360.0 - axis.back())};
    }
    const auto hi = static_cast<std::size_t>(std::upper_bound(axis.begin(), axis.end(), q) - axis.begin());
    const std::size_t lo = hi - 1;
    return {lo, hi, (q - axis[lo]) / (axis[hi] - axis[lo])};
}

double sample_table(const TabulatedModel& m, const AngleSample& a, std::size_t wl, std::size_t n_wl) {
    const AxisWeight w[4] = {zenith_weight(m.axes[0], a.view_zenith),
                             azimuth_weight(m.axes[1], a.view_azimuth),
                             zenith_weight(m.axes[2], a.illum_zenith),
                             azimuth_weight(m.axes[3], a.illum_azimuth)};
    double acc = 0.0;
    for (int corner = 0; corner < 16; ++corner) {
        double weight = 1.0;
        std::size_t idx[4];
        for (int axis = 0; axis < 4; ++axis) {
            const bool upper = (corner >> axis) & 1;
            idx[axis] = upper ? w[axis].hi : w[axis].lo;
            weight *= upper ? w[axis].t : 1.0 - w[axis].t;
        }
        if (weight == 0.0) continue;
        acc += weight * m.values[m.index(idx[0], idx[1], idx[2], idx[3], wl, n_wl)];
    }
    return std::max(acc, 0.0);
}

std::array<double, 3> direction(double zenith_deg, double azimuth_deg) {
    const double z = zenith_deg * kDegToRad;
    const double a = azimuth_deg * kDegToRad;
    return {std::sin(z) * std::cos(a), std::sin(z) * std::sin(a), std::cos(z)};
}

double sample_glossy(const GlossyModel& m, const AngleSample& a, std::size_t wl) {
    const auto v = direction(a.view_zenith, a.view_azimuth);
    const auto l = direction(a.illum_zenith, a.illum_azimuth);
    // Mirror of the illumination direction about the up normal.
    const double cos_alpha = -v[0] * l[0] - v[1] * l[1] + v[2] * l[2];
    const double lobe = cos_alpha > 0.0 ? std::pow(cos_alpha, m.exponent) : 0.0;
    return m.diffuse[wl] / std::numbers::pi +
           m.specular * (m.exponent + 2.0) / (2.0 * std::numbers::pi) * lobe;
}

void check_unit_interval(const std::vector<double>& v, const std::string& what, std::size_t n_wl) {
    if (v.size() != n_wl) throw ValidationError(what + " must have one value per wavelength");
    for (const double x : v) {
        if (!(x >= 0.0 && x <= 1.0)) throw ValidationError(what + " values must lie in [0, 1]");
    }
}

void check_axis(const std::vector<double>& axis, bool azimuth, const std::string& what) {
    if (axis.empty()) throw ValidationError(what + " axis is empty");
    for (std::size_t i = 0; i < axis.size(); ++i) {
        const double x = axis[i];
        const bool in_range = azimuth ? (x >= 0.0 && x < 360.0) : (x >= 0.0 && x <= 90.0);
        if (!std::isfinite(x) || !in_range) throw ValidationError(what + " axis value out of range");
        if (i > 0 && !(x > axis[i - 1])) throw ValidationError(what + " axis must be strictly increasing");
    }
}

void validate_model(const Brdf::Model& model, std::size_t n_wl, const std::string& name) {
    if (const auto* l = std::get_if<LambertianModel>(&model)) {
        check_unit_interval(l->albedo, name + ": albedo", n_wl);
    } else if (const auto* g = std::get_if<GlossyModel>(&model)) {
        check_unit_interval(g->diffuse, name + ": diffuse", n_wl);
        if (!(g->specular >= 0.0)) throw ValidationError(name + ": specular strength must be >= 0");
        if (!(g->exponent >= 1.0)) throw ValidationError(name + ": exponent must be >= 1");
    } else {
        const auto& t = std::get<TabulatedModel>(model);
        static const char* kAxisNames[4] = {"view_zenith", "view_azimuth", "illum_zenith", "illum_azimuth"};
        std::size_t expected = n_wl;
        for (int a = 0; a < 4; ++a) {
            check_axis(t.axes[a], a % 2 == 1, name + ": " + kAxisNames[a]);
            expected *= t.axes[a].size();
        }
        if (t.values.size() != expected) {
            throw ValidationError(name + ": table holds " + std::to_string(t.values.size()) +
                                  " values, expected " + std::to_string(expected));
        }
        for (const float v : t.values) {
            if (!std::isfinite(v) || v < 0.0f) throw ValidationError(name + ": table has negative or non-finite values");
        }
    }
}

}  // namespace

double normalize_azimuth(double degrees) noexcept {
    double a = std::fmod(degrees, 360.0);
    if (a < 0.0) a += 360.0;
    if (a >= 360.0) a = 0.0;
    return a;
}

AngleSample make_angle_sample(double vz, double va, double iz, double ia) {
    if (!(vz >= 0.0 && vz < 90.0) || !(iz >= 0.0 && iz < 90.0)) {
        throw ValidationError("zenith angles must lie in [0, 90)");
    }
    if (!std::isfinite(va) || !std::isfinite(ia)) throw ValidationError("azimuths must be finite");
    return {vz, normalize_azimuth(va), iz, normalize_azimuth(ia)};
}

AngleSample angles_of(const ViewGeometry& g) {
    return make_angle_sample(g.view_zenith, g.view_azimuth, g.sun_zenith, g.sun_azimuth);
}

Brdf::Brdf(std::string name, std::vector<double> wavelengths, Model model)
    : name_(std::move(name)), wavelengths_(std::move(wavelengths)), model_(std::move(model)) {
    if (wavelengths_.empty()) throw ValidationError(name_ + ": at least one wavelength is required");
    validate_model(model_, wavelengths_.size(), name_);
}

std::string_view Brdf::kind() const noexcept {
    switch (model_.index()) {
        case 0: return "lambertian";
        case 1: return "glossy";
        default: return "tabulated";
    }
}

double Brdf::sample(const AngleSample& angles, std::size_t wl) const {
    if (wl >= wavelengths_.size()) throw ValidationError(name_ + ": wavelength index out of range");
    if (const auto* l = std::get_if<LambertianModel>(&model_)) return l->albedo[wl] / std::numbers::pi;
    if (const auto* g = std::get_if<GlossyModel>(&model_)) return sample_glossy(*g, angles, wl);
    return sample_table(std::get<TabulatedModel>(model_), angles, wl, wavelengths_.size());
}

bool Brdf::operator==(const Brdf& o) const {
    if (name_ != o.name_ || wavelengths_ != o.wavelengths_ || model_.index() != o.model_.index()) return false;
    if (const auto* l = std::get_if<LambertianModel>(&model_)) {
        return l->albedo == std::get<LambertianModel>(o.model_).albedo;
    }
    if (const auto* g = std::get_if<GlossyModel>(&model_)) {
        const auto& h = std::get<GlossyModel>(o.model_);
        return g->diffuse == h.diffuse && g->specular == h.specular && g->exponent == h.exponent;
    }
    const auto& a = std::get<TabulatedModel>(model_);
    const auto& b = std::get<TabulatedModel>(o.model_);
    return a.axes == b.axes && a.values.size() == b.values.size() &&
           (a.values.empty() ||
            std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0);
}

BrdfDictionary::BrdfDictionary(std::vector<Brdf> entries, std::vector<int> band_map)
    : entries_(std::move(entries)), band_map_(std::move(band_map)) {
    if (entries_.empty()) throw ValidationError("dictionary must contain at least one BRDF");
    for (const auto& e : entries_) {
        if (e.wavelengths() != entries_.front().wavelengths()) {
            throw ValidationError("dictionary entry '" + e.name() + "' uses a different wavelength list");
        }
    }
    const int n_wl = static_cast<int>(wavelengths().size());
    for (const int m : band_map_) {
        if (m < 0 || m >= n_wl) throw ValidationError("band_map refers to an unknown wavelength index");
    }
}

std::vector<std::string> BrdfDictionary::names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.name());
    return out;
}

BrdfDictionary BrdfDictionary::bind(std::span<const BandSpec> bands) const {
    if (!band_map_.empty()) {
        require_bands(static_cast<int>(bands.size()));
        return *this;
    }
    return BrdfDictionary(entries_, nearest_band_map(bands, wavelengths()));
}

void BrdfDictionary::require_bands(int bands) const {
    if (static_cast<int>(band_map_.size()) != bands) {
        throw ValidationError("dictionary band_map covers " + std::to_string(band_map_.size()) +
                              " bands but the imagery has " + std::to_string(bands));
    }
}

double BrdfDictionary::sample(std::size_t k, const AngleSample& angles, int band) const {
    if (band < 0 || band >= static_cast<int>(band_map_.size())) {
        throw ValidationError("band " + std::to_string(band) + " is not mapped to a dictionary wavelength");
    }
    return entries_.at(k).sample(angles, static_cast<std::size_t>(band_map_[band]));
}

std::vector<double> BrdfDictionary::sample_set(std::size_t k, std::span<const AngleSample> angles,
                                               int band) const {
    std::vector<double> out;
    out.reserve(angles.size());
    for (const auto& a : angles) out.push_back(sample(k, a, band));
    return out;
}

std::vector<int> nearest_band_map(std::span<const BandSpec> bands, std::span<const double> wavelengths) {
    if (wavelengths.empty()) throw ValidationError("dictionary has no wavelengths");
    std::vector<int> map;
    for (const auto& b : bands) {
        if (std::isnan(b.center_wavelength)) {
            throw ValidationError("band " + std::to_string(b.index) +
                                  " has no center_wavelength; supply an explicit band_map");
        }
        std::size_t best = 0;
        for (std::size_t w = 1; w < wavelengths.size(); ++w) {
            if (std::abs(wavelengths[w] - b.center_wavelength) <
                std::abs(wavelengths[best] - b.center_wavelength)) {
                best = w;
            }
        }
        map.push_back(static_cast<int>(best));
    }
    return map;
}

// ---------------------------------------------------------------------------
// File format

namespace {

fs::path table_path(const fs::path& header, std::size_t k) {
    fs::path p = header;
    p.replace_extension("." + std::to_string(k) + ".f32");
    return p;
}

}  // namespace

BrdfDictionary load_dictionary(const fs::path& path) {
    const json doc = read_json_file(path);
    std::vector<Brdf> entries;
    std::vector<int> band_map;
    try {
        const auto& jentries = doc.at("entries");
        for (std::size_t k = 0; k < jentries.size(); ++k) {
            const auto& je = jentries[k];
            const auto name = je.at("name").get<std::string>();
            const auto kind = je.at("kind").get<std::string>();
            auto wavelengths = je.at("wavelengths").get<std::vector<double>>();
            if (kind == "lambertian") {
                LambertianModel m{je.at("params").at("albedo").get<std::vector<double>>()};
                entries.emplace_back(name, std::move(wavelengths), std::move(m));
            } else if (kind == "glossy") {
                const auto& p = je.at("params");
                GlossyModel m{p.at("diffuse").get<std::vector<double>>(), p.at("specular").get<double>(),
                              p.at("exponent").get<double>()};
                entries.emplace_back(name, std::move(wavelengths), std::move(m));
            } else if (kind == "tabulated") {
                const auto& ja = je.at("axes");
                TabulatedModel m;
                m.axes[0] = ja.at("view_zenith").get<std::vector<double>>();
                m.axes[1] = ja.at("view_azimuth").get<std::vector<double>>();
                m.axes[2] = ja.at("illum_zenith").get<std::vector<double>>();
                m.axes[3] = ja.at("illum_azimuth").get<std::vector<double>>();
                std::size_t count = wavelengths.size();
                for (const auto& axis : m.axes) count *= axis.size();
                const fs::path table = path.parent_path() / je.at("table_file").get<std::string>();
                m.values = read_f32_le(table, count);
                entries.emplace_back(name, std::move(wavelengths), std::move(m));
            } else {
                throw FormatError("entry " + std::to_string(k) + ": unknown kind '" + kind + "'");
            }
        }
        if (doc.contains("band_map") && !doc.at("band_map").is_null()) {
            band_map = doc.at("band_map").get<std::vector<int>>();
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": malformed dictionary: " + e.what());
    }
    return BrdfDictionary(std::move(entries), std::move(band_map));
}

void save_dictionary(const BrdfDictionary& dict, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    json doc;
    doc["entries"] = json::array();
    for (std::size_t k = 0; k < dict.size(); ++k) {
        const auto& e = dict.entry(k);
        json je{{"name", e.name()}, {"kind", std::string(e.kind())}, {"wavelengths", e.wavelengths()}};
        if (const auto* l = std::get_if<LambertianModel>(&e.model())) {
            je["params"] = {{"albedo", l->albedo}};
        } else if (const auto* g = std::get_if<GlossyModel>(&e.model())) {
            je["params"] = {{"diffuse", g->diffuse}, {"specular", g->specular}, {"exponent", g->exponent}};
        } else {
            const auto& t = std::get<TabulatedModel>(e.model());
            je["axes"] = {{"view_zenith", t.axes[0]},
                          {"view_azimuth", t.axes[1]},
                          {"illum_zenith", t.axes[2]},
                          {"illum_azimuth", t.axes[3]}};
            const fs::path table = table_path(path, k);
            write_f32_le(table, t.values);
            je["table_file"] = table.filename().string();
        }
        doc["entries"].push_back(std::move(je));
    }
    doc["band_map"] = dict.band_map().empty() ? json(nullptr) : json(dict.band_map());
    write_json_file(path, doc);
}

}  // namespace matseg
