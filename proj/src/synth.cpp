// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "matseg/encoder.hpp"
#include "matseg/error.hpp"
#include "matseg/parallel.hpp"
#include "matseg/rng.hpp"

namespace matseg {

double NoiseSpec::sigma(int band) const {
    if (gaussian_sigma.empty()) return 0.0;
    if (gaussian_sigma.size() == 1) return gaussian_sigma.front();
    return gaussian_sigma.at(static_cast<std::size_t>(band));
}

void SceneSpec::validate(std::size_t dictionary_size) const {
    if (width < 1 || height < 1) throw ValidationError("scene dimensions must be positive");
    if (material_map.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ValidationError("material_map size does not match width*height");
    }
    for (const int m : material_map) {
        if (m < 0 || static_cast<std::size_t>(m) >= dictionary_size) {
            throw ValidationError("material index " + std::to_string(m) + " out of range for a dictionary of " +
                                  std::to_string(dictionary_size));
        }
    }
    if (views.empty()) throw ValidationError("scene needs at least one view");
    for (std::size_t j = 0; j < views.size(); ++j) {
        try {
            validate_geometry(views[j]);
        } catch (const ValidationError& e) {
            throw ValidationError("view " + std::to_string(j) + ": " + e.what());
        }
    }
    if (!seed) throw ValidationError("scene rendering requires an explicit seed");
    if (noise.gaussian_sigma.size() > 1 && noise.gaussian_sigma.size() != bands.size()) {
        throw ValidationError("gaussian_sigma must hold one value or one per band");
    }
    for (const double s : noise.gaussian_sigma) {
        if (!(s >= 0.0)) throw ValidationError("noise sigma must be >= 0");
    }
    if (!(noise.gain_jitter >= 0.0)) throw ValidationError("gain_jitter must be >= 0");
}

nlohmann::json SceneSpec::to_json() const {
    nlohmann::json j;
    j["width"] = width;
    j["height"] = height;
    j["material_map"] = material_map;
    j["views"] = nlohmann::json::array();
    for (const auto& v : views) j["views"].push_back(view_geometry_to_json(v));
    j["bands"] = nlohmann::json::array();
    for (const auto& b : bands) j["bands"].push_back(band_spec_to_json(b));
    j["noise"] = {{"gaussian_sigma", noise.gaussian_sigma}, {"gain_jitter", noise.gain_jitter}};
    j["rng_seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    j["region_id"] = region_id;
    return j;
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
    SceneSpec s;
    try {
        s.width = j.at("width").get<int>();
        s.height = j.at("height").get<int>();
        if (j.contains("material_map")) {
            s.material_map = j.at("material_map").get<std::vector<int>>();
        } else {
            const auto& v = j.at("material_voronoi");
            s.material_map = voronoi_material_map(s.width, s.height, v.at("cells").get<std::size_t>(),
                                                  v.at("classes").get<std::size_t>(),
                                                  v.at("seed").get<std::uint64_t>());
        }
        if (j.contains("views")) {
            for (const auto& jv : j.at("views")) s.views.push_back(view_geometry_from_json(jv));
        } else {
            const auto& d = j.at("default_views");
            s.views = default_views(d.at("count").get<std::size_t>(), d.at("seed").get<std::uint64_t>());
        }
        if (j.contains("bands")) {
            for (const auto& jb : j.at("bands")) s.bands.push_back(band_spec_from_json(jb));
        }
        if (s.bands.empty()) s.bands = worldview3_bands();
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            if (n.contains("gaussian_sigma")) {
                const auto& g = n.at("gaussian_sigma");
                s.noise.gaussian_sigma = g.is_array() ? g.get<std::vector<double>>()
                                                      : std::vector<double>{g.get<double>()};
            }
            s.noise.gain_jitter = n.value("gain_jitter", 0.0);
        }
        if (j.contains("rng_seed") && !j.at("rng_seed").is_null()) s.seed = j.at("rng_seed").get<std::uint64_t>();
        s.region_id = j.value("region_id", s.region_id);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed scene spec: ") + e.what());
    }
    return s;
}

std::vector<BandSpec> worldview3_bands() {
    struct Row {
        const char* name;
        double center, irradiance, gain, offset, abscal, bandwidth;
    };
    static constexpr Row kRows[] = {
        {"coastal", 427.0, 1757.89, 0.938, -13.099, 0.0095, 0.0405},
        {"blue", 482.0, 2004.61, 0.946, -9.409, 0.0126, 0.0540},
        {"green", 547.0, 1830.18, 0.958, -7.771, 0.0099, 0.0618},
        {"yellow", 604.0, 1712.07, 0.979, -5.489, 0.0058, 0.0381},
        {"red", 660.0, 1535.33, 0.969, -4.579, 0.0110, 0.0585},
        {"red_edge", 723.0, 1348.08, 1.027, -5.552, 0.0045, 0.0387},
        {"nir1", 824.0, 1055.94, 0.977, -6.508, 0.0122, 0.1004},
        {"nir2", 914.0, 858.77, 1.007, -3.699, 0.0090, 0.0889},
    };
    std::vector<BandSpec> bands;
    for (int b = 0; b < 8; ++b) {
        const auto& r = kRows[b];
        bands.push_back({b, r.name, r.center, r.irradiance, r.gain, r.offset, r.abscal, r.bandwidth});
    }
    return bands;
}

BrdfDictionary default_dictionary() {
    std::vector<double> wl;
    for (const auto& b : worldview3_bands()) wl.push_back(b.center_wavelength);
    // Both glossy entries share the asphalt diffuse spectrum (within a few
    // percent), and concrete sits a flat offset above it, so a single view of a
    // glossy pixel can look like asphalt, concrete or something in between.
    const std::vector<double> asphalt{0.10, 0.11, 0.12, 0.13, 0.14, 0.15, 0.16, 0.17};
    auto scaled = [&](double f, double add) {
        std::vector<double> v(asphalt);
        for (auto& x : v) x = x * f + add;
        return v;
    };
    std::vector<Brdf> entries;
    entries.emplace_back("asphalt", wl, LambertianModel{asphalt});
    entries.emplace_back("concrete", wl, LambertianModel{scaled(1.0, 0.20)});
    entries.emplace_back("metal", wl, GlossyModel{scaled(1.06, 0.0), 0.07, 10.0});
    entries.emplace_back("vegetation", wl, LambertianModel{{0.04, 0.05, 0.11, 0.09, 0.05, 0.24, 0.45, 0.46}});
    entries.emplace_back("glass", wl, GlossyModel{scaled(0.94, 0.0), 0.05, 30.0});
    return BrdfDictionary(std::move(entries));
}

std::vector<ViewGeometry> default_views(std::size_t n, std::uint64_t seed) {
    std::vector<ViewGeometry> views;
    for (std::size_t j = 0; j < n; ++j) {
        auto rng = SplitMix64::stream(seed, j);
        ViewGeometry g;
        g.view_zenith = 2.0 + 38.0 * rng.uniform();
        g.view_azimuth = normalize_azimuth(360.0 * rng.uniform());
        g.sun_zenith = 25.0 + 15.0 * rng.uniform();
        g.sun_azimuth = 130.0 + 30.0 * rng.uniform();
        g.earth_sun_distance = 0.985 + 0.03 * rng.uniform();
        g.acquisition_time = "2016-01-" + std::string(j + 1 < 10 ? "0" : "") + std::to_string(j % 31 + 1) +
                             "T16:00:00Z";
        views.push_back(g);
    }
    return views;
}

std::vector<int> voronoi_material_map(int width, int height, std::size_t cells, std::size_t classes,
                                      std::uint64_t seed) {
    if (width < 1 || height < 1 || cells < 1 || classes < 1) {
        throw ValidationError("voronoi map needs positive size, cells and classes");
    }
    SplitMix64 rng(seed);
    std::vector<double> sx(cells), sy(cells);
    std::vector<int> label(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        sx[c] = rng.uniform() * width;
        sy[c] = rng.uniform() * height;
        label[c] = static_cast<int>(rng.below(classes));
    }
    std::vector<int> map(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < cells; ++c) {
                const double dx = x + 0.5 - sx[c];
                const double dy = y + 0.5 - sy[c];
                const double d = dx * dx + dy * dy;
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            map[static_cast<std::size_t>(y) * width + x] = label[best];
        }
    }
    return map;
}

SegmentMask connected_components(int width, int height, std::span<const int> material_map) {
    SegmentMask seg;
    seg.width = width;
    seg.height = height;
    seg.segment_ids.assign(material_map.size(), 0);
    std::uint32_t next = 1;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < material_map.size(); ++start) {
        if (seg.segment_ids[start] != 0) continue;
        const int material = material_map[start];
        seg.segment_ids[start] = next;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(p % width);
            const int y = static_cast<int>(p / width);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int i = 0; i < 4; ++i) {
                if (nx[i] < 0 || ny[i] < 0 || nx[i] >= width || ny[i] >= height) continue;
                const std::size_t q = static_cast<std::size_t>(ny[i]) * width + nx[i];
                if (seg.segment_ids[q] == 0 && material_map[q] == material) {
                    seg.segment_ids[q] = next;
                    stack.push_back(q);
                }
            }
        }
        ++next;
    }
    return seg;
}

double reflectance_to_dn(double reflectance, const BandSpec& band, const ViewGeometry& geometry) {
    const double cos_sun = std::cos(geometry.sun_zenith * std::numbers::pi / 180.0);
    if (!(band.gain > 0.0) || !(band.abscal_factor > 0.0) || !(cos_sun > 0.0) ||
        !(band.solar_irradiance > 0.0) || !(band.effective_bandwidth > 0.0) || std::isnan(band.offset)) {
        throw ValidationError("band " + std::to_string(band.index) + ": calibration is not invertible");
    }
    const double d = geometry.earth_sun_distance;
    const double radiance = reflectance * band.solar_irradiance * cos_sun / (std::numbers::pi * d * d);
    return (radiance - band.offset) * band.effective_bandwidth / (band.gain * band.abscal_factor);
}

namespace {

struct RenderPlan {
    SceneSpec spec;
    BrdfDictionary dict;
    DictionarySamples samples;  // [j][k][b]
    std::vector<double> gains;
    std::size_t pixels = 0;
    int bands = 0;
};

RenderPlan plan_render(const SceneSpec& input, const BrdfDictionary& dict) {
    RenderPlan plan;
    plan.spec = input;
    if (plan.spec.bands.empty()) plan.spec.bands = worldview3_bands();
    plan.spec.validate(dict.size());
    if (dict.size() > kMaxClasses) throw ValidationError("dictionary too large for a label mask");
    plan.dict = dict.bind(plan.spec.bands);
    plan.bands = static_cast<int>(plan.spec.bands.size());
    plan.pixels = plan.spec.material_map.size();
    std::vector<AngleSample> angles;
    for (const auto& v : plan.spec.views) angles.push_back(angles_of(v));
    plan.samples = sample_dictionary(plan.dict, angles, plan.bands);
    for (std::size_t j = 0; j < plan.spec.views.size(); ++j) {
        auto rng = SplitMix64::stream(*plan.spec.seed, (std::uint64_t{1} << 32) + j);
        plan.gains.push_back(1.0 + plan.spec.noise.gain_jitter * rng.normal());
    }
    return plan;
}

void render_pixel(const RenderPlan& plan, std::size_t p, std::vector<std::vector<float>>& data) {
    auto rng = SplitMix64::stream(*plan.spec.seed, p);
    const auto k = static_cast<std::size_t>(plan.spec.material_map[p]);
    const std::size_t d = plan.samples.entries;
    for (std::size_t j = 0; j < plan.spec.views.size(); ++j) {
        const double* m = plan.samples.values.data() + (j * d + k) * plan.bands;
        for (int b = 0; b < plan.bands; ++b) {
            const double noise = rng.normal();
            const double v = m[b] * plan.gains[j] + plan.spec.noise.sigma(b) * noise;
            data[j][b * plan.pixels + p] = static_cast<float>(std::clamp(v, 0.0, 2.0));
        }
    }
}

SceneBundle assemble(const RenderPlan& plan, std::vector<std::vector<float>> data) {
    const auto& spec = plan.spec;
    std::vector<MultispectralImage> images;
    for (std::size_t j = 0; j < spec.views.size(); ++j) {
        images.emplace_back("view_" + std::to_string(j), spec.width, spec.height, PixelKind::reflectance,
                            spec.bands, spec.views[j], std::move(data[j]));
    }
    SceneBundle bundle{ImageStack(spec.region_id, std::move(images)), {}, {}};
    bundle.truth.width = spec.width;
    bundle.truth.height = spec.height;
    bundle.truth.palette = plan.dict.names();
    bundle.truth.labels.assign(spec.material_map.begin(), spec.material_map.end());
    bundle.segments = connected_components(spec.width, spec.height, spec.material_map);
    return bundle;
}

}  // namespace

SceneBundle render(const SceneSpec& spec, const BrdfDictionary& dict, int threads) {
    const RenderPlan plan = plan_render(spec, dict);
    std::vector<std::vector<float>> data(plan.spec.views.size(), std::vector<float>(plan.bands * plan.pixels));
    const auto n = static_cast<long long>(plan.pixels);
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
    for (long long p = 0; p < n; ++p) render_pixel(plan, static_cast<std::size_t>(p), data);
    return assemble(plan, std::move(data));
}

ImageStack render_dn(const SceneSpec& spec, const BrdfDictionary& dict, int threads) {
    const SceneBundle bundle = render(spec, dict, threads);
    const auto& stack = bundle.stack;
    std::vector<MultispectralImage> images;
    for (std::size_t j = 0; j < stack.size(); ++j) {
        const auto& img = stack.image(j);
        std::vector<double> factor(img.band_count());
        for (int b = 0; b < img.band_count(); ++b) {
            if (reflectance_to_dn(0.0, img.bands()[b], img.geometry()) < 0.0) {
                throw ValidationError("band " + std::to_string(b) +
                                      ": positive offset makes low reflectance unrepresentable as DN");
            }
        }
        std::vector<float> dn(img.data().size());
        const auto total = static_cast<long long>(dn.size());
        const std::size_t plane = img.pixel_count();
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
        for (long long i = 0; i < total; ++i) {
            const auto b = static_cast<int>(static_cast<std::size_t>(i) / plane);
            dn[i] = static_cast<float>(reflectance_to_dn(img.data()[i], img.bands()[b], img.geometry()));
        }
        images.push_back(img.with_data(PixelKind::raw_dn, std::move(dn)));
    }
    return ImageStack(stack.region_id(), std::move(images));
}

namespace reference {

SceneBundle render(const SceneSpec& spec, const BrdfDictionary& dict) {
    const RenderPlan plan = plan_render(spec, dict);
    std::vector<std::vector<float>> data(plan.spec.views.size(), std::vector<float>(plan.bands * plan.pixels));
    for (std::size_t p = 0; p < plan.pixels; ++p) render_pixel(plan, p, data);
    return assemble(plan, std::move(data));
}

}  // namespace reference

}  // namespace matseg
