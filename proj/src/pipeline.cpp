// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/pipeline.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "matseg/encoder.hpp"
#include "matseg/fusion.hpp"
#include "matseg/raw_io.hpp"
#include "matseg/rng.hpp"

namespace matseg {

namespace {

// Stream ids for seeds derived from the pipeline seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kTrainDrawStream = 3;
constexpr std::uint64_t kTrialStream = 4;
constexpr std::uint64_t kViewStream = 5;
constexpr std::uint64_t kSplitStream = 6;

std::uint64_t derive(std::uint64_t seed, std::uint64_t id) { return SplitMix64::stream(seed, id).next(); }

std::vector<std::uint64_t> derive_many(std::uint64_t seed, std::uint64_t id, std::size_t n) {
    auto rng = SplitMix64::stream(seed, id);
    std::vector<std::uint64_t> out(n);
    for (auto& s : out) s = rng.next();
    return out;
}

template <class F>
auto stage(const char* name, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.what());
    }
}

void check_grid(const char* what, int w, int h, const ImageStack& stack) {
    if (w != stack.width() || h != stack.height()) {
        throw ValidationError(std::string(what) + " is " + std::to_string(w) + "x" + std::to_string(h) +
                              " but the stack is " + std::to_string(stack.width()) + "x" +
                              std::to_string(stack.height()));
    }
}

ImageStack to_reflectance(const ImageStack& stack, std::optional<CalibrationReport>& report, int threads) {
    switch (stack.kind()) {
        case PixelKind::reflectance:
            return stack;
        case PixelKind::raw_dn: {
            auto [out, rep] = calibrate_stack(stack, threads);
            report = rep;
            return out;
        }
        case PixelKind::radiance: {
            std::vector<MultispectralImage> images;
            for (const auto& img : stack.images()) images.push_back(radiance_to_reflectance(img));
            return ImageStack(stack.region_id(), std::move(images));
        }
    }
    throw ValidationError("unknown pixel kind");
}

EncodeOptions encode_options(const PipelineOptions& o, EncodingMode mode) {
    EncodeOptions e;
    e.mode = mode;
    e.k = o.k;
    return e;
}

FeatureGrid encode_image(const ImageStack& stack, const BrdfDictionary& dict, const PipelineOptions& o,
                         std::size_t image) {
    EncodeOptions e = encode_options(o, EncodingMode::mssa);
    e.image = image;
    return encode_tile(stack, dict, e, o.threads);
}

FeatureGrid encode_draw(const ImageStack& stack, const BrdfDictionary& dict, const PipelineOptions& o,
                        std::uint64_t seed) {
    EncodeOptions e = encode_options(o, EncodingMode::msma);
    e.seed = seed;
    return encode_tile(stack, dict, e, o.threads);
}

Dataset training_set(const ImageStack& stack, const BrdfDictionary& dict, const PipelineOptions& o,
                     const LabelMask& mask) {
    std::vector<std::size_t> pixels;
    for (std::size_t p = 0; p < mask.labels.size(); ++p) {
        if (mask.labels[p] != kUnlabeled) pixels.push_back(p);
    }
    if (pixels.empty()) throw ValidationError("training mask has no labeled pixels");
    Dataset data;
    auto add_from = [&](const FeatureGrid& grid, std::size_t p) {
        data.feature_len = grid.feature_len;
        data.add(grid.feature(p), mask.labels[p]);
    };
    switch (o.mode) {
        case EncodingMode::rr: {
            const auto grid = encode_tile(stack, dict, encode_options(o, EncodingMode::rr), o.threads);
            for (const auto p : pixels) add_from(grid, p);
            break;
        }
        case EncodingMode::mssa: {
            std::vector<FeatureGrid> grids;
            for (std::size_t j = 0; j < stack.size(); ++j) grids.push_back(encode_image(stack, dict, o, j));
            std::vector<AngleSample> angles;
            for (const auto& img : stack.images()) angles.push_back(angles_of(img.geometry()));
            const bool all = o.train_draws == 0 || o.train_draws >= stack.size();
            const std::uint64_t view_seed = derive(*o.seed, kViewStream);
            for (const auto p : pixels) {
                if (all) {
                    for (const auto& g : grids) add_from(g, p);
                } else {
                    for (const auto j : select_msma_images(angles, o.train_draws, view_seed, p)) {
                        add_from(grids[j], p);
                    }
                }
            }
            break;
        }
        case EncodingMode::msma: {
            const std::size_t draws = std::max<std::size_t>(1, o.train_draws);
            for (const auto seed : derive_many(*o.seed, kTrainDrawStream, draws)) {
                const auto grid = encode_draw(stack, dict, o, seed);
                for (const auto p : pixels) add_from(grid, p);
            }
            break;
        }
    }
    return data;
}

std::vector<ProbabilityGrid> predict_sources(const Network& model, const ImageStack& stack,
                                             const BrdfDictionary& dict, const PipelineOptions& o) {
    std::vector<ProbabilityGrid> sources;
    switch (o.mode) {
        case EncodingMode::rr: {
            auto grid = predict_tile(model, encode_tile(stack, dict, encode_options(o, EncodingMode::rr), o.threads),
                                     o.threads);
            grid.source = "rr";
            sources.push_back(std::move(grid));
            break;
        }
        case EncodingMode::mssa:
            for (std::size_t j = 0; j < stack.size(); ++j) {
                auto grid = predict_tile(model, encode_image(stack, dict, o, j), o.threads);
                grid.source = "image_" + std::to_string(j);
                sources.push_back(std::move(grid));
            }
            break;
        case EncodingMode::msma: {
            const auto seeds = derive_many(*o.seed, kTrialStream, o.trials);
            sources = predict_msma_trials(model, stack, o.k, seeds, o.threads);
            break;
        }
    }
    return sources;
}

nlohmann::json metric_cell(double acc, double f1, double iou) {
    return {{"pix_acc", acc}, {"mean_f1", f1}, {"mean_iou", iou}};
}

}  // namespace

void PipelineOptions::validate() const {
    if (!seed) throw ValidationError("pipeline requires an explicit seed");
    if (k == 0) throw ValidationError("k must be >= 1");
    if (trials == 0) throw ValidationError("trials must be >= 1");
    train.validate();
    if (network) {
        // Input length and class count are filled in once the data is known.
        NetworkConfig shape = *network;
        shape.input_len = std::max<std::size_t>(shape.pool, 1);
        shape.classes = 2;
        shape.validate();
    }
}

nlohmann::json PipelineOptions::to_json() const {
    nlohmann::json j;
    j["mode"] = std::string(to_string(mode));
    j["k"] = k;
    j["trials"] = trials;
    j["train_draws"] = train_draws;
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    j["train"] = train.to_json();
    j["network"] = network ? network->to_json() : nlohmann::json(nullptr);
    return j;
}

PipelineOptions PipelineOptions::from_json(const nlohmann::json& j) {
    PipelineOptions o;
    try {
        if (j.contains("mode")) o.mode = parse_encoding_mode(j.at("mode").get<std::string>());
        o.k = j.value("k", o.k);
        o.trials = j.value("trials", o.trials);
        o.train_draws = j.value("train_draws", o.train_draws);
        if (j.contains("seed") && !j.at("seed").is_null()) o.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("train")) o.train = TrainConfig::from_json(j.at("train"));
        if (j.contains("network") && !j.at("network").is_null()) o.network = NetworkConfig::from_json(j.at("network"));
        o.threads = j.value("threads", o.threads);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed pipeline options: ") + e.what());
    }
    return o;
}

nlohmann::json StageMetrics::to_json(const std::vector<std::string>& palette) const {
    nlohmann::json j;
    j["single"] = metric_cell(single_pix_acc, single_mean_f1, single_mean_iou);
    j["single_first_source"] = single_first.to_json(palette);
    j["fused"] = fused.to_json(palette);
    j["voted"] = voted ? voted->to_json(palette) : nlohmann::json(nullptr);
    return j;
}

PipelineResult run_pipeline(const PipelineInputs& inputs, const PipelineOptions& options,
                            const std::optional<std::filesystem::path>& out_dir) {
    PipelineResult result;
    stage("config", [&] {
        options.validate();
        if (inputs.stack.size() == 0) throw ValidationError("stack has no images");
        if (!inputs.model && !inputs.train_mask) throw ValidationError("either a model or a training mask is required");
        if (inputs.train_mask) check_grid("training mask", inputs.train_mask->width, inputs.train_mask->height, inputs.stack);
        if (inputs.truth) check_grid("truth mask", inputs.truth->width, inputs.truth->height, inputs.stack);
        if (inputs.segments) check_grid("segment mask", inputs.segments->width, inputs.segments->height, inputs.stack);
        if (options.mode == EncodingMode::rr && inputs.dict.size() == 0) {
            throw ValidationError("rr encoding needs a BRDF dictionary");
        }
        return 0;
    });
    if (out_dir) fs::create_directories(*out_dir);

    const ImageStack stack = stage("calibrate", [&] { return to_reflectance(inputs.stack, result.calibration, options.threads); });

    result.model = stage("train", [&] {
        if (inputs.model) return *inputs.model;
        const LabelMask& mask = *inputs.train_mask;
        mask.validate();
        const Dataset data = training_set(stack, inputs.dict, options, mask);
        NetworkConfig net = options.network ? *options.network : NetworkConfig::desk_default(0, 0);
        net.input_len = data.feature_len;
        net.classes = mask.classes();
        TrainConfig tc = options.train;
        tc.seed = derive(*options.seed, kShuffleStream);
        Network model = train(Network::build(net, derive(*options.seed, kInitStream)), data, tc, options.threads).model;
        model.class_names = mask.palette;
        return model;
    });
    if (out_dir) stage("persist", [&] { save_model(result.model, *out_dir / "model.json"); return 0; });

    result.sources = stage("predict", [&] { return predict_sources(result.model, stack, inputs.dict, options); });
    result.fused = stage("fuse", [&] { return softmax_fuse(result.sources, options.threads); });
    result.final_mask = stage("vote", [&] {
        return inputs.segments ? segment_vote(result.fused, *inputs.segments, options.threads) : result.fused;
    });

    if (inputs.truth) {
        result.metrics = stage("eval", [&] {
            const LabelMask& truth = *inputs.truth;
            StageMetrics m;
            for (std::size_t s = 0; s < result.sources.size(); ++s) {
                const auto r = evaluate(argmax_mask(result.sources[s]), truth, options.threads);
                if (s == 0) m.single_first = r;
                m.single_pix_acc += r.pix_acc;
                m.single_mean_f1 += r.mean_f1;
                m.single_mean_iou += r.mean_iou;
            }
            const auto n = static_cast<double>(result.sources.size());
            m.single_pix_acc /= n;
            m.single_mean_f1 /= n;
            m.single_mean_iou /= n;
            m.fused = evaluate(result.fused, truth, options.threads);
            if (inputs.segments) m.voted = evaluate(result.final_mask, truth, options.threads);
            return m;
        });
    }

    nlohmann::json& report = result.report;
    report["options"] = options.to_json();
    report["region_id"] = stack.region_id();
    report["width"] = stack.width();
    report["height"] = stack.height();
    report["images"] = stack.size();
    report["sources"] = result.sources.size();
    report["calibration"] = result.calibration ? result.calibration->to_json() : nlohmann::json(nullptr);
    report["training"] = result.model.metadata;
    report["voted"] = inputs.segments.has_value();
    report["metrics"] = result.metrics ? result.metrics->to_json(inputs.truth->palette) : nlohmann::json(nullptr);

    if (out_dir) {
        stage("persist", [&] {
            for (std::size_t s = 0; s < result.sources.size(); ++s) {
                save_prediction(result.sources[s], *out_dir / ("pred_" + std::to_string(s) + ".json"));
            }
            save_mask(result.fused, *out_dir / "fused.json");
            save_mask(result.final_mask, *out_dir / "final.json");
            write_json_file(*out_dir / "report.json", report);
            return 0;
        });
    }
    return result;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
    auto resolve = [&](const fs::path& p) { return p.is_absolute() || base.empty() ? p : base / p; };
    auto opt_path = [&](const char* key) -> std::optional<fs::path> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return resolve(j.at(key).get<std::string>());
    };
    PipelineConfig c;
    try {
        c.stack = resolve(j.at("stack").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("pipeline config needs a stack path: ") + e.what());
    }
    c.dict = opt_path("dict");
    c.train_mask = opt_path("train_mask");
    c.model = opt_path("model");
    c.segments = opt_path("segments");
    c.truth = opt_path("truth");
    c.out_dir = opt_path("out");
    c.options = PipelineOptions::from_json(j.value("options", nlohmann::json::object()));
    return c;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
    PipelineInputs in = stage("load", [&] {
        PipelineInputs i;
        i.stack = load_stack(config.stack);
        if (config.dict) i.dict = load_dictionary(*config.dict);
        if (config.train_mask) i.train_mask = load_mask(*config.train_mask);
        if (config.model) i.model = load_model(*config.model);
        if (config.segments) i.segments = load_segments(*config.segments);
        if (config.truth) i.truth = load_mask(*config.truth);
        return i;
    });
    return run_pipeline(in, config.options, config.out_dir);
}

std::pair<LabelMask, LabelMask> split_mask(const LabelMask& truth, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train_fraction must lie in (0, 1)");
    }
    LabelMask train = truth;
    LabelMask test = truth;
    for (std::size_t p = 0; p < truth.labels.size(); ++p) {
        if (truth.labels[p] == kUnlabeled) continue;
        auto rng = SplitMix64::stream(seed, p);
        if (rng.uniform() < train_fraction) {
            test.labels[p] = kUnlabeled;
        } else {
            train.labels[p] = kUnlabeled;
        }
    }
    return {train, test};
}

nlohmann::json run_ablation(const AblationConfig& config, const BrdfDictionary& dict) {
    const auto& opts = config.options;
    stage("config", [&] { opts.validate(); return 0; });
    const SceneBundle bundle = stage("synth", [&] { return render(config.scene, dict, opts.threads); });
    const auto [train_mask, test_mask] = split_mask(bundle.truth, config.train_fraction, derive(*opts.seed, kSplitStream));

    PipelineInputs in;
    in.stack = bundle.stack;
    in.dict = dict;
    in.train_mask = train_mask;
    in.segments = bundle.segments;
    in.truth = test_mask;

    nlohmann::json rows = nlohmann::json::object();
    for (const auto mode : config.modes) {
        PipelineOptions o = opts;
        o.mode = mode;
        const auto r = run_pipeline(in, o);
        const auto& m = *r.metrics;
        rows[std::string(to_string(mode))] = {
            {"single", metric_cell(m.single_pix_acc, m.single_mean_f1, m.single_mean_iou)},
            {"fused", metric_cell(m.fused.pix_acc, m.fused.mean_f1, m.fused.mean_iou)},
            {"voted", metric_cell(m.voted->pix_acc, m.voted->mean_f1, m.voted->mean_iou)},
            {"sources", r.sources.size()},
            {"final_training_loss", r.model.metadata.value("final_loss", 0.0)}};
    }
    std::size_t train_pixels = 0;
    std::size_t test_pixels = 0;
    for (std::size_t p = 0; p < train_mask.labels.size(); ++p) {
        train_pixels += train_mask.labels[p] != kUnlabeled;
        test_pixels += test_mask.labels[p] != kUnlabeled;
    }
    return {{"options", opts.to_json()},
            {"scene", {{"width", config.scene.width},
                       {"height", config.scene.height},
                       {"images", config.scene.views.size()},
                       {"seed", config.scene.seed ? nlohmann::json(*config.scene.seed) : nlohmann::json(nullptr)}}},
            {"train_fraction", config.train_fraction},
            {"train_pixels", train_pixels},
            {"test_pixels", test_pixels},
            {"rows", rows}};
}

}  // namespace matseg
