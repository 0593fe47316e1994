// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

// matseg: command-line front end for calibration, encoding, training,
// prediction, fusion, voting, evaluation and the end-to-end pipeline.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "matseg/brdf.hpp"
#include "matseg/calibration.hpp"
#include "matseg/classifier.hpp"
#include "matseg/encoder.hpp"
#include "matseg/error.hpp"
#include "matseg/fusion.hpp"
#include "matseg/grids.hpp"
#include "matseg/imagery.hpp"
#include "matseg/metrics.hpp"
#include "matseg/pipeline.hpp"
#include "matseg/raw_io.hpp"
#include "matseg/synth.hpp"

namespace {

using namespace matseg;

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kIo = 3, kFormat = 4, kValidation = 5, kTraining = 6 };

void emit(const json& doc, const std::optional<fs::path>& report) {
    if (report) {
        write_json_file(*report, doc);
    } else {
        std::cout << doc.dump(2) << '\n';
    }
}

int fail(const char* type, const std::string& message, int code, const std::string& stage = {}) {
    json err = {{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
    if (!stage.empty()) err["error"]["stage"] = stage;
    std::cout << err.dump() << '\n';
    std::cerr << "matseg: " << message << '\n';
    return code;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, const char* command) {
    if (!seed) throw ValidationError(std::string(command) + " requires --seed");
    return *seed;
}

BrdfDictionary dictionary_or_default(const std::optional<fs::path>& path) {
    return path ? load_dictionary(*path) : default_dictionary();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-view satellite material segmentation"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = OpenMP default)");

    // calibrate
    fs::path cal_stack, cal_out;
    auto* cal = app.add_subcommand("calibrate", "DN -> radiance -> TOA reflectance");
    cal->add_option("--stack", cal_stack, "Input stack directory or manifest")->required();
    cal->add_option("--out", cal_out, "Output stack directory")->required();

    // synth
    fs::path syn_spec, syn_out;
    std::optional<fs::path> syn_dict;
    std::optional<std::uint64_t> syn_seed;
    bool syn_raw = false;
    auto* syn = app.add_subcommand("synth", "Render a synthetic multi-view scene");
    syn->add_option("--spec", syn_spec, "Scene spec JSON")->required();
    syn->add_option("--dict", syn_dict, "BRDF dictionary (default: built-in five materials)");
    syn->add_option("--seed", syn_seed, "Overrides rng_seed of the spec");
    syn->add_flag("--raw", syn_raw, "Write raw digital numbers instead of reflectance");
    syn->add_option("--out", syn_out, "Output directory")->required();

    // encode
    fs::path enc_stack, enc_out;
    std::optional<fs::path> enc_dict;
    std::string enc_mode = "rr";
    std::size_t enc_k = 15;
    std::size_t enc_image = 0;
    std::optional<std::uint64_t> enc_seed;
    auto* enc = app.add_subcommand("encode", "Per-pixel feature encoding");
    enc->add_option("--stack", enc_stack, "Reflectance stack")->required();
    enc->add_option("--dict", enc_dict, "BRDF dictionary (rr mode)");
    enc->add_option("--mode", enc_mode, "mssa | msma | rr")->check(CLI::IsMember({"mssa", "msma", "rr"}));
    enc->add_option("--k", enc_k, "Images per MSMA draw");
    enc->add_option("--image", enc_image, "Source image for MSSA");
    enc->add_option("--seed", enc_seed, "MSMA sampling seed");
    enc->add_option("--out", enc_out, "Feature grid header")->required();

    // train
    fs::path tr_features, tr_mask, tr_out;
    std::optional<fs::path> tr_config;
    std::optional<std::uint64_t> tr_seed;
    auto* tr = app.add_subcommand("train", "Train the per-pixel classifier");
    tr->add_option("--features", tr_features, "Feature grid header")->required();
    tr->add_option("--mask", tr_mask, "Training label mask")->required();
    tr->add_option("--config", tr_config, "JSON {network, train}");
    tr->add_option("--seed", tr_seed, "Initialization and shuffling seed (overrides train.seed)");
    tr->add_option("--out", tr_out, "Model file")->required();

    // predict
    fs::path pr_model, pr_features, pr_out;
    auto* pr = app.add_subcommand("predict", "Per-pixel class distributions");
    pr->add_option("--model", pr_model, "Model file")->required();
    pr->add_option("--features", pr_features, "Feature grid header")->required();
    pr->add_option("--out", pr_out, "Prediction grid header")->required();

    // fuse
    std::vector<fs::path> fu_preds;
    fs::path fu_out;
    auto* fu = app.add_subcommand("fuse", "Softmax fusion of prediction grids");
    fu->add_option("--pred", fu_preds, "Prediction grid headers")->required();
    fu->add_option("--out", fu_out, "Output mask header")->required();

    // vote
    fs::path vo_mask, vo_segments, vo_out;
    auto* vo = app.add_subcommand("vote", "Building-segment majority voting");
    vo->add_option("--mask", vo_mask, "Label mask header")->required();
    vo->add_option("--segments", vo_segments, "Segment mask header")->required();
    vo->add_option("--out", vo_out, "Output mask header")->required();

    // eval
    fs::path ev_pred, ev_truth;
    std::optional<fs::path> ev_report;
    auto* ev = app.add_subcommand("eval", "PixAcc, mF1 and mIoU against a truth mask");
    ev->add_option("--pred", ev_pred, "Predicted mask header")->required();
    ev->add_option("--truth", ev_truth, "Truth mask header")->required();
    ev->add_option("--report", ev_report, "Write the JSON report here instead of stdout");

    // pipeline
    fs::path pl_config;
    std::optional<fs::path> pl_out, pl_report;
    std::optional<std::uint64_t> pl_seed;
    auto* pl = app.add_subcommand("pipeline", "Calibrate, encode, train, predict, fuse, vote and evaluate");
    pl->add_option("--config", pl_config, "Pipeline config JSON")->required();
    pl->add_option("--seed", pl_seed, "Overrides options.seed");
    pl->add_option("--out", pl_out, "Directory for intermediates and masks");
    pl->add_option("--report", pl_report, "Write the JSON report here instead of stdout");

    // ablation
    fs::path ab_config;
    std::optional<fs::path> ab_dict, ab_report;
    std::optional<std::uint64_t> ab_seed;
    auto* ab = app.add_subcommand("ablation", "{single, fused, voted} x {mssa, msma, rr} on a synthetic scene");
    ab->add_option("--config", ab_config, "JSON {scene, modes, train_fraction, options}")->required();
    ab->add_option("--dict", ab_dict, "BRDF dictionary (default: built-in five materials)");
    ab->add_option("--seed", ab_seed, "Overrides options.seed");
    ab->add_option("--report", ab_report, "Write the JSON report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), kUsage);
    }

    try {
        if (*cal) {
            const auto [out, report] = calibrate_stack(load_stack(cal_stack), threads);
            save_stack(out, cal_out);
            emit(report.to_json(), std::nullopt);
        } else if (*syn) {
            SceneSpec spec = SceneSpec::from_json(read_json_file(syn_spec));
            if (syn_seed) spec.seed = syn_seed;
            require_seed(spec.seed, "synth");
            const BrdfDictionary dict = dictionary_or_default(syn_dict);
            const SceneBundle bundle = render(spec, dict, threads);
            fs::create_directories(syn_out);
            save_stack(syn_raw ? render_dn(spec, dict, threads) : bundle.stack, syn_out / "stack");
            save_mask(bundle.truth, syn_out / "truth.json");
            save_segments(bundle.segments, syn_out / "segments.json");
            save_dictionary(dict, syn_out / "dictionary.json");
            emit({{"stack", (syn_out / "stack").string()},
                  {"images", bundle.stack.size()},
                  {"width", spec.width},
                  {"height", spec.height},
                  {"pixel_kind", syn_raw ? "raw_dn" : "reflectance"},
                  {"segments", bundle.segments.segment_ids.empty()
                                   ? 0u
                                   : *std::max_element(bundle.segments.segment_ids.begin(),
                                                       bundle.segments.segment_ids.end())}},
                 std::nullopt);
        } else if (*enc) {
            EncodeOptions opt;
            opt.mode = parse_encoding_mode(enc_mode);
            opt.k = enc_k;
            opt.image = enc_image;
            if (opt.mode == EncodingMode::msma) opt.seed = require_seed(enc_seed, "encode --mode msma");
            const ImageStack stack = load_stack(enc_stack);
            BrdfDictionary dict;
            if (enc_dict) {
                dict = load_dictionary(*enc_dict);
            } else if (opt.mode == EncodingMode::rr) {
                throw ValidationError("encode --mode rr requires --dict");
            }
            const FeatureGrid grid = encode_tile(stack, dict, opt, threads);
            save_features(grid, enc_out);
            emit({{"width", grid.width}, {"height", grid.height}, {"feature_len", grid.feature_len},
                  {"mode", std::string(to_string(grid.mode))}},
                 std::nullopt);
        } else if (*tr) {
            const FeatureGrid grid = load_features(tr_features);
            const LabelMask mask = load_mask(tr_mask);
            mask.validate();
            if (mask.width != grid.width || mask.height != grid.height) {
                throw ValidationError("mask and feature grid dimensions differ");
            }
            const json cfg = tr_config ? read_json_file(*tr_config) : json::object();
            TrainConfig tc = TrainConfig::from_json(cfg.contains("train") ? cfg.at("train") : cfg);
            if (tr_seed) tc.seed = tr_seed;
            const std::uint64_t seed = require_seed(tc.seed, "train");
            NetworkConfig net = cfg.contains("network") ? NetworkConfig::from_json(cfg.at("network"))
                                                        : NetworkConfig::desk_default(0, 0);
            net.input_len = grid.feature_len;
            net.classes = mask.classes();
            Dataset data;
            data.feature_len = grid.feature_len;
            for (std::size_t p = 0; p < mask.labels.size(); ++p) {
                if (mask.labels[p] != kUnlabeled) data.add(grid.feature(p), mask.labels[p]);
            }
            auto result = train(Network::build(net, seed), data, tc, threads);
            result.model.class_names = mask.palette;
            save_model(result.model, tr_out);
            emit({{"samples", data.size()}, {"steps", result.steps}, {"loss_history", result.loss_history},
                  {"learning_rates", result.learning_rates}},
                 std::nullopt);
        } else if (*pr) {
            const ProbabilityGrid grid = predict_tile(load_model(pr_model), load_features(pr_features), threads);
            save_prediction(grid, pr_out);
            emit({{"width", grid.width}, {"height", grid.height}, {"classes", grid.classes}}, std::nullopt);
        } else if (*fu) {
            std::vector<ProbabilityGrid> preds;
            for (const auto& p : fu_preds) preds.push_back(load_prediction(p));
            save_mask(softmax_fuse(preds, threads), fu_out);
            emit({{"sources", preds.size()}}, std::nullopt);
        } else if (*vo) {
            save_mask(segment_vote(load_mask(vo_mask), load_segments(vo_segments), threads), vo_out);
            emit({{"mask", vo_out.string()}}, std::nullopt);
        } else if (*ev) {
            const LabelMask truth = load_mask(ev_truth);
            emit(evaluate(load_mask(ev_pred), truth, threads).to_json(truth.palette), ev_report);
        } else if (*pl) {
            PipelineConfig config = PipelineConfig::from_json(read_json_file(pl_config), pl_config.parent_path());
            if (pl_seed) config.options.seed = pl_seed;
            if (pl_out) config.out_dir = pl_out;
            config.options.threads = threads;
            emit(run_pipeline(config).report, pl_report);
        } else if (*ab) {
            const json doc = read_json_file(ab_config);
            AblationConfig config;
            config.scene = SceneSpec::from_json(doc.at("scene"));
            if (doc.contains("modes")) {
                config.modes.clear();
                for (const auto& m : doc.at("modes")) config.modes.push_back(parse_encoding_mode(m.get<std::string>()));
            }
            config.train_fraction = doc.value("train_fraction", config.train_fraction);
            config.options = PipelineOptions::from_json(doc.value("options", json::object()));
            if (ab_seed) config.options.seed = ab_seed;
            config.options.threads = threads;
            emit(run_ablation(config, dictionary_or_default(ab_dict)), ab_report);
        }
    } catch (const StageError& e) {
        return fail("stage", e.what(), kFailure, e.stage());
    } catch (const IoError& e) {
        return fail("io", e.what(), kIo);
    } catch (const FormatError& e) {
        return fail("format", e.what(), kFormat);
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), kValidation);
    } catch (const TrainingError& e) {
        return fail("training", e.what(), kTraining);
    } catch (const json::exception& e) {
        return fail("format", e.what(), kFormat);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), kFailure);
    }
    return kOk;
}
