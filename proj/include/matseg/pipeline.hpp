// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "matseg/brdf.hpp"
#include "matseg/calibration.hpp"
#include "matseg/classifier.hpp"
#include "matseg/error.hpp"
#include "matseg/grids.hpp"
#include "matseg/imagery.hpp"
#include "matseg/metrics.hpp"
#include "matseg/synth.hpp"

namespace matseg {

/// Wraps the failure of one pipeline stage; what() reads "<stage>: <cause>".
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error(stage + ": " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Knobs shared by run_pipeline and run_ablation.
struct PipelineOptions {
    EncodingMode mode = EncodingMode::rr;
    std::size_t k = 15;                       // msma images per draw
    std::size_t trials = 10;                  // msma resamplings fused at prediction time
    std::size_t train_draws = 3;              // msma encodings / mssa views per training pixel (0 = all views for mssa)
    std::optional<std::uint64_t> seed;        // required; every other seed is derived from it
    TrainConfig train;                        // train.seed is ignored in favour of the derived seed
    std::optional<NetworkConfig> network;     // defaults to NetworkConfig::desk_default
    int threads = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static PipelineOptions from_json(const nlohmann::json& j);
};

struct PipelineInputs {
    ImageStack stack;                    // raw_dn, radiance or reflectance
    BrdfDictionary dict;                 // required for rr
    std::optional<LabelMask> train_mask; // labeled pixels train the model unless `model` is set
    std::optional<Network> model;
    std::optional<SegmentMask> segments; // voting is skipped without it
    std::optional<LabelMask> truth;      // evaluation is skipped without it
};

struct StageMetrics {
    MetricsReport single_first;  // first source alone
    double single_pix_acc = 0.0; // means over sources
    double single_mean_f1 = 0.0;
    double single_mean_iou = 0.0;
    MetricsReport fused;
    std::optional<MetricsReport> voted;

    nlohmann::json to_json(const std::vector<std::string>& palette) const;
};

struct PipelineResult {
    std::optional<CalibrationReport> calibration;
    Network model;
    std::vector<ProbabilityGrid> sources;
    LabelMask fused;
    LabelMask final_mask;  // voted when segments are given, fused otherwise
    std::optional<StageMetrics> metrics;
    nlohmann::json report;
};

/// calibrate (when needed) -> encode -> train or reuse model -> predict every
/// source (one per image for mssa, one per resampling for msma, one for rr)
/// -> softmax fusion -> segment voting -> evaluation. Intermediates are written
/// under `out_dir` when it is given.
PipelineResult run_pipeline(const PipelineInputs& inputs, const PipelineOptions& options,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// File-based form used by the command line.
struct PipelineConfig {
    std::filesystem::path stack;
    std::optional<std::filesystem::path> dict;
    std::optional<std::filesystem::path> train_mask;
    std::optional<std::filesystem::path> model;
    std::optional<std::filesystem::path> segments;
    std::optional<std::filesystem::path> truth;
    std::optional<std::filesystem::path> out_dir;
    PipelineOptions options;

    /// Relative paths are resolved against `base`.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
};

PipelineResult run_pipeline(const PipelineConfig& config);

/// Held-out split: each labeled pixel goes to training with probability
/// `train_fraction`, decided by SplitMix64::stream(seed, pixel).
std::pair<LabelMask, LabelMask> split_mask(const LabelMask& truth, double train_fraction, std::uint64_t seed);

struct AblationConfig {
    SceneSpec scene;
    std::vector<EncodingMode> modes{EncodingMode::mssa, EncodingMode::msma, EncodingMode::rr};
    double train_fraction = 0.5;
    PipelineOptions options;  // mode is overridden per row
};

/// Renders the scene, splits its truth into train/test pixels and runs the
/// pipeline once per encoding. Returns rows {mode: {single, fused, voted}}
/// of held-out metrics.
nlohmann::json run_ablation(const AblationConfig& config, const BrdfDictionary& dict);

}  // namespace matseg
