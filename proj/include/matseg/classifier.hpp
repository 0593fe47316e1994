// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "matseg/grids.hpp"
#include "matseg/layers.hpp"

namespace matseg {

/// Architecture of the per-pixel network:
///   input [1 x L] -> conv stem (1 -> channels) + relu -> conv_blocks residual
///   blocks -> optional average pooling -> dense hidden layers (relu) -> dense
///   output (classes).
/// With conv_blocks == 0 the conv stem and pooling are omitted (pure MLP).
struct NetworkConfig {
    std::size_t input_len = 0;
    std::vector<std::size_t> hidden_widths{64};
    std::size_t conv_blocks = 4;
    std::size_t channels = 8;
    std::size_t kernel_size = 3;
    std::size_t pool = 1;
    std::size_t classes = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static NetworkConfig from_json(const nlohmann::json& j);

    /// 4 residual blocks + 2 dense layers.
    static NetworkConfig desk_default(std::size_t input_len, std::size_t classes);
    /// Eight basic blocks (16 conv) + stem + classifier: the 18-layer depth.
    static NetworkConfig resnet18(std::size_t input_len, std::size_t classes);

    bool operator==(const NetworkConfig&) const = default;
};

/// Per-feature standardization applied before the first layer.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> inv_std;

    bool empty() const noexcept { return mean.empty(); }
    void apply(std::span<const float> in, std::span<double> out) const;
    void apply(std::span<const double> in, std::span<double> out) const;
};

struct Dataset {
    std::size_t feature_len = 0;
    std::vector<float> features;  // sample-major
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const float> feature(std::size_t i) const {
        return std::span<const float>(features).subspan(i * feature_len, feature_len);
    }
    void add(std::span<const float> feature, int label);
};

/// Buffers for one forward/backward pass through a network.
struct Workspace {
    std::vector<std::vector<double>> activations;  // [0] = scaled input
    std::vector<std::vector<double>> scratch;
    std::vector<double> grad_a;
    std::vector<double> grad_b;
    std::vector<double> probs;
};

struct Prediction {
    std::vector<double> logits;
    std::vector<double> probs;
};

class Network {
public:
    Network() = default;
    /// He-initialized weights (zero biases) drawn from SplitMix64(seed).
    static Network build(const NetworkConfig& config, std::uint64_t seed);
    /// Assembles a network from explicit layers; used by tests and model loading.
    static Network from_layers(NetworkConfig config, std::vector<std::shared_ptr<const nn::Layer>> layers);

    const NetworkConfig& config() const noexcept { return config_; }
    const std::vector<std::shared_ptr<const nn::Layer>>& layers() const noexcept { return layers_; }
    std::size_t layer_offset(std::size_t i) const { return offsets_.at(i); }
    std::size_t param_count() const noexcept { return params_.size(); }
    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    std::span<double> layer_params(std::size_t i);
    std::span<const double> layer_params(std::size_t i) const;

    FeatureScaler scaler;
    std::vector<std::string> class_names;
    nlohmann::json metadata = nlohmann::json::object();

    Workspace make_workspace() const;
    /// Forward pass of one scaled input; logits end up in ws.activations.back().
    void forward_scaled(std::span<const double> scaled, Workspace& ws) const;
    /// Backward pass from d(loss)/d(logits); gradients are added to grad_params.
    void backward(Workspace& ws, std::span<const double> grad_logits, std::span<double> grad_params) const;

    Prediction forward(std::span<const float> feature) const;
    Prediction forward(std::span<const double> feature) const;

private:
    void check_length(std::size_t n) const;

    NetworkConfig config_;
    std::vector<std::shared_ptr<const nn::Layer>> layers_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// total / (C * count_c); zero for classes without samples.
std::vector<double> inverse_frequency_weights(const Dataset& data, std::size_t classes);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Class-weighted cross entropy averaged over the batch (divided by the sum of
/// the batch's sample weights) and its gradient for every parameter. Samples
/// are split into a fixed number of shards whose sums are combined in order,
/// so the result does not depend on the thread count.
LossAndGradient loss_and_gradients(const Network& model, const Dataset& data,
                                   std::span<const std::size_t> batch,
                                   std::span<const double> class_weights, int threads = 0);

namespace reference {
/// Sample-by-sample serial accumulation of the same loss.
LossAndGradient loss_and_gradients(const Network& model, const Dataset& data,
                                   std::span<const std::size_t> batch,
                                   std::span<const double> class_weights);
}  // namespace reference

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    void update(std::span<double> params, std::span<const double> grad, double learning_rate);
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    std::size_t plateau_patience = 5;
    double plateau_factor = 0.1;
    double plateau_threshold = 1e-4;
    std::vector<double> class_weights;  // empty: inverse frequency of the training set
    std::optional<std::uint64_t> seed;
    bool standardize = true;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    /// Learning rate 1e-6 as used for the full-size datasets.
    static TrainConfig full_scale_preset();
};

struct TrainResult {
    Network model;
    std::vector<double> loss_history;   // mean training loss per epoch
    std::vector<double> learning_rates; // rate used in each epoch
    std::size_t steps = 0;
};

/// Adam with a reduce-on-plateau schedule. Shuffling is seeded from cfg.seed.
TrainResult train(Network model, const Dataset& data, const TrainConfig& cfg, int threads = 0);

/// Per-pixel class distributions for a feature grid.
ProbabilityGrid predict_tile(const Network& model, const FeatureGrid& grid, int threads = 0);

namespace reference {
ProbabilityGrid predict_tile(const Network& model, const FeatureGrid& grid);
}  // namespace reference

/// Non-learned baseline: one mean feature vector per class, L2 nearest wins.
class NearestCentroid {
public:
    static NearestCentroid fit(const Dataset& data, std::size_t classes);

    std::size_t classes() const noexcept { return centroids_.size(); }
    const std::vector<std::vector<double>>& centroids() const noexcept { return centroids_; }
    std::size_t predict_class(std::span<const float> feature) const;
    std::vector<double> predict(std::span<const float> feature) const;
    ProbabilityGrid predict_tile(const FeatureGrid& grid) const;

private:
    std::vector<std::vector<double>> centroids_;
};

void save_model(const Network& model, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

}  // namespace matseg
