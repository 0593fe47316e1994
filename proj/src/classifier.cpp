// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "matseg/error.hpp"
#include "matseg/parallel.hpp"
#include "matseg/raw_io.hpp"
#include "matseg/rng.hpp"

namespace matseg {

// ---------------------------------------------------------------------------
// Configuration

void NetworkConfig::validate() const {
    if (input_len < 1) throw ValidationError("network input_len must be >= 1");
    if (classes < 2) throw ValidationError("network needs at least 2 classes");
    if (conv_blocks > 0) {
        if (channels < 1) throw ValidationError("network channels must be >= 1");
        if (kernel_size % 2 == 0) throw ValidationError("kernel_size must be odd");
        if (pool < 1 || pool > input_len) throw ValidationError("pool must lie in [1, input_len]");
    }
    for (const auto w : hidden_widths) {
        if (w < 1) throw ValidationError("hidden widths must be >= 1");
    }
}

nlohmann::json NetworkConfig::to_json() const {
    return {{"input_len", input_len},   {"hidden_widths", hidden_widths}, {"conv_blocks", conv_blocks},
            {"channels", channels},     {"kernel_size", kernel_size},     {"pool", pool},
            {"classes", classes}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
    NetworkConfig c;
    c.input_len = j.value("input_len", c.input_len);
    c.hidden_widths = j.value("hidden_widths", c.hidden_widths);
    c.conv_blocks = j.value("conv_blocks", c.conv_blocks);
    c.channels = j.value("channels", c.channels);
    c.kernel_size = j.value("kernel_size", c.kernel_size);
    c.pool = j.value("pool", c.pool);
    c.classes = j.value("classes", c.classes);
    return c;
}

NetworkConfig NetworkConfig::desk_default(std::size_t input_len, std::size_t classes) {
    NetworkConfig c;
    c.input_len = input_len;
    c.classes = classes;
    return c;
}

NetworkConfig NetworkConfig::resnet18(std::size_t input_len, std::size_t classes) {
    NetworkConfig c;
    c.input_len = input_len;
    c.classes = classes;
    c.conv_blocks = 8;
    c.channels = 16;
    c.hidden_widths = {};
    return c;
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw ValidationError("epochs and batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (plateau_patience < 1) throw ValidationError("plateau_patience must be positive");
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
        throw ValidationError("plateau_factor must lie in (0, 1)");
    }
    if (!(plateau_threshold >= 0.0)) throw ValidationError("plateau_threshold must be >= 0");
    for (const double w : class_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("class weights must be finite and >= 0");
    }
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j{{"epochs", epochs},
                     {"batch_size", batch_size},
                     {"learning_rate", learning_rate},
                     {"plateau_patience", plateau_patience},
                     {"plateau_factor", plateau_factor},
                     {"plateau_threshold", plateau_threshold},
                     {"class_weights", class_weights},
                     {"standardize", standardize}};
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
    c.plateau_threshold = j.value("plateau_threshold", c.plateau_threshold);
    c.class_weights = j.value("class_weights", c.class_weights);
    c.standardize = j.value("standardize", c.standardize);
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

TrainConfig TrainConfig::full_scale_preset() {
    TrainConfig c;
    c.learning_rate = 1e-6;
    return c;
}

// ---------------------------------------------------------------------------
// Scaling and datasets

void FeatureScaler::apply(std::span<const float> in, std::span<double> out) const {
    if (empty()) {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i];
        return;
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = (static_cast<double>(in[i]) - mean[i]) * inv_std[i];
}

void FeatureScaler::apply(std::span<const double> in, std::span<double> out) const {
    if (empty()) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] - mean[i]) * inv_std[i];
}

void Dataset::add(std::span<const float> feature, int label) {
    if (feature_len == 0) feature_len = feature.size();
    if (feature.size() != feature_len) throw ValidationError("dataset features must share one length");
    features.insert(features.end(), feature.begin(), feature.end());
    labels.push_back(label);
}

namespace {

FeatureScaler fit_scaler(const Dataset& data) {
    const std::size_t n = data.size();
    const std::size_t len = data.feature_len;
    FeatureScaler s{std::vector<double>(len, 0.0), std::vector<double>(len, 1.0)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = data.feature(i);
        for (std::size_t c = 0; c < len; ++c) s.mean[c] += f[c];
    }
    for (auto& m : s.mean) m /= static_cast<double>(n);
    std::vector<double> var(len, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = data.feature(i);
        for (std::size_t c = 0; c < len; ++c) {
            const double d = f[c] - s.mean[c];
            var[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < len; ++c) {
        const double sd = std::sqrt(var[c] / static_cast<double>(n));
        s.inv_std[c] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    return s;
}

}  // namespace

std::vector<double> inverse_frequency_weights(const Dataset& data, std::size_t classes) {
    std::vector<double> counts(classes, 0.0);
    for (const int y : data.labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw ValidationError("label out of range");
        counts[y] += 1.0;
    }
    std::vector<double> w(classes, 0.0);
    const double total = static_cast<double>(data.size());
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] > 0.0) w[c] = total / (static_cast<double>(classes) * counts[c]);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Network

Network Network::from_layers(NetworkConfig config, std::vector<std::shared_ptr<const nn::Layer>> layers) {
    if (layers.empty()) throw ValidationError("network needs at least one layer");
    Network net;
    net.config_ = std::move(config);
    net.layers_ = std::move(layers);
    if (net.layers_.front()->input_size() != net.config_.input_len) {
        throw ValidationError("first layer does not accept input_len values");
    }
    if (net.layers_.back()->output_size() != net.config_.classes) {
        throw ValidationError("last layer does not produce one logit per class");
    }
    std::size_t offset = 0;
    for (std::size_t i = 0; i < net.layers_.size(); ++i) {
        if (i > 0 && net.layers_[i]->input_size() != net.layers_[i - 1]->output_size()) {
            throw ValidationError("layer " + std::to_string(i) + " input size does not match its predecessor");
        }
        net.offsets_.push_back(offset);
        offset += net.layers_[i]->param_count();
    }
    net.params_.assign(offset, 0.0);
    return net;
}

Network Network::build(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    std::vector<std::shared_ptr<const nn::Layer>> layers;
    std::size_t flat = config.input_len;
    if (config.conv_blocks > 0) {
        std::size_t len = config.input_len;
        const std::size_t ch = config.channels;
        layers.push_back(std::make_shared<nn::Conv1d>(1, ch, len, config.kernel_size));
        layers.push_back(std::make_shared<nn::Relu>(ch * len));
        for (std::size_t b = 0; b < config.conv_blocks; ++b) {
            layers.push_back(std::make_shared<nn::ResidualBlock>(ch, len, config.kernel_size));
        }
        if (config.pool > 1) {
            layers.push_back(std::make_shared<nn::AvgPool1d>(ch, len, config.pool));
            len /= config.pool;
        }
        flat = ch * len;
    }
    for (const auto w : config.hidden_widths) {
        layers.push_back(std::make_shared<nn::Dense>(flat, w));
        layers.push_back(std::make_shared<nn::Relu>(w));
        flat = w;
    }
    layers.push_back(std::make_shared<nn::Dense>(flat, config.classes));

    Network net = from_layers(config, std::move(layers));
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < net.layers_.size(); ++i) net.layers_[i]->init(net.layer_params(i), rng);
    return net;
}

std::span<double> Network::layer_params(std::size_t i) {
    return std::span<double>(params_).subspan(offsets_.at(i), layers_.at(i)->param_count());
}

std::span<const double> Network::layer_params(std::size_t i) const {
    return std::span<const double>(params_).subspan(offsets_.at(i), layers_.at(i)->param_count());
}

Workspace Network::make_workspace() const {
    Workspace ws;
    std::size_t widest = config_.input_len;
    ws.activations.emplace_back(config_.input_len);
    for (const auto& layer : layers_) {
        ws.activations.emplace_back(layer->output_size());
        ws.scratch.emplace_back(layer->scratch_size());
        widest = std::max(widest, layer->output_size());
    }
    ws.grad_a.resize(widest);
    ws.grad_b.resize(widest);
    ws.probs.resize(config_.classes);
    return ws;
}

void Network::forward_scaled(std::span<const double> scaled, Workspace& ws) const {
    std::copy(scaled.begin(), scaled.end(), ws.activations[0].begin());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->forward(layer_params(i), ws.activations[i], ws.activations[i + 1], ws.scratch[i]);
    }
}

void Network::backward(Workspace& ws, std::span<const double> grad_logits,
                       std::span<double> grad_params) const {
    std::copy(grad_logits.begin(), grad_logits.end(), ws.grad_a.begin());
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const auto& layer = *layers_[i];
        auto g_out = std::span<const double>(ws.grad_a).first(layer.output_size());
        auto g_in = std::span<double>(ws.grad_b).first(layer.input_size());
        layer.backward(layer_params(i), ws.activations[i], ws.activations[i + 1], ws.scratch[i], g_out,
                       g_in, grad_params.subspan(offsets_[i], layer.param_count()));
        std::swap(ws.grad_a, ws.grad_b);
    }
}

void Network::check_length(std::size_t n) const {
    if (n != config_.input_len) {
        throw ValidationError("feature length " + std::to_string(n) + " does not match network input_len " +
                              std::to_string(config_.input_len));
    }
}

Prediction Network::forward(std::span<const float> feature) const {
    check_length(feature.size());
    std::vector<double> scaled(feature.size());
    scaler.apply(feature, scaled);
    Workspace ws = make_workspace();
    forward_scaled(scaled, ws);
    Prediction p{ws.activations.back(), {}};
    p.probs = softmax(p.logits);
    return p;
}

Prediction Network::forward(std::span<const double> feature) const {
    check_length(feature.size());
    std::vector<double> scaled(feature.size());
    scaler.apply(feature, scaled);
    Workspace ws = make_workspace();
    forward_scaled(scaled, ws);
    Prediction p{ws.activations.back(), {}};
    p.probs = softmax(p.logits);
    return p;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        p[c] = std::exp(logits[c] - top);
        sum += p[c];
    }
    for (auto& v : p) v /= sum;
    return p;
}

// ---------------------------------------------------------------------------
// Loss

namespace {

constexpr std::size_t kGradientShards = 8;

void check_batch(const Network& model, const Dataset& data, std::span<const std::size_t> batch,
                 std::span<const double> weights) {
    if (batch.empty()) throw ValidationError("empty batch");
    if (data.feature_len != model.config().input_len) {
        throw ValidationError("dataset feature length does not match network input_len");
    }
    if (weights.size() != model.config().classes) throw ValidationError("one class weight per class required");
    for (const auto i : batch) {
        if (i >= data.size()) throw ValidationError("batch index out of range");
        const int y = data.labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= model.config().classes) {
            throw ValidationError("label " + std::to_string(y) + " out of range");
        }
    }
}

// Adds one sample's weighted loss and unnormalized gradient; returns its weight.
double accumulate_sample(const Network& model, const Dataset& data, std::size_t index,
                         std::span<const double> weights, Workspace& ws, std::vector<double>& scaled,
                         std::vector<double>& grad_logits, std::span<double> grad, double& loss) {
    const int y = data.labels[index];
    const double w = weights[y];
    model.scaler.apply(data.feature(index), scaled);
    model.forward_scaled(scaled, ws);
    const auto& z = ws.activations.back();
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
        ws.probs[c] = std::exp(z[c] - top);
        sum += ws.probs[c];
    }
    const double log_sum = top + std::log(sum);
    loss += -w * (z[y] - log_sum);
    if (w == 0.0) return 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
        grad_logits[c] = w * (ws.probs[c] / sum - (static_cast<int>(c) == y ? 1.0 : 0.0));
    }
    model.backward(ws, grad_logits, grad);
    return w;
}

}  // namespace

LossAndGradient loss_and_gradients(const Network& model, const Dataset& data,
                                   std::span<const std::size_t> batch,
                                   std::span<const double> class_weights, int threads) {
    check_batch(model, data, batch, class_weights);
    const std::size_t shards = std::min(kGradientShards, batch.size());
    const std::size_t n_params = model.param_count();
    std::vector<std::vector<double>> shard_grad(shards);
    std::vector<double> shard_loss(shards, 0.0);
    std::vector<double> shard_weight(shards, 0.0);

#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
    for (long long s = 0; s < static_cast<long long>(shards); ++s) {
        const std::size_t begin = batch.size() * s / shards;
        const std::size_t end = batch.size() * (s + 1) / shards;
        Workspace ws = model.make_workspace();
        std::vector<double> scaled(model.config().input_len);
        std::vector<double> grad_logits(model.config().classes);
        shard_grad[s].assign(n_params, 0.0);
        for (std::size_t b = begin; b < end; ++b) {
            shard_weight[s] += accumulate_sample(model, data, batch[b], class_weights, ws, scaled,
                                                 grad_logits, shard_grad[s], shard_loss[s]);
        }
    }

    double loss = 0.0;
    double weight = 0.0;
    std::vector<double> grad(n_params, 0.0);
    for (std::size_t s = 0; s < shards; ++s) {
        loss += shard_loss[s];
        weight += shard_weight[s];
        for (std::size_t p = 0; p < n_params; ++p) grad[p] += shard_grad[s][p];
    }
    if (!(weight > 0.0)) throw ValidationError("batch has zero total class weight");
    for (auto& g : grad) g /= weight;
    return {loss / weight, std::move(grad)};
}

namespace reference {

LossAndGradient loss_and_gradients(const Network& model, const Dataset& data,
                                   std::span<const std::size_t> batch,
                                   std::span<const double> class_weights) {
    check_batch(model, data, batch, class_weights);
    Workspace ws = model.make_workspace();
    std::vector<double> scaled(model.config().input_len);
    std::vector<double> grad_logits(model.config().classes);
    LossAndGradient out{0.0, std::vector<double>(model.param_count(), 0.0)};
    double weight = 0.0;
    for (const auto i : batch) {
        weight += accumulate_sample(model, data, i, class_weights, ws, scaled, grad_logits, out.gradient, out.loss);
    }
    if (!(weight > 0.0)) throw ValidationError("batch has zero total class weight");
    out.loss /= weight;
    for (auto& g : out.gradient) g /= weight;
    return out;
}

}  // namespace reference

// ---------------------------------------------------------------------------
// Optimizer and training

void AdamState::update(std::span<double> params, std::span<const double> grad, double lr) {
    if (m.size() != params.size()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
    }
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon);
    }
}

TrainResult train(Network model, const Dataset& data, const TrainConfig& cfg, int threads) {
    cfg.validate();
    if (!cfg.seed) throw ValidationError("training requires an explicit seed");
    if (data.size() == 0) throw ValidationError("training dataset is empty");
    const std::size_t classes = model.config().classes;
    const std::vector<double> weights =
        cfg.class_weights.empty() ? inverse_frequency_weights(data, classes) : cfg.class_weights;
    if (weights.size() != classes) throw ValidationError("one class weight per class required");
    if (cfg.standardize) model.scaler = fit_scaler(data);

    auto rng = SplitMix64::stream(*cfg.seed, 0x736875666c65ULL);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    AdamState adam;
    double lr = cfg.learning_rate;
    double best = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the library generator (std::shuffle's draws are implementation defined).
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> batch(order.data() + start, end - start);
            const auto lg = loss_and_gradients(model, data, batch, weights, threads);
            if (!std::isfinite(lg.loss)) {
                throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index) + " (learning rate " +
                                    std::to_string(lr) + ")");
            }
            adam.update(model.params(), lg.gradient, lr);
            loss_sum += lg.loss * static_cast<double>(batch.size());
            ++result.steps;
        }
        const double epoch_loss = loss_sum / static_cast<double>(order.size());
        result.loss_history.push_back(epoch_loss);
        result.learning_rates.push_back(lr);
        if (epoch_loss < best - cfg.plateau_threshold) {
            best = epoch_loss;
            stale = 0;
        } else if (++stale >= cfg.plateau_patience) {
            lr *= cfg.plateau_factor;
            stale = 0;
        }
    }
    model.metadata = {{"epochs", cfg.epochs},
                      {"steps", result.steps},
                      {"final_loss", result.loss_history.back()},
                      {"final_learning_rate", lr},
                      {"samples", data.size()},
                      {"train_config", cfg.to_json()}};
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------
// Prediction

namespace {

ProbabilityGrid empty_prediction(const Network& model, const FeatureGrid& grid) {
    if (grid.feature_len != model.config().input_len) {
        throw ValidationError("feature length " + std::to_string(grid.feature_len) +
                              " does not match network input_len " +
                              std::to_string(model.config().input_len));
    }
    ProbabilityGrid out;
    out.width = grid.width;
    out.height = grid.height;
    out.classes = model.config().classes;
    out.palette = model.class_names;
    out.source = std::string(to_string(grid.mode));
    out.probs.resize(grid.pixel_count() * out.classes);
    return out;
}

void predict_pixel(const Network& model, std::span<const float> feature, Workspace& ws,
                   std::vector<double>& scaled, float* dst) {
    model.scaler.apply(feature, scaled);
    model.forward_scaled(scaled, ws);
    const auto p = softmax(ws.activations.back());
    for (std::size_t c = 0; c < p.size(); ++c) dst[c] = static_cast<float>(p[c]);
}

}  // namespace

ProbabilityGrid predict_tile(const Network& model, const FeatureGrid& grid, int threads) {
    ProbabilityGrid out = empty_prediction(model, grid);
    const auto n = static_cast<long long>(grid.pixel_count());
#pragma omp parallel num_threads(resolve_threads(threads))
    {
        Workspace ws = model.make_workspace();
        std::vector<double> scaled(grid.feature_len);
#pragma omp for schedule(static)
        for (long long p = 0; p < n; ++p) {
            const auto pixel = static_cast<std::size_t>(p);
            predict_pixel(model, grid.feature(pixel), ws, scaled, out.probs.data() + pixel * out.classes);
        }
    }
    return out;
}

namespace reference {

ProbabilityGrid predict_tile(const Network& model, const FeatureGrid& grid) {
    ProbabilityGrid out = empty_prediction(model, grid);
    for (std::size_t p = 0; p < grid.pixel_count(); ++p) {
        const auto pred = model.forward(grid.feature(p));
        for (std::size_t c = 0; c < out.classes; ++c) {
            out.probs[p * out.classes + c] = static_cast<float>(pred.probs[c]);
        }
    }
    return out;
}

}  // namespace reference

// ---------------------------------------------------------------------------
// Nearest centroid baseline

NearestCentroid NearestCentroid::fit(const Dataset& data, std::size_t classes) {
    if (classes < 1) throw ValidationError("nearest centroid needs at least one class");
    NearestCentroid nc;
    nc.centroids_.assign(classes, std::vector<double>(data.feature_len, 0.0));
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int y = data.labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw ValidationError("label out of range");
        const auto f = data.feature(i);
        for (std::size_t c = 0; c < data.feature_len; ++c) nc.centroids_[y][c] += f[c];
        ++counts[y];
    }
    for (std::size_t k = 0; k < classes; ++k) {
        if (counts[k] == 0) {
            throw ValidationError("class " + std::to_string(k) + " has no training samples");
        }
        for (auto& v : nc.centroids_[k]) v /= static_cast<double>(counts[k]);
    }
    return nc;
}

std::size_t NearestCentroid::predict_class(std::span<const float> feature) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids_.size(); ++k) {
        if (feature.size() != centroids_[k].size()) throw ValidationError("feature length mismatch");
        double d = 0.0;
        for (std::size_t c = 0; c < feature.size(); ++c) {
            const double diff = feature[c] - centroids_[k][c];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

std::vector<double> NearestCentroid::predict(std::span<const float> feature) const {
    std::vector<double> p(centroids_.size(), 0.0);
    p[predict_class(feature)] = 1.0;
    return p;
}

ProbabilityGrid NearestCentroid::predict_tile(const FeatureGrid& grid) const {
    ProbabilityGrid out;
    out.width = grid.width;
    out.height = grid.height;
    out.classes = classes();
    out.source = "nearest_centroid";
    out.probs.assign(grid.pixel_count() * out.classes, 0.0f);
    for (std::size_t p = 0; p < grid.pixel_count(); ++p) {
        out.probs[p * out.classes + predict_class(grid.feature(p))] = 1.0f;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model file

void save_model(const Network& model, const fs::path& path) {
    json doc;
    doc["format"] = "matseg-model";
    doc["version"] = 1;
    doc["config"] = model.config().to_json();
    doc["class_names"] = model.class_names;
    doc["scaler"] = {{"mean", model.scaler.mean}, {"inv_std", model.scaler.inv_std}};
    doc["layers"] = json::array();
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        const auto& layer = *model.layers()[i];
        json jl = layer.describe();
        jl["param_count"] = layer.param_count();
        jl["params"] = encode_f32_base64(model.layer_params(i));
        doc["layers"].push_back(std::move(jl));
    }
    doc["training"] = model.metadata;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_json_file(path, doc);
}

Network load_model(const fs::path& path) {
    const json doc = read_json_file(path);
    try {
        if (doc.value("format", std::string{}) != "matseg-model") {
            throw FormatError(path.string() + ": not a matseg model file");
        }
        const auto config = NetworkConfig::from_json(doc.at("config"));
        config.validate();
        std::vector<std::shared_ptr<const nn::Layer>> layers;
        for (const auto& jl : doc.at("layers")) layers.push_back(nn::layer_from_json(jl));
        Network net = Network::from_layers(config, std::move(layers));
        for (std::size_t i = 0; i < net.layers().size(); ++i) {
            const auto& jl = doc.at("layers")[i];
            const auto values = decode_f32_base64(jl.at("params").get<std::string>(),
                                                  net.layers()[i]->param_count());
            std::copy(values.begin(), values.end(), net.layer_params(i).begin());
        }
        net.class_names = doc.value("class_names", std::vector<std::string>{});
        net.scaler.mean = doc.at("scaler").at("mean").get<std::vector<double>>();
        net.scaler.inv_std = doc.at("scaler").at("inv_std").get<std::vector<double>>();
        if (!net.scaler.empty() &&
            (net.scaler.mean.size() != config.input_len || net.scaler.inv_std.size() != config.input_len)) {
            throw FormatError(path.string() + ": scaler length does not match input_len");
        }
        net.metadata = doc.value("training", json::object());
        return net;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": malformed model: " + e.what());
    }
}

}  // namespace matseg
