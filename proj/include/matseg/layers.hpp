// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>

#include <json.hpp>

#include "matseg/rng.hpp"

namespace matseg::nn {

/// Stateless description of one network stage. Parameters live in the
/// owning network's flat parameter vector; a layer only sees its own slice.
/// Activations of conv stages are channel-major: value (c, t) sits at c*length + t.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string_view kind() const noexcept = 0;
    virtual std::size_t input_size() const noexcept = 0;
    virtual std::size_t output_size() const noexcept = 0;
    virtual std::size_t param_count() const noexcept { return 0; }
    /// Per-sample buffer the layer may fill in forward and reuse in backward.
    virtual std::size_t scratch_size() const noexcept { return 0; }

    virtual void init(std::span<double> /*params*/, SplitMix64& /*rng*/) const {}

    virtual void forward(std::span<const double> params, std::span<const double> in,
                         std::span<double> out, std::span<double> scratch) const = 0;

    /// Overwrites grad_in and adds this sample's contribution to grad_params.
    virtual void backward(std::span<const double> params, std::span<const double> in,
                          std::span<const double> out, std::span<double> scratch,
                          std::span<const double> grad_out, std::span<double> grad_in,
                          std::span<double> grad_params) const = 0;

    virtual nlohmann::json describe() const = 0;
};

/// Fully connected: out = W in + b, W stored [out][in].
class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out);
    std::string_view kind() const noexcept override { return "dense"; }
    std::size_t input_size() const noexcept override { return in_; }
    std::size_t output_size() const noexcept override { return out_; }
    std::size_t param_count() const noexcept override { return in_ * out_ + out_; }
    void init(std::span<double> params, SplitMix64& rng) const override;
    void forward(std::span<const double> params, std::span<const double> in, std::span<double> out,
                 std::span<double> scratch) const override;
    void backward(std::span<const double> params, std::span<const double> in,
                  std::span<const double> out, std::span<double> scratch,
                  std::span<const double> grad_out, std::span<double> grad_in,
                  std::span<double> grad_params) const override;
    nlohmann::json describe() const override;

private:
    std::size_t in_;
    std::size_t out_;
};

/// Stride-1 1D convolution with zero "same" padding; kernel size must be odd.
/// Weights stored [out_channel][in_channel][tap], then one bias per output channel.
class Conv1d final : public Layer {
public:
    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t length, std::size_t kernel);
    std::string_view kind() const noexcept override { return "conv1d"; }
    std::size_t input_size() const noexcept override { return in_ch_ * length_; }
    std::size_t output_size() const noexcept override { return out_ch_ * length_; }
    std::size_t param_count() const noexcept override { return out_ch_ * in_ch_ * kernel_ + out_ch_; }
    void init(std::span<double> params, SplitMix64& rng) const override;
    void forward(std::span<const double> params, std::span<const double> in, std::span<double> out,
                 std::span<double> scratch) const override;
    void backward(std::span<const double> params, std::span<const double> in,
                  std::span<const double> out, std::span<double> scratch,
                  std::span<const double> grad_out, std::span<double> grad_in,
                  std::span<double> grad_params) const override;
    nlohmann::json describe() const override;

private:
    std::size_t in_ch_;
    std::size_t out_ch_;
    std::size_t length_;
    std::size_t kernel_;
};

class Relu final : public Layer {
public:
    explicit Relu(std::size_t size) : size_(size) {}
    std::string_view kind() const noexcept override { return "relu"; }
    std::size_t input_size() const noexcept override { return size_; }
    std::size_t output_size() const noexcept override { return size_; }
    void forward(std::span<const double> params, std::span<const double> in, std::span<double> out,
                 std::span<double> scratch) const override;
    void backward(std::span<const double> params, std::span<const double> in,
                  std::span<const double> out, std::span<double> scratch,
                  std::span<const double> grad_out, std::span<double> grad_in,
                  std::span<double> grad_params) const override;
    nlohmann::json describe() const override;

private:
    std::size_t size_;
};

/// Basic residual block: relu(conv(relu(conv(x))) + x), channels preserved.
class ResidualBlock final : public Layer {
public:
    ResidualBlock(std::size_t channels, std::size_t length, std::size_t kernel);
    std::string_view kind() const noexcept override { return "residual"; }
    std::size_t input_size() const noexcept override { return size_; }
    std::size_t output_size() const noexcept override { return size_; }
    std::size_t param_count() const noexcept override { return 2 * first_.param_count(); }
    std::size_t scratch_size() const noexcept override { return 5 * size_; }
    void init(std::span<double> params, SplitMix64& rng) const override;
    void forward(std::span<const double> params, std::span<const double> in, std::span<double> out,
                 std::span<double> scratch) const override;
    void backward(std::span<const double> params, std::span<const double> in,
                  std::span<const double> out, std::span<double> scratch,
                  std::span<const double> grad_out, std::span<double> grad_in,
                  std::span<double> grad_params) const override;
    nlohmann::json describe() const override;

private:
    Conv1d first_;
    Conv1d second_;
    std::size_t channels_;
    std::size_t length_;
    std::size_t kernel_;
    std::size_t size_;
};

/// Non-overlapping average pooling along the length axis (trailing remainder dropped).
class AvgPool1d final : public Layer {
public:
    AvgPool1d(std::size_t channels, std::size_t length, std::size_t pool);
    std::string_view kind() const noexcept override { return "avgpool1d"; }
    std::size_t input_size() const noexcept override { return channels_ * length_; }
    std::size_t output_size() const noexcept override { return channels_ * (length_ / pool_); }
    void forward(std::span<const double> params, std::span<const double> in, std::span<double> out,
                 std::span<double> scratch) const override;
    void backward(std::span<const double> params, std::span<const double> in,
                  std::span<const double> out, std::span<double> scratch,
                  std::span<const double> grad_out, std::span<double> grad_in,
                  std::span<double> grad_params) const override;
    nlohmann::json describe() const override;

private:
    std::size_t channels_;
    std::size_t length_;
    std::size_t pool_;
};

std::shared_ptr<const Layer> layer_from_json(const nlohmann::json& j);

}  // namespace matseg::nn
