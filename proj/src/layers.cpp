// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "matseg/error.hpp"

namespace matseg::nn {

namespace {

void he_init(std::span<double> weights, std::size_t fan_in, SplitMix64& rng) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& w : weights) w = std_dev * rng.normal();
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out) : in_(in), out_(out) {
    if (in_ == 0 || out_ == 0) throw ValidationError("dense layer sizes must be positive");
}

void Dense::init(std::span<double> params, SplitMix64& rng) const {
    he_init(params.first(in_ * out_), in_, rng);
    std::fill(params.begin() + in_ * out_, params.end(), 0.0);
}

void Dense::forward(std::span<const double> params, std::span<const double> in, std::span<double> out,
                    std::span<double>) const {
    const double* w = params.data();
    const double* b = params.data() + in_ * out_;
    for (std::size_t o = 0; o < out_; ++o) {
        const double* row = w + o * in_;
        double acc = b[o];
        for (std::size_t i = 0; i < in_; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
}

void Dense::backward(std::span<const double> params, std::span<const double> in,
                     std::span<const double>, std::span<double>, std::span<const double> grad_out,
                     std::span<double> grad_in, std::span<double> grad_params) const {
    const double* w = params.data();
    double* gw = grad_params.data();
    double* gb = grad_params.data() + in_ * out_;
    std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t o = 0; o < out_; ++o) {
        const double g = grad_out[o];
        if (g == 0.0) continue;
        const double* row = w + o * in_;
        double* grow = gw + o * in_;
        for (std::size_t i = 0; i < in_; ++i) {
            grow[i] += g * in[i];
            grad_in[i] += g * row[i];
        }
        gb[o] += g;
    }
}

nlohmann::json Dense::describe() const { return {{"kind", "dense"}, {"in", in_}, {"out", out_}}; }

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t length, std::size_t kernel)
    : in_ch_(in_channels), out_ch_(out_channels), length_(length), kernel_(kernel) {
    if (in_ch_ == 0 || out_ch_ == 0 || length_ == 0) throw ValidationError("conv1d sizes must be positive");
    if (kernel_ == 0 || kernel_ % 2 == 0) throw ValidationError("conv1d kernel size must be odd");
}

void Conv1d::init(std::span<double> params, SplitMix64& rng) const {
    const std::size_t nw = out_ch_ * in_ch_ * kernel_;
    he_init(params.first(nw), in_ch_ * kernel_, rng);
    std::fill(params.begin() + nw, params.end(), 0.0);
}

void Conv1d::forward(std::span<const double> params, std::span<const double> in, std::span<double> out,
                     std::span<double>) const {
    const double* w = params.data();
    const double* b = params.data() + out_ch_ * in_ch_ * kernel_;
    const auto len = static_cast<std::ptrdiff_t>(length_);
    const auto pad = static_cast<std::ptrdiff_t>(kernel_ / 2);
    for (std::size_t o = 0; o < out_ch_; ++o) {
        double* dst = out.data() + o * length_;
        std::fill(dst, dst + length_, b[o]);
        for (std::size_t i = 0; i < in_ch_; ++i) {
            const double* src = in.data() + i * length_;
            const double* wk = w + (o * in_ch_ + i) * kernel_;
            for (std::size_t k = 0; k < kernel_; ++k) {
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
                const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                const std::ptrdiff_t t1 = std::min(len, len - shift);
                const double wv = wk[k];
                for (std::ptrdiff_t t = t0; t < t1; ++t) dst[t] += wv * src[t + shift];
            }
        }
    }
}

void Conv1d::backward(std::span<const double> params, std::span<const double> in,
                      std::span<const double>, std::span<double>, std::span<const double> grad_out,
                      std::span<double> grad_in, std::span<double> grad_params) const {
    const double* w = params.data();
    double* gw = grad_params.data();
    double* gb = grad_params.data() + out_ch_ * in_ch_ * kernel_;
    const auto len = static_cast<std::ptrdiff_t>(length_);
    const auto pad = static_cast<std::ptrdiff_t>(kernel_ / 2);
    std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t o = 0; o < out_ch_; ++o) {
        const double* g = grad_out.data() + o * length_;
        double bias = 0.0;
        for (std::size_t t = 0; t < length_; ++t) bias += g[t];
        gb[o] += bias;
        for (std::size_t i = 0; i < in_ch_; ++i) {
            const double* src = in.data() + i * length_;
            double* gsrc = grad_in.data() + i * length_;
            const double* wk = w + (o * in_ch_ + i) * kernel_;
            double* gwk = gw + (o * in_ch_ + i) * kernel_;
            for (std::size_t k = 0; k < kernel_; ++k) {
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
                const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                const std::ptrdiff_t t1 = std::min(len, len - shift);
                const double wv = wk[k];
                double acc = 0.0;
                for (std::ptrdiff_t t = t0; t < t1; ++t) {
                    acc += g[t] * src[t + shift];
                    gsrc[t + shift] += wv * g[t];
                }
                gwk[k] += acc;
            }
        }
    }
}

nlohmann::json Conv1d::describe() const {
    return {{"kind", "conv1d"}, {"in_channels", in_ch_}, {"out_channels", out_ch_},
            {"length", length_}, {"kernel", kernel_}};
}

// ---------------------------------------------------------------------------
// Relu

void Relu::forward(std::span<const double>, std::span<const double> in, std::span<double> out,
                   std::span<double>) const {
    for (std::size_t i = 0; i < size_; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void Relu::backward(std::span<const double>, std::span<const double> in, std::span<const double>,
                    std::span<double>, std::span<const double> grad_out, std::span<double> grad_in,
                    std::span<double>) const {
    for (std::size_t i = 0; i < size_; ++i) grad_in[i] = in[i] > 0.0 ? grad_out[i] : 0.0;
}

nlohmann::json Relu::describe() const { return {{"kind", "relu"}, {"size", size_}}; }

// ---------------------------------------------------------------------------
// ResidualBlock

ResidualBlock::ResidualBlock(std::size_t channels, std::size_t length, std::size_t kernel)
    : first_(channels, channels, length, kernel),
      second_(channels, channels, length, kernel),
      channels_(channels),
      length_(length),
      kernel_(kernel),
      size_(channels * length) {}

void ResidualBlock::init(std::span<double> params, SplitMix64& rng) const {
    const std::size_t n = first_.param_count();
    first_.init(params.first(n), rng);
    second_.init(params.subspan(n, n), rng);
}

// scratch layout: [h1 | a1 | s | grad scratch x2]
void ResidualBlock::forward(std::span<const double> params, std::span<const double> in,
                            std::span<double> out, std::span<double> scratch) const {
    const std::size_t n = first_.param_count();
    auto h1 = scratch.subspan(0, size_);
    auto a1 = scratch.subspan(size_, size_);
    auto s = scratch.subspan(2 * size_, size_);
    first_.forward(params.first(n), in, h1, {});
    for (std::size_t i = 0; i < size_; ++i) a1[i] = h1[i] > 0.0 ? h1[i] : 0.0;
    second_.forward(params.subspan(n, n), a1, s, {});
    for (std::size_t i = 0; i < size_; ++i) {
        s[i] += in[i];
        out[i] = s[i] > 0.0 ? s[i] : 0.0;
    }
}

void ResidualBlock::backward(std::span<const double> params, std::span<const double> in,
                             std::span<const double>, std::span<double> scratch,
                             std::span<const double> grad_out, std::span<double> grad_in,
                             std::span<double> grad_params) const {
    const std::size_t n = first_.param_count();
    auto h1 = scratch.subspan(0, size_);
    auto a1 = scratch.subspan(size_, size_);
    auto s = scratch.subspan(2 * size_, size_);
    auto g_s = scratch.subspan(3 * size_, size_);
    auto g_a1 = scratch.subspan(4 * size_, size_);
    for (std::size_t i = 0; i < size_; ++i) g_s[i] = s[i] > 0.0 ? grad_out[i] : 0.0;
    second_.backward(params.subspan(n, n), a1, {}, {}, g_s, g_a1, grad_params.subspan(n, n));
    for (std::size_t i = 0; i < size_; ++i) {
        if (!(h1[i] > 0.0)) g_a1[i] = 0.0;
    }
    first_.backward(params.first(n), in, {}, {}, g_a1, grad_in, grad_params.first(n));
    for (std::size_t i = 0; i < size_; ++i) grad_in[i] += g_s[i];
}

nlohmann::json ResidualBlock::describe() const {
    return {{"kind", "residual"}, {"channels", channels_}, {"length", length_}, {"kernel", kernel_}};
}

// ---------------------------------------------------------------------------
// AvgPool1d

AvgPool1d::AvgPool1d(std::size_t channels, std::size_t length, std::size_t pool)
    : channels_(channels), length_(length), pool_(pool) {
    if (pool_ == 0 || length_ < pool_) throw ValidationError("pool size must lie in [1, length]");
}

void AvgPool1d::forward(std::span<const double>, std::span<const double> in, std::span<double> out,
                        std::span<double>) const {
    const std::size_t out_len = length_ / pool_;
    const double inv = 1.0 / static_cast<double>(pool_);
    for (std::size_t c = 0; c < channels_; ++c) {
        for (std::size_t t = 0; t < out_len; ++t) {
            double acc = 0.0;
            for (std::size_t q = 0; q < pool_; ++q) acc += in[c * length_ + t * pool_ + q];
            out[c * out_len + t] = acc * inv;
        }
    }
}

void AvgPool1d::backward(std::span<const double>, std::span<const double>, std::span<const double>,
                         std::span<double>, std::span<const double> grad_out,
                         std::span<double> grad_in, std::span<double>) const {
    const std::size_t out_len = length_ / pool_;
    const double inv = 1.0 / static_cast<double>(pool_);
    std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t c = 0; c < channels_; ++c) {
        for (std::size_t t = 0; t < out_len; ++t) {
            const double g = grad_out[c * out_len + t] * inv;
            for (std::size_t q = 0; q < pool_; ++q) grad_in[c * length_ + t * pool_ + q] = g;
        }
    }
}

nlohmann::json AvgPool1d::describe() const {
    return {{"kind", "avgpool1d"}, {"channels", channels_}, {"length", length_}, {"pool", pool_}};
}

std::shared_ptr<const Layer> layer_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    auto sz = [&](const char* key) { return j.at(key).get<std::size_t>(); };
    if (kind == "dense") return std::make_shared<Dense>(sz("in"), sz("out"));
    if (kind == "conv1d") {
        return std::make_shared<Conv1d>(sz("in_channels"), sz("out_channels"), sz("length"), sz("kernel"));
    }
    if (kind == "relu") return std::make_shared<Relu>(sz("size"));
    if (kind == "residual") return std::make_shared<ResidualBlock>(sz("channels"), sz("length"), sz("kernel"));
    if (kind == "avgpool1d") return std::make_shared<AvgPool1d>(sz("channels"), sz("length"), sz("pool"));
    throw FormatError("unknown layer kind '" + kind + "'");
}

}  // namespace matseg::nn
