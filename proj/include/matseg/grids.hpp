// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace matseg {

enum class EncodingMode { mssa, msma, rr };

std::string_view to_string(EncodingMode mode) noexcept;
EncodingMode parse_encoding_mode(std::string_view text);

/// Per-pixel feature vectors, pixel-major: pixel p owns
/// values[p*feature_len, (p+1)*feature_len).
struct FeatureGrid {
    int width = 0;
    int height = 0;
    std::size_t feature_len = 0;
    EncodingMode mode = EncodingMode::rr;
    std::vector<float> values;

    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::span<const float> feature(std::size_t pixel) const {
        return std::span<const float>(values).subspan(pixel * feature_len, feature_len);
    }
    bool operator==(const FeatureGrid&) const = default;
};

/// Per-pixel class distributions, pixel-major with `classes` values per pixel.
struct ProbabilityGrid {
    int width = 0;
    int height = 0;
    std::size_t classes = 0;
    std::string source;
    std::vector<std::string> palette;
    std::vector<float> probs;

    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::span<const float> at(std::size_t pixel) const {
        return std::span<const float>(probs).subspan(pixel * classes, classes);
    }
    bool operator==(const ProbabilityGrid&) const = default;
};

// JSON header + raw little-endian float32 sidecar (`<stem>.f32`).
void save_features(const FeatureGrid& grid, const std::filesystem::path& header);
FeatureGrid load_features(const std::filesystem::path& header);
void save_prediction(const ProbabilityGrid& grid, const std::filesystem::path& header);
ProbabilityGrid load_prediction(const std::filesystem::path& header);

}  // namespace matseg
