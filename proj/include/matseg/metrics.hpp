// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "matseg/imagery.hpp"

namespace matseg {

/// C x C counts, rows = truth, columns = prediction.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::uint64_t> counts;

    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
    std::uint64_t total() const;
    std::uint64_t truth_count(std::size_t c) const;
    std::uint64_t pred_count(std::size_t c) const;
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Tallies every pixel whose truth is labeled. A prediction that is
/// UNLABELED or outside [0, C) at such a pixel is a ValidationError.
ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& truth, int threads = 0);

/// Per-class scores are NaN for classes with no truth pixels; those classes
/// are left out of the means. All three throw on an empty matrix.
double pix_acc(const ConfusionMatrix& cm);
double mean_f1(const ConfusionMatrix& cm);
double mean_iou(const ConfusionMatrix& cm);
std::vector<double> class_f1(const ConfusionMatrix& cm);
std::vector<double> class_iou(const ConfusionMatrix& cm);

struct MetricsReport {
    double pix_acc = 0.0;
    double mean_f1 = 0.0;
    double mean_iou = 0.0;
    std::vector<double> f1;
    std::vector<double> iou;
    ConfusionMatrix matrix;

    nlohmann::json to_json(const std::vector<std::string>& palette = {}) const;
};

MetricsReport evaluate(const LabelMask& pred, const LabelMask& truth, int threads = 0);

namespace reference {
ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& truth);
}  // namespace reference

}  // namespace matseg
