// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "matseg/error.hpp"
#include "matseg/parallel.hpp"

namespace matseg {

namespace {

constexpr std::size_t kShards = 8;

std::size_t check_pair(const LabelMask& pred, const LabelMask& truth) {
    if (pred.width != truth.width || pred.height != truth.height ||
        pred.labels.size() != truth.labels.size()) {
        throw ValidationError("dimension mismatch: prediction " + std::to_string(pred.width) + "x" +
                              std::to_string(pred.height) + " vs truth " + std::to_string(truth.width) + "x" +
                              std::to_string(truth.height));
    }
    const std::size_t c = truth.classes();
    if (c == 0) throw ValidationError("truth mask has an empty palette");
    if (c > kMaxClasses) throw ValidationError("too many classes");
    return c;
}

void tally(const LabelMask& pred, const LabelMask& truth, std::size_t begin, std::size_t end, std::size_t c,
           std::uint64_t* counts) {
    for (std::size_t i = begin; i < end; ++i) {
        const std::uint8_t t = truth.labels[i];
        if (t == kUnlabeled) continue;
        const std::uint8_t p = pred.labels[i];
        if (t >= c) throw ValidationError("truth label " + std::to_string(t) + " outside the palette");
        if (p >= c) {
            throw ValidationError("prediction at pixel " + std::to_string(i) + " is " +
                                  (p == kUnlabeled ? std::string("UNLABELED") : std::to_string(p)) +
                                  " where truth is labeled");
        }
        ++counts[t * c + p];
    }
}

void require_nonempty(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ValidationError("metrics undefined: confusion matrix is empty");
}

double mean_present(const ConfusionMatrix& cm, const std::vector<double>& per_class) {
    require_nonempty(cm);
    double sum = 0.0;
    std::size_t n = 0;
    for (const double v : per_class) {
        if (std::isnan(v)) continue;
        sum += v;
        ++n;
    }
    return sum / static_cast<double>(n);
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::truth_count(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < classes; ++p) s += at(c, p);
    return s;
}

std::uint64_t ConfusionMatrix::pred_count(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < classes; ++t) s += at(t, c);
    return s;
}

ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& truth, int threads) {
    const std::size_t c = check_pair(pred, truth);
    const std::size_t n = truth.labels.size();
    // Fixed shard count so integer sums are combined the same way for any thread count.
    std::vector<std::vector<std::uint64_t>> partial(kShards, std::vector<std::uint64_t>(c * c, 0));
    std::vector<std::string> errors(kShards);
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
    for (int s = 0; s < static_cast<int>(kShards); ++s) {
        const std::size_t begin = n * s / kShards;
        const std::size_t end = n * (s + 1) / kShards;
        try {
            tally(pred, truth, begin, end, c, partial[s].data());
        } catch (const ValidationError& e) {
            errors[s] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw ValidationError(e);
    }
    ConfusionMatrix cm{c, std::vector<std::uint64_t>(c * c, 0)};
    for (const auto& part : partial) {
        for (std::size_t i = 0; i < c * c; ++i) cm.counts[i] += part[i];
    }
    return cm;
}

double pix_acc(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < cm.classes; ++c) trace += cm.at(c, c);
    return static_cast<double>(trace) / static_cast<double>(cm.total());
}

std::vector<double> class_f1(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.classes, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < cm.classes; ++c) {
        const std::uint64_t truth = cm.truth_count(c);
        if (truth == 0) continue;
        const double tp = static_cast<double>(cm.at(c, c));
        const double fp = static_cast<double>(cm.pred_count(c)) - tp;
        const double fn = static_cast<double>(truth) - tp;
        out[c] = 2.0 * tp / (2.0 * tp + fp + fn);
    }
    return out;
}

std::vector<double> class_iou(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.classes, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < cm.classes; ++c) {
        const std::uint64_t truth = cm.truth_count(c);
        if (truth == 0) continue;
        const double tp = static_cast<double>(cm.at(c, c));
        const double fp = static_cast<double>(cm.pred_count(c)) - tp;
        const double fn = static_cast<double>(truth) - tp;
        out[c] = tp / (tp + fp + fn);
    }
    return out;
}

double mean_f1(const ConfusionMatrix& cm) { return mean_present(cm, class_f1(cm)); }
double mean_iou(const ConfusionMatrix& cm) { return mean_present(cm, class_iou(cm)); }

nlohmann::json MetricsReport::to_json(const std::vector<std::string>& palette) const {
    nlohmann::json j;
    j["pix_acc"] = pix_acc;
    j["mean_f1"] = mean_f1;
    j["mean_iou"] = mean_iou;
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < f1.size(); ++c) {
        nlohmann::json row;
        row["class"] = c;
        if (c < palette.size()) row["name"] = palette[c];
        row["truth_pixels"] = matrix.truth_count(c);
        row["f1"] = std::isnan(f1[c]) ? nlohmann::json(nullptr) : nlohmann::json(f1[c]);
        row["iou"] = std::isnan(iou[c]) ? nlohmann::json(nullptr) : nlohmann::json(iou[c]);
        classes.push_back(row);
    }
    j["per_class"] = classes;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < matrix.classes; ++t) {
        std::vector<std::uint64_t> row(matrix.counts.begin() + t * matrix.classes,
                                       matrix.counts.begin() + (t + 1) * matrix.classes);
        rows.push_back(row);
    }
    j["confusion"] = rows;
    return j;
}

MetricsReport evaluate(const LabelMask& pred, const LabelMask& truth, int threads) {
    MetricsReport r;
    r.matrix = confusion(pred, truth, threads);
    r.pix_acc = pix_acc(r.matrix);
    r.f1 = class_f1(r.matrix);
    r.iou = class_iou(r.matrix);
    r.mean_f1 = mean_present(r.matrix, r.f1);
    r.mean_iou = mean_present(r.matrix, r.iou);
    return r;
}

namespace reference {

ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& truth) {
    const std::size_t c = check_pair(pred, truth);
    ConfusionMatrix cm{c, std::vector<std::uint64_t>(c * c, 0)};
    tally(pred, truth, 0, truth.labels.size(), c, cm.counts.data());
    return cm;
}

}  // namespace reference

}  // namespace matseg
