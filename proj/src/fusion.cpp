// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/fusion.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "matseg/encoder.hpp"
#include "matseg/error.hpp"
#include "matseg/parallel.hpp"

namespace matseg {

namespace {

void check_sources(std::span<const ProbabilityGrid> sources) {
    if (sources.empty()) throw ValidationError("fusion needs at least one prediction");
    const auto& first = sources.front();
    if (first.classes < 1 || first.classes > kMaxClasses) throw ValidationError("unsupported class count");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto& s = sources[i];
        if (s.width != first.width || s.height != first.height || s.classes != first.classes) {
            throw ValidationError("prediction " + std::to_string(i) +
                                  " differs in dimensions or class count from prediction 0");
        }
        if (s.probs.size() != s.pixel_count() * s.classes) {
            throw ValidationError("prediction " + std::to_string(i) + " has a malformed grid");
        }
    }
}

LabelMask empty_mask(const ProbabilityGrid& first) {
    LabelMask m;
    m.width = first.width;
    m.height = first.height;
    m.labels.assign(first.pixel_count(), kUnlabeled);
    m.palette = first.palette;
    if (m.palette.size() != first.classes) {
        m.palette.clear();
        for (std::size_t c = 0; c < first.classes; ++c) m.palette.push_back("class_" + std::to_string(c));
    }
    return m;
}

// `values` is scratch of size sources.size().
std::uint8_t fuse_pixel(std::span<const ProbabilityGrid> sources, std::size_t pixel, std::size_t classes,
                        std::vector<float>& values) {
    std::size_t best = 0;
    double best_sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t s = 0; s < sources.size(); ++s) values[s] = sources[s].probs[pixel * classes + c];
        std::sort(values.begin(), values.end());
        double sum = 0.0;
        for (const float v : values) sum += v;
        if (c == 0 || sum > best_sum) {
            best_sum = sum;
            best = c;
        }
    }
    return static_cast<std::uint8_t>(best);
}

void check_vote_inputs(const LabelMask& mask, const SegmentMask& segments) {
    mask.validate();
    segments.validate();
    if (mask.width != segments.width || mask.height != segments.height) {
        throw ValidationError("label mask and segment mask dimensions differ");
    }
}

// Winner per segment id; segments without labeled pixels are absent.
std::unordered_map<std::uint32_t, std::uint8_t> segment_winners(const LabelMask& mask,
                                                                const SegmentMask& segments) {
    std::map<std::uint32_t, std::vector<std::size_t>> counts;
    const std::size_t classes = mask.classes();
    for (std::size_t p = 0; p < mask.labels.size(); ++p) {
        const auto id = segments.segment_ids[p];
        const auto label = mask.labels[p];
        if (id == 0 || label == kUnlabeled) continue;
        auto& hist = counts[id];
        if (hist.empty()) hist.assign(classes, 0);
        ++hist[label];
    }
    std::unordered_map<std::uint32_t, std::uint8_t> winners;
    for (const auto& [id, hist] : counts) {
        const auto it = std::max_element(hist.begin(), hist.end());  // first maximum
        winners.emplace(id, static_cast<std::uint8_t>(it - hist.begin()));
    }
    return winners;
}

}  // namespace

LabelMask softmax_fuse(std::span<const ProbabilityGrid> sources, int threads) {
    check_sources(sources);
    LabelMask out = empty_mask(sources.front());
    const std::size_t classes = sources.front().classes;
    const auto n = static_cast<long long>(out.labels.size());
#pragma omp parallel num_threads(resolve_threads(threads))
    {
        std::vector<float> values(sources.size());
#pragma omp for schedule(static)
        for (long long p = 0; p < n; ++p) {
            out.labels[p] = fuse_pixel(sources, static_cast<std::size_t>(p), classes, values);
        }
    }
    return out;
}

LabelMask segment_vote(const LabelMask& mask, const SegmentMask& segments, int threads) {
    check_vote_inputs(mask, segments);
    const auto winners = segment_winners(mask, segments);
    LabelMask out = mask;
    const auto n = static_cast<long long>(mask.labels.size());
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
    for (long long p = 0; p < n; ++p) {
        const auto id = segments.segment_ids[p];
        if (id == 0) continue;
        const auto it = winners.find(id);
        if (it != winners.end()) out.labels[p] = it->second;
    }
    return out;
}

LabelMask argmax_mask(const ProbabilityGrid& grid) {
    return reference::softmax_fuse(std::span<const ProbabilityGrid>(&grid, 1));
}

std::vector<ProbabilityGrid> predict_msma_trials(const Network& model, const ImageStack& stack,
                                                 std::size_t k, std::span<const std::uint64_t> seeds,
                                                 int threads) {
    if (seeds.empty()) throw ValidationError("msma resampling needs at least one seed");
    std::vector<ProbabilityGrid> trials;
    trials.reserve(seeds.size());
    const BrdfDictionary unused;
    for (std::size_t t = 0; t < seeds.size(); ++t) {
        EncodeOptions opt;
        opt.mode = EncodingMode::msma;
        opt.k = k;
        opt.seed = seeds[t];
        auto grid = predict_tile(model, encode_tile(stack, unused, opt, threads), threads);
        grid.source = "msma_trial_" + std::to_string(t);
        trials.push_back(std::move(grid));
    }
    return trials;
}

LabelMask resample_fuse_msma(const Network& model, const ImageStack& stack, std::size_t k,
                             std::span<const std::uint64_t> seeds, int threads) {
    const auto trials = predict_msma_trials(model, stack, k, seeds, threads);
    return softmax_fuse(trials, threads);
}

namespace reference {

LabelMask softmax_fuse(std::span<const ProbabilityGrid> sources) {
    check_sources(sources);
    LabelMask out = empty_mask(sources.front());
    const std::size_t classes = sources.front().classes;
    std::vector<float> values(sources.size());
    for (std::size_t p = 0; p < out.labels.size(); ++p) {
        out.labels[p] = fuse_pixel(sources, p, classes, values);
    }
    return out;
}

LabelMask segment_vote(const LabelMask& mask, const SegmentMask& segments) {
    check_vote_inputs(mask, segments);
    const auto winners = segment_winners(mask, segments);
    LabelMask out = mask;
    for (std::size_t p = 0; p < mask.labels.size(); ++p) {
        const auto id = segments.segment_ids[p];
        if (id == 0) continue;
        const auto it = winners.find(id);
        if (it != winners.end()) out.labels[p] = it->second;
    }
    return out;
}

}  // namespace reference

}  // namespace matseg
