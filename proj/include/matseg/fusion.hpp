// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "matseg/brdf.hpp"
#include "matseg/classifier.hpp"
#include "matseg/grids.hpp"
#include "matseg/imagery.hpp"

namespace matseg {

/// Per pixel: argmax_c of the summed class probabilities over all sources,
/// lowest class index on ties. Each pixel's sum is formed over the sources'
/// values in ascending order, so the result does not depend on source order.
/// The output palette is taken from the first source (or generated).
LabelMask softmax_fuse(std::span<const ProbabilityGrid> sources, int threads = 0);

/// Every non-background segment takes the modal class of its labeled pixels
/// (lowest index on ties). Background pixels and segments without labeled
/// pixels are left unchanged.
LabelMask segment_vote(const LabelMask& mask, const SegmentMask& segments, int threads = 0);

/// Argmax of one prediction grid.
LabelMask argmax_mask(const ProbabilityGrid& grid);

/// One MSMA encoding + prediction per seed.
std::vector<ProbabilityGrid> predict_msma_trials(const Network& model, const ImageStack& stack,
                                                 std::size_t k, std::span<const std::uint64_t> seeds,
                                                 int threads = 0);

/// T = seeds.size() MSMA resamplings fused with softmax_fuse.
LabelMask resample_fuse_msma(const Network& model, const ImageStack& stack, std::size_t k,
                             std::span<const std::uint64_t> seeds, int threads = 0);

namespace reference {
LabelMask softmax_fuse(std::span<const ProbabilityGrid> sources);
LabelMask segment_vote(const LabelMask& mask, const SegmentMask& segments);
}  // namespace reference

}  // namespace matseg
