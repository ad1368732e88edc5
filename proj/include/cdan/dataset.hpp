/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdan/image.hpp"

namespace cdan {

struct ImagePair {
    std::string id;  // filename stem
    FloatImage low;
    FloatImage high;
};

struct ResizeTarget {
    std::size_t height;
    std::size_t width;
};

/// Training resolution.
inline constexpr ResizeTarget kTrainResize{200, 200};

/// Loads `<root>/<split>/{low,high}/*.png` (or `<root>/{low,high}` when
/// `split` is empty), pairing files by name. Pairs come back sorted by id.
/// Every file must have a counterpart in the other directory.
std::vector<ImagePair> load_paired_dataset(const std::string& root, const std::string& split = "",
                                           std::optional<ResizeTarget> resize = std::nullopt);

/// Sorted *.png filenames (not paths) in `dir`.
std::vector<std::string> list_png_files(const std::string& dir);

/// Permutation of [0, count) for one epoch, a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch);

/// Stacks the selected pairs into (low, high) N x 3 x H x W tensors.
std::pair<Tensor, Tensor> make_batch(const std::vector<ImagePair>& pairs, std::span<const std::size_t> indices);

}  // namespace cdan
