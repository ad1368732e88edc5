/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "cdan/error.hpp"
#include "cdan/rng.hpp"

namespace cdan {

namespace fs = std::filesystem;

std::vector<std::string> list_png_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: '" + dir + "'");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

std::vector<ImagePair> load_paired_dataset(const std::string& root, const std::string& split,
                                           std::optional<ResizeTarget> resize) {
    const fs::path base = split.empty() ? fs::path(root) : fs::path(root) / split;
    const fs::path low_dir = base / "low", high_dir = base / "high";
    const auto low = list_png_files(low_dir.string());
    const auto high = list_png_files(high_dir.string());
    if (low.empty() && high.empty()) throw IoError("dataset '" + base.string() + "' contains no PNG pairs");

    const std::set<std::string> high_set(high.begin(), high.end()), low_set(low.begin(), low.end());
    for (const auto& name : low) {
        if (!high_set.count(name)) throw IoError("unmatched file: " + (low_dir / name).string() + " has no counterpart in high/");
    }
    for (const auto& name : high) {
        if (!low_set.count(name)) throw IoError("unmatched file: " + (high_dir / name).string() + " has no counterpart in low/");
    }

    auto load = [&](const fs::path& path) {
        Image img = read_png(path.string());
        if (resize) img = resize_bilinear(img, resize->height, resize->width);
        return to_float(img);
    };
    std::vector<ImagePair> pairs;
    for (const auto& name : low) {
        ImagePair pair{fs::path(name).stem().string(), load(low_dir / name), load(high_dir / name)};
        if (pair.low.height != pair.high.height || pair.low.width != pair.high.width) {
            throw ShapeError("pair '" + name + "' has mismatched low/high dimensions");
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed + epoch);
    // Fisher-Yates with our own index mapping; std::shuffle is not portable.
    for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

std::pair<Tensor, Tensor> make_batch(const std::vector<ImagePair>& pairs, std::span<const std::size_t> indices) {
    std::vector<FloatImage> low, high;
    for (std::size_t i : indices) {
        if (i >= pairs.size()) throw ValueError("make_batch: index out of range");
        low.push_back(pairs[i].low);
        high.push_back(pairs[i].high);
    }
    return {images_to_tensor(low), images_to_tensor(high)};
}

}  // namespace cdan
