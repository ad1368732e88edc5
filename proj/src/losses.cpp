/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/losses.hpp"

#include <array>

#include "cdan/archive.hpp"
#include "cdan/error.hpp"
#include "cdan/ops.hpp"

namespace cdan {
namespace {

// Channel widths of the VGG19 feature column; 0 marks a max pool.
constexpr std::array<std::size_t, 21> kVgg19Plan = {64,  64,  0,   128, 128, 0,   256, 256, 256, 256, 0,
                                                     512, 512, 512, 512, 0,   512, 512, 512, 512, 0};

constexpr std::array<double, 3> kImagenetMean = {0.485, 0.456, 0.406};
constexpr std::array<double, 3> kImagenetStd = {0.229, 0.224, 0.225};

void require_same_shape(const char* op, const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw ShapeError(std::string(op) + ": prediction " + shape_str(pred.shape()) + " and target " +
                         shape_str(target.shape()) + " differ");
    }
}

}  // namespace

VggFeatures::VggFeatures(std::size_t depth, std::uint64_t seed) : depth_(depth) {
    std::size_t total = 0;
    for (std::size_t width : kVgg19Plan) total += width ? 2 : 1;
    if (depth == 0 || depth > total) {
        throw ValueError("VggFeatures: depth must be in [1, " + std::to_string(total) + "], got " +
                         std::to_string(depth));
    }
    Rng rng(seed);
    std::size_t channels = 3;
    for (std::size_t width : kVgg19Plan) {
        if (entries_.size() >= depth) break;
        if (width == 0) {
            entries_.push_back({Entry::Kind::pool, {}});
            continue;
        }
        Entry conv{Entry::Kind::conv, nn::Conv2d(channels, width, 3, 1, 1, rng)};
        conv.conv.weight.set_requires_grad(false);
        conv.conv.bias.set_requires_grad(false);
        entries_.push_back(std::move(conv));
        if (entries_.size() < depth) entries_.push_back({Entry::Kind::relu, {}});
        channels = width;
    }
}

VggFeatures VggFeatures::from_file(const std::string& path, std::size_t depth) {
    VggFeatures vgg(depth, 0);
    const Archive archive = read_archive(path);
    for (nn::ParamRef& p : vgg.registry().params) {
        const TensorRecord* rec = archive.find(p.name);
        if (!rec) throw UnknownTensorError("VGG weight file '" + path + "' lacks tensor '" + p.name + "'");
        if (rec->shape != p.tensor.shape()) {
            throw UnknownTensorError("VGG tensor '" + p.name + "' has shape " + shape_str(rec->shape) +
                                     ", expected " + shape_str(p.tensor.shape()));
        }
        std::copy(rec->values.begin(), rec->values.end(), p.tensor.mutable_data().begin());
    }
    return vgg;
}

nn::Registry VggFeatures::registry() {
    nn::Registry reg;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].kind == Entry::Kind::conv) entries_[i].conv.register_into("features." + std::to_string(i), reg);
    }
    return reg;
}

Tensor VggFeatures::features(const Tensor& images) const {
    Tensor h = images;
    if (imagenet_normalize) {
        // Per-channel affine map expressed as a fixed diagonal 1x1 conv.
        std::vector<double> w(9, 0.0), b(3);
        for (std::size_t c = 0; c < 3; ++c) {
            w[c * 4] = 1.0 / kImagenetStd[c];
            b[c] = -kImagenetMean[c] / kImagenetStd[c];
        }
        h = ops::conv2d(h, Tensor::from_data({3, 3, 1, 1}, std::move(w)), Tensor::from_data({3}, std::move(b)));
    }
    for (const Entry& e : entries_) {
        switch (e.kind) {
            case Entry::Kind::conv: h = e.conv.forward(h); break;
            case Entry::Kind::relu: h = ops::relu(h); break;
            case Entry::Kind::pool: h = ops::max_pool2d(h); break;
        }
    }
    return h;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape("mse_loss", pred, target);
    const Tensor diff = ops::sub(pred, target);
    return ops::scale(ops::sum(ops::mul(diff, diff)), 1.0 / double(pred.dim(0)));
}

Tensor perceptual_loss(const FeatureExtractor* extractor, const Tensor& pred, const Tensor& target) {
    if (!extractor) throw ValueError("perceptual_loss: feature extractor is not initialized");
    require_same_shape("perceptual_loss", pred, target);
    return mse_loss(extractor->features(pred), extractor->features(target.detach()));
}

LossTerms composite_loss(const LossConfig& config, const Tensor& pred, const Tensor& target) {
    if (!(config.lambda >= 0.0)) throw ValueError("composite_loss: lambda must be >= 0");
    const Tensor pixel = mse_loss(pred, target);
    LossTerms terms{pixel, pixel.item(), 0.0};
    if (config.lambda > 0.0) {
        const Tensor feature = perceptual_loss(config.extractor.get(), pred, target);
        terms.perceptual = feature.item();
        terms.total = ops::add(pixel, ops::scale(feature, config.lambda));
    }
    return terms;
}

}  // namespace cdan
