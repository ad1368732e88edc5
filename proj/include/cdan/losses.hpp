/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cdan/nn.hpp"
#include "cdan/tensor.hpp"

namespace cdan {

/// Fixed feature map used by the perceptual loss. Never trained.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual Tensor features(const Tensor& images) const = 0;
};

/// Truncated VGG19 feature column: conv3x3 + ReLU stacks separated by 2x2
/// max pools, indexed like torchvision's `vgg19().features`.
class VggFeatures final : public FeatureExtractor {
public:
    static constexpr std::size_t kDefaultDepth = 20;

    /// Seed-fixed random weights (Kaiming-uniform).
    VggFeatures(std::size_t depth, std::uint64_t seed);

    /// Pretrained weights from a named-tensor archive with entries
    /// "features.<index>.weight" / "features.<index>.bias".
    static VggFeatures from_file(const std::string& path, std::size_t depth = kDefaultDepth);

    /// Activation after the first `depth` entries of the column.
    Tensor features(const Tensor& images) const override;

    std::size_t depth() const { return depth_; }
    /// Subtract the ImageNet mean and divide by the ImageNet std before the column.
    bool imagenet_normalize = false;

    /// Parameters named "features.<index>.{weight,bias}".
    nn::Registry registry();

private:
    struct Entry {
        enum class Kind { conv, relu, pool } kind;
        nn::Conv2d conv;
    };
    VggFeatures() = default;
    std::size_t depth_ = 0;
    std::vector<Entry> entries_;
};

/// Identity "extractor"; reduces the perceptual term to the pixel MSE.
class IdentityFeatures final : public FeatureExtractor {
public:
    Tensor features(const Tensor& images) const override { return images; }
};

struct LossConfig {
    double lambda = 0.25;
    std::shared_ptr<const FeatureExtractor> extractor;
};

/// (1/N) sum_i ||pred_i - target_i||^2, norm taken over all of sample i.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// mse_loss in feature space. Gradients reach `pred` only.
Tensor perceptual_loss(const FeatureExtractor* extractor, const Tensor& pred, const Tensor& target);

struct LossTerms {
    Tensor total;
    double mse = 0.0;
    /// Zero and not evaluated when lambda == 0.
    double perceptual = 0.0;
};

/// mse + lambda * perceptual.
LossTerms composite_loss(const LossConfig& config, const Tensor& pred, const Tensor& target);

}  // namespace cdan
