/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <span>
#include <vector>

#include "cdan/rng.hpp"
#include "cdan/tensor.hpp"

/// Differentiable operations. Image tensors use N x C x H x W layout.
namespace cdan::ops {

enum class Mode { train, eval };

/// Zero-padded 2-D cross-correlation. `bias` may be undefined.
/// weight: OutC x InC x kH x kW.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1, int padding = 0);

/// Adjoint of conv2d with respect to its input, plus bias.
/// weight: InC x OutC x kH x kW; output extent (in - 1) * stride - 2 * padding + k.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1,
                        int padding = 0);

struct BatchNormStats {
    std::vector<double> mean;
    std::vector<double> var;

    static BatchNormStats identity(std::size_t channels) {
        return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
    }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Per-channel batch normalization. Train mode normalizes with the biased
/// batch variance and folds the unbiased variance into `stats`; eval mode
/// reads `stats` only.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, Mode mode,
                  double eps = kBatchNormEps, double momentum = kBatchNormMomentum);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// 2x2 window, stride 2. Gradient goes to the first maximal element in
/// row-major window order.
Tensor max_pool2d(const Tensor& input);

/// Inverted dropout. Identity in eval mode or when p == 0.
Tensor dropout(const Tensor& input, double p, Mode mode, Rng& rng);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor concat_channels(std::span<const Tensor> parts);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// N x C x H x W -> N x C x 1 x 1.
Tensor global_avg_pool(const Tensor& x);
Tensor global_max_pool(const Tensor& x);

/// N x C x H x W -> N x 1 x H x W.
Tensor channel_mean(const Tensor& x);
Tensor channel_max(const Tensor& x);

/// x (N x C x H x W) times attn of shape N x C x 1 x 1 or N x 1 x H x W.
Tensor broadcast_mul(const Tensor& x, const Tensor& attn);

/// Reflect-pads the bottom and right edges (edge pixel not repeated).
Tensor pad_reflect(const Tensor& x, std::size_t bottom, std::size_t right);

/// Keeps the top-left height x width window.
Tensor crop(const Tensor& x, std::size_t height, std::size_t width);

}  // namespace cdan::ops
