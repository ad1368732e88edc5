/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include "cdan/image.hpp"

namespace cdan {

struct EnhanceConfig {
    double alpha_color = 1.35;
    double alpha_contrast = 1.12;
};

/// BT.601 luma of one pixel, rounded half up.
std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Luma replicated into all three channels.
Image grayscale(const Image& img);

/// degenerate * (1 - alpha) + original * alpha, clamped to [0, 255] and
/// rounded half up. alpha > 1 extrapolates away from `degenerate`.
Image blend(const Image& degenerate, const Image& original, double alpha);

/// Interpolates against the grayscale version (saturation).
Image enhance_color(const Image& img, double alpha);

/// Interpolates against a flat gray image at the rounded mean luma.
Image enhance_contrast(const Image& img, double alpha);

/// Rounded-half-up mean of the per-pixel luma.
std::uint8_t mean_luma(const Image& img);

/// Contrast, then color.
Image postprocess(const Image& img, const EnhanceConfig& config);

}  // namespace cdan
