/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include "cdan/error.hpp"

namespace cdan {
namespace {

std::uint8_t round_clamped(double v) { return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5)); }

}  // namespace

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return round_clamped(0.299 * r + 0.587 * g + 0.114 * b);
}

Image grayscale(const Image& img) {
    Image out(img.height, img.width);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
        const std::uint8_t l = luma(img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]);
        out.pixels[i] = out.pixels[i + 1] = out.pixels[i + 2] = l;
    }
    return out;
}

Image blend(const Image& degenerate, const Image& original, double alpha) {
    if (degenerate.height != original.height || degenerate.width != original.width ||
        degenerate.pixels.size() != original.pixels.size()) {
        throw ShapeError("blend: image sizes " + std::to_string(degenerate.height) + "x" +
                         std::to_string(degenerate.width) + " and " + std::to_string(original.height) + "x" +
                         std::to_string(original.width) + " differ");
    }
    if (!std::isfinite(alpha)) throw ValueError("blend: alpha must be finite");
    Image out(original.height, original.width);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = round_clamped(degenerate.pixels[i] * (1.0 - alpha) + original.pixels[i] * alpha);
    }
    return out;
}

Image enhance_color(const Image& img, double alpha) { return blend(grayscale(img), img, alpha); }

std::uint8_t mean_luma(const Image& img) {
    if (img.pixels.empty()) throw ShapeError("mean_luma: empty image");
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) total += luma(img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]);
    return round_clamped(double(total) / double(img.height * img.width));
}

Image enhance_contrast(const Image& img, double alpha) {
    return blend(Image(img.height, img.width, mean_luma(img)), img, alpha);
}

Image postprocess(const Image& img, const EnhanceConfig& config) {
    return enhance_color(enhance_contrast(img, config.alpha_contrast), config.alpha_color);
}

}  // namespace cdan
