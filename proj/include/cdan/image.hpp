/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdan/tensor.hpp"

namespace cdan {

/// Interleaved 8-bit RGB, row-major.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    Image() = default;
    Image(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), pixels(h * w * 3, fill) {}

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
    bool operator==(const Image&) const = default;
};

/// Planar float image (channels x height x width), nominally in [0, 1].
struct FloatImage {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    double at(std::size_t c, std::size_t y, std::size_t x) const { return values[(c * height + y) * width + x]; }
    bool operator==(const FloatImage&) const = default;
};

/// Clamp to [0, 1], scale by 255, round half up.
std::uint8_t quantize_unit(double v);

FloatImage to_float(const Image& img);
Image to_u8(const FloatImage& img);

/// Stacks 3-channel float images of equal size into N x 3 x H x W.
Tensor images_to_tensor(std::span<const FloatImage> images);
/// Splits N x C x H x W into planar float images.
std::vector<FloatImage> tensor_to_images(const Tensor& batch);

/// Throws UnsupportedFormatError unless the PNG is 8-bit RGB.
Image decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& img);

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

/// Bilinear resampling with half-pixel centers and edge clamping.
Image resize_bilinear(const Image& img, std::size_t out_height, std::size_t out_width);

}  // namespace cdan
