/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "cdan/error.hpp"

namespace cdan {

std::uint8_t quantize_unit(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
}

FloatImage to_float(const Image& img) {
    FloatImage out{3, img.height, img.width, std::vector<double>(img.pixels.size())};
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                out.values[(c * img.height + y) * img.width + x] = img.at(y, x, c) / 255.0;
            }
        }
    }
    return out;
}

Image to_u8(const FloatImage& img) {
    if (img.channels != 3) throw ShapeError("to_u8: expected 3 channels, got " + std::to_string(img.channels));
    Image out(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = quantize_unit(img.at(c, y, x));
        }
    }
    return out;
}

Tensor images_to_tensor(std::span<const FloatImage> images) {
    if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
    const FloatImage& first = images.front();
    std::vector<double> data;
    data.reserve(images.size() * first.values.size());
    for (const FloatImage& img : images) {
        if (img.channels != first.channels || img.height != first.height || img.width != first.width) {
            throw ShapeError("images_to_tensor: images in a batch must share dimensions");
        }
        data.insert(data.end(), img.values.begin(), img.values.end());
    }
    return Tensor::from_data({images.size(), first.channels, first.height, first.width}, std::move(data));
}

std::vector<FloatImage> tensor_to_images(const Tensor& batch) {
    if (batch.ndim() != 4) throw ShapeError("tensor_to_images: expected N x C x H x W, got " + shape_str(batch.shape()));
    const std::size_t n = batch.dim(0), per = batch.numel() / n;
    std::vector<FloatImage> out;
    for (std::size_t b = 0; b < n; ++b) {
        const auto first = batch.data().begin() + std::ptrdiff_t(b * per);
        out.push_back({batch.dim(1), batch.dim(2), batch.dim(3), std::vector<double>(first, first + std::ptrdiff_t(per))});
    }
    return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("PNG decode failed: " + msg);
    }
    if (png.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&png);
        throw UnsupportedFormatError("unsupported PNG: 16-bit samples (only 8-bit RGB is accepted)");
    }
    if (png.format != PNG_FORMAT_RGB) {
        png_image_free(&png);
        throw UnsupportedFormatError("unsupported PNG color type (only 8-bit RGB is accepted)");
    }
    Image img(png.height, png.width);
    if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("PNG decode failed: " + msg);
    }
    return img;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.height == 0 || img.width == 0 || img.pixels.size() != img.height * img.width * 3) {
        throw ShapeError("encode_png: malformed image buffer");
    }
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = png_uint_32(img.width);
    png.height = png_uint_32(img.height);
    png.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("PNG encode failed: ") + png.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("PNG encode failed: ") + png.message);
    }
    out.resize(size);
    return out;
}

Image read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_png(bytes);
    } catch (const UnsupportedFormatError& e) {
        throw UnsupportedFormatError(path + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

void write_png(const std::string& path, const Image& img) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

Image resize_bilinear(const Image& img, std::size_t out_height, std::size_t out_width) {
    if (out_height == 0 || out_width == 0) throw ValueError("resize_bilinear: target dims must be >= 1");
    if (img.height == 0 || img.width == 0) throw ValueError("resize_bilinear: empty source image");
    struct Tap {
        std::size_t lo, hi;
        double frac;
    };
    auto taps = [](std::size_t in, std::size_t out) {
        std::vector<Tap> t(out);
        const double scale = double(in) / double(out);
        for (std::size_t i = 0; i < out; ++i) {
            const double src = std::clamp((double(i) + 0.5) * scale - 0.5, 0.0, double(in - 1));
            const std::size_t lo = std::size_t(std::floor(src));
            t[i] = {lo, std::min(lo + 1, in - 1), src - double(lo)};
        }
        return t;
    };
    const auto ty = taps(img.height, out_height);
    const auto tx = taps(img.width, out_width);
    Image out(out_height, out_width);
    for (std::size_t y = 0; y < out_height; ++y) {
        for (std::size_t x = 0; x < out_width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = img.at(ty[y].lo, tx[x].lo, c) * (1.0 - tx[x].frac) + img.at(ty[y].lo, tx[x].hi, c) * tx[x].frac;
                const double bottom =
                    img.at(ty[y].hi, tx[x].lo, c) * (1.0 - tx[x].frac) + img.at(ty[y].hi, tx[x].hi, c) * tx[x].frac;
                const double v = top * (1.0 - ty[y].frac) + bottom * ty[y].frac;
                out.at(y, x, c) = static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
            }
        }
    }
    return out;
}

}  // namespace cdan
