/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include <Eigen/Core>
#include <algorithm>

#include "cdan/error.hpp"
#include "cdan/ops.hpp"

namespace cdan::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;
using MatView = Eigen::Map<RowMat, 0, Strided>;
using ConstMatView = Eigen::Map<const RowMat, 0, Strided>;

// Upper bound on the im2col scratch buffer, in doubles.
constexpr std::size_t kColumnBudget = std::size_t{1} << 21;

// Sliding-window geometry between an "image" of channels x height x width
// and the grid of window positions out_h x out_w.
struct Geometry {
    std::size_t channels, height, width;
    std::size_t kh, kw;
    std::size_t stride, pad;
    std::size_t out_h, out_w;

    std::size_t rows() const { return channels * kh * kw; }
    std::size_t positions() const { return out_h * out_w; }
    std::size_t chunk() const { return std::clamp<std::size_t>(kColumnBudget / rows(), 1, positions()); }
};

// Window columns k in [lo, hi) of an output-row run starting at `ox` whose
// input coordinate (ox + k) * stride + offset lands inside [0, extent).
struct Span {
    std::size_t lo, hi;
};

Span valid_span(std::size_t ox, std::size_t run, std::size_t stride, std::ptrdiff_t offset, std::size_t extent) {
    const std::ptrdiff_t s = std::ptrdiff_t(stride);
    const std::ptrdiff_t first = offset < 0 ? (-offset + s - 1) / s : 0;
    const std::ptrdiff_t last_in = std::ptrdiff_t(extent) - 1 - offset;
    if (last_in < 0) return {0, 0};
    const std::ptrdiff_t last = last_in / s;
    const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(first - std::ptrdiff_t(ox), 0, std::ptrdiff_t(run));
    const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(last - std::ptrdiff_t(ox) + 1, lo, std::ptrdiff_t(run));
    return {std::size_t(lo), std::size_t(hi)};
}

// Visits positions q in [p0, p1) one output row at a time. `fn` receives the
// input row pointer offset (or -1 when the row falls in the padding), the
// column span and the running destination offset.
template <class Fn>
void for_each_run(const Geometry& g, std::size_t i, std::size_t j, std::size_t p0, std::size_t p1, Fn&& fn) {
    std::size_t q = p0, oy = p0 / g.out_w, ox = p0 % g.out_w, dst = 0;
    const std::ptrdiff_t x_off = std::ptrdiff_t(j) - std::ptrdiff_t(g.pad);
    while (q < p1) {
        const std::size_t run = std::min(g.out_w - ox, p1 - q);
        const std::ptrdiff_t y = std::ptrdiff_t(oy * g.stride + i) - std::ptrdiff_t(g.pad);
        const bool row_inside = y >= 0 && y < std::ptrdiff_t(g.height);
        const Span span = row_inside ? valid_span(ox, run, g.stride, x_off, g.width) : Span{0, 0};
        // x of the first valid column.
        const std::ptrdiff_t x0 = std::ptrdiff_t((ox + span.lo) * g.stride) + x_off;
        fn(row_inside ? y * std::ptrdiff_t(g.width) + x0 : -1, span, run, dst);
        dst += run;
        q += run;
        ++oy;
        ox = 0;
    }
}

// col[r, q - p0] for positions q in [p0, p1), r = (c * kh + i) * kw + j.
void im2col(const double* img, const Geometry& g, std::size_t p0, std::size_t p1, double* col) {
    const std::size_t len = p1 - p0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        const double* plane = img + c * g.height * g.width;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                double* row = col + ((c * g.kh + i) * g.kw + j) * len;
                for_each_run(g, i, j, p0, p1, [&](std::ptrdiff_t src, Span span, std::size_t run, std::size_t dst) {
                    double* out = row + dst;
                    std::fill(out, out + span.lo, 0.0);
                    if (g.stride == 1 && span.hi > span.lo) {
                        std::copy(plane + src, plane + src + (span.hi - span.lo), out + span.lo);
                    } else {
                        for (std::size_t k = span.lo; k < span.hi; ++k) out[k] = plane[src + std::ptrdiff_t((k - span.lo) * g.stride)];
                    }
                    std::fill(out + span.hi, out + run, 0.0);
                });
            }
        }
    }
}

// Scatter-add inverse of im2col.
void col2im(const double* col, const Geometry& g, std::size_t p0, std::size_t p1, double* img) {
    const std::size_t len = p1 - p0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        double* plane = img + c * g.height * g.width;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const double* row = col + ((c * g.kh + i) * g.kw + j) * len;
                for_each_run(g, i, j, p0, p1, [&](std::ptrdiff_t src, Span span, std::size_t, std::size_t dst) {
                    const double* in = row + dst;
                    for (std::size_t k = span.lo; k < span.hi; ++k) plane[src + std::ptrdiff_t((k - span.lo) * g.stride)] += in[k];
                });
            }
        }
    }
}

void check_conv_args(const char* op, const Tensor& input, const Tensor& weight, const Tensor& bias,
                     std::size_t in_channel_axis, std::size_t out_channel_axis, int stride, int padding) {
    if (input.ndim() != 4 || weight.ndim() != 4) {
        throw ShapeError(std::string(op) + ": expected 4-D input and weight, got input " + shape_str(input.shape()) +
                         " and weight " + shape_str(weight.shape()));
    }
    if (input.dim(1) != weight.dim(in_channel_axis)) {
        throw ShapeError(std::string(op) + ": input " + shape_str(input.shape()) + " has " +
                         std::to_string(input.dim(1)) + " channels but weight " + shape_str(weight.shape()) +
                         " expects " + std::to_string(weight.dim(in_channel_axis)));
    }
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != weight.dim(out_channel_axis))) {
        throw ShapeError(std::string(op) + ": bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    if (stride < 1) throw ValueError(std::string(op) + ": stride must be >= 1");
    if (padding < 0) throw ValueError(std::string(op) + ": padding must be >= 0");
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
    check_conv_args("conv2d", input, weight, bias, 1, 0, stride, padding);
    const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3);
    const std::size_t out_c = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    const std::size_t s = std::size_t(stride), p = std::size_t(padding);
    if (h + 2 * p < kh || w + 2 * p < kw) {
        throw ShapeError("conv2d: padded input " + shape_str(input.shape()) + " is smaller than kernel " +
                         shape_str(weight.shape()));
    }
    const Geometry g{input.dim(1), h, w, kh, kw, s, p, (h + 2 * p - kh) / s + 1, (w + 2 * p - kw) / s + 1};
    const std::size_t K = g.rows(), P = g.positions(), chunk = g.chunk();

    std::vector<double> out(n * out_c * P, 0.0);
    std::vector<double> col(K * chunk);
    const Eigen::Map<const RowMat> wmat(weight.data().data(), out_c, K);
    for (std::size_t b = 0; b < n; ++b) {
        const double* img = input.data().data() + b * g.channels * h * w;
        double* dst = out.data() + b * out_c * P;
        for (std::size_t p0 = 0; p0 < P; p0 += chunk) {
            const std::size_t p1 = std::min(P, p0 + chunk), len = p1 - p0;
            im2col(img, g, p0, p1, col.data());
            MatView block(dst + p0, out_c, len, Strided(P));
            block.noalias() = wmat * Eigen::Map<const RowMat>(col.data(), K, len);
        }
        if (bias.defined()) {
            for (std::size_t o = 0; o < out_c; ++o) {
                double* plane = dst + o * P;
                for (std::size_t q = 0; q < P; ++q) plane[q] += bias[o];
            }
        }
    }

    return Tensor::make_result(
        {n, out_c, g.out_h, g.out_w}, std::move(out), {input, weight, bias}, [g, n, out_c](detail::Node& self) {
            detail::Node& in = *self.parents[0];
            detail::Node& wt = *self.parents[1];
            detail::Node* bs = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
            const std::size_t K = g.rows(), P = g.positions(), chunk = g.chunk();
            const std::size_t in_size = g.channels * g.height * g.width;
            std::vector<double> col(K * chunk), dcol(K * chunk);
            const Eigen::Map<const RowMat> wmat(wt.data.data(), out_c, K);
            for (std::size_t b = 0; b < n; ++b) {
                const double* dout = self.grad.data() + b * out_c * P;
                for (std::size_t p0 = 0; p0 < P; p0 += chunk) {
                    const std::size_t p1 = std::min(P, p0 + chunk), len = p1 - p0;
                    ConstMatView dblock(dout + p0, out_c, len, Strided(P));
                    if (wt.requires_grad) {
                        im2col(in.data.data() + b * in_size, g, p0, p1, col.data());
                        Eigen::Map<RowMat> dw(wt.grad_buffer().data(), out_c, K);
                        dw.noalias() += dblock * Eigen::Map<const RowMat>(col.data(), K, len).transpose();
                    }
                    if (in.requires_grad) {
                        Eigen::Map<RowMat>(dcol.data(), K, len).noalias() = wmat.transpose() * dblock;
                        col2im(dcol.data(), g, p0, p1, in.grad_buffer().data() + b * in_size);
                    }
                }
                if (bs && bs->requires_grad) {
                    auto& db = bs->grad_buffer();
                    for (std::size_t o = 0; o < out_c; ++o) {
                        double acc = 0.0;
                        for (std::size_t q = 0; q < P; ++q) acc += dout[o * P + q];
                        db[o] += acc;
                    }
                }
            }
        });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
    check_conv_args("conv_transpose2d", input, weight, bias, 0, 1, stride, padding);
    const std::size_t n = input.dim(0), in_c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t out_c = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
    const std::size_t s = std::size_t(stride), p = std::size_t(padding);
    if ((h - 1) * s + kh <= 2 * p || (w - 1) * s + kw <= 2 * p) {
        throw ShapeError("conv_transpose2d: input " + shape_str(input.shape()) + " with weight " +
                         shape_str(weight.shape()) + " and padding " + std::to_string(p) + " gives empty output");
    }
    const std::size_t out_h = (h - 1) * s + kh - 2 * p, out_w = (w - 1) * s + kw - 2 * p;
    // The adjoint conv2d maps the output image back onto the input grid.
    const Geometry g{out_c, out_h, out_w, kh, kw, s, p, h, w};
    const std::size_t K = g.rows(), P = g.positions(), chunk = g.chunk();
    const std::size_t out_size = out_c * out_h * out_w;

    std::vector<double> out(n * out_size, 0.0);
    std::vector<double> col(K * chunk);
    const Eigen::Map<const RowMat> wmat(weight.data().data(), in_c, K);
    for (std::size_t b = 0; b < n; ++b) {
        const double* src = input.data().data() + b * in_c * P;
        double* dst = out.data() + b * out_size;
        for (std::size_t p0 = 0; p0 < P; p0 += chunk) {
            const std::size_t p1 = std::min(P, p0 + chunk), len = p1 - p0;
            Eigen::Map<RowMat>(col.data(), K, len).noalias() =
                wmat.transpose() * ConstMatView(src + p0, in_c, len, Strided(P));
            col2im(col.data(), g, p0, p1, dst);
        }
        if (bias.defined()) {
            for (std::size_t o = 0; o < out_c; ++o) {
                double* plane = dst + o * out_h * out_w;
                for (std::size_t q = 0; q < out_h * out_w; ++q) plane[q] += bias[o];
            }
        }
    }

    return Tensor::make_result(
        {n, out_c, out_h, out_w}, std::move(out), {input, weight, bias}, [g, n, in_c](detail::Node& self) {
            detail::Node& in = *self.parents[0];
            detail::Node& wt = *self.parents[1];
            detail::Node* bs = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
            const std::size_t K = g.rows(), P = g.positions(), chunk = g.chunk();
            const std::size_t out_size = g.channels * g.height * g.width;
            const std::size_t plane = g.height * g.width;
            std::vector<double> dcol(K * chunk);
            const Eigen::Map<const RowMat> wmat(wt.data.data(), in_c, K);
            for (std::size_t b = 0; b < n; ++b) {
                const double* dout = self.grad.data() + b * out_size;
                for (std::size_t p0 = 0; p0 < P; p0 += chunk) {
                    const std::size_t p1 = std::min(P, p0 + chunk), len = p1 - p0;
                    im2col(dout, g, p0, p1, dcol.data());
                    const Eigen::Map<const RowMat> dc(dcol.data(), K, len);
                    if (in.requires_grad) {
                        MatView din(in.grad_buffer().data() + b * in_c * P + p0, in_c, len, Strided(P));
                        din.noalias() += wmat * dc;
                    }
                    if (wt.requires_grad) {
                        Eigen::Map<RowMat> dw(wt.grad_buffer().data(), in_c, K);
                        dw.noalias() += ConstMatView(in.data.data() + b * in_c * P + p0, in_c, len, Strided(P)) *
                                        dc.transpose();
                    }
                }
                if (bs && bs->requires_grad) {
                    auto& db = bs->grad_buffer();
                    for (std::size_t o = 0; o < g.channels; ++o) {
                        double acc = 0.0;
                        for (std::size_t q = 0; q < plane; ++q) acc += dout[o * plane + q];
                        db[o] += acc;
                    }
                }
            }
        });
}

}  // namespace cdan::ops
