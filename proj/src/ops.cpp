/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include <algorithm>
#include <cmath>

#include "cdan/error.hpp"
#include "cdan/ops.hpp"

namespace cdan::ops {
namespace {

// Max ordering that lets NaN win, so a poisoned input is not silently dropped.
bool beats(double candidate, double best) { return candidate > best || (std::isnan(candidate) && !std::isnan(best)); }

struct Dims4 {
    std::size_t n, c, h, w;
    std::size_t plane() const { return h * w; }
};

Dims4 dims4(const char* op, const Tensor& x) {
    if (x.ndim() != 4) throw ShapeError(std::string(op) + ": expected N x C x H x W, got " + shape_str(x.shape()));
    return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " differ");
    }
}

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

// Elementwise op whose derivative is expressed through the saved output.
template <class F, class D>
Tensor unary(const Tensor& x, F f, D derivative_from_output) {
    std::vector<double> out(x.numel());
    std::transform(x.data().begin(), x.data().end(), out.begin(), f);
    return Tensor::make_result(x.shape(), std::move(out), {x}, [derivative_from_output](detail::Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * derivative_from_output(self.data[i]);
    });
}

// Reduction over the channel axis shared by channel_mean / channel_max.
Tensor reduce_channels(const Tensor& x, bool take_max) {
    const Dims4 d = dims4(take_max ? "channel_max" : "channel_mean", x);
    const std::size_t plane = d.plane();
    std::vector<double> out(d.n * plane);
    std::vector<std::size_t> arg;
    if (take_max) arg.resize(out.size());
    const double* src = x.data().data();
    for (std::size_t b = 0; b < d.n; ++b) {
        for (std::size_t q = 0; q < plane; ++q) {
            const double* p = src + b * d.c * plane + q;
            double acc = p[0];
            std::size_t best = 0;
            for (std::size_t c = 1; c < d.c; ++c) {
                const double v = p[c * plane];
                if (take_max) {
                    if (v > acc) acc = v, best = c;
                } else {
                    acc += v;
                }
            }
            out[b * plane + q] = take_max ? acc : acc / double(d.c);
            if (take_max) arg[b * plane + q] = best;
        }
    }
    return Tensor::make_result({d.n, 1, d.h, d.w}, std::move(out), {x},
                               [d, take_max, arg = std::move(arg)](detail::Node& self) {
                                   auto& gx = self.parents[0]->grad_buffer();
                                   const std::size_t plane = d.plane();
                                   for (std::size_t b = 0; b < d.n; ++b) {
                                       for (std::size_t q = 0; q < plane; ++q) {
                                           const double g = self.grad[b * plane + q];
                                           double* p = gx.data() + b * d.c * plane + q;
                                           if (take_max) {
                                               p[arg[b * plane + q] * plane] += g;
                                           } else {
                                               for (std::size_t c = 0; c < d.c; ++c) p[c * plane] += g / double(d.c);
                                           }
                                       }
                                   }
                               });
}

}  // namespace

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, Mode mode,
                  double eps, double momentum) {
    const Dims4 d = dims4("batch_norm", input);
    if (gamma.numel() != d.c || beta.numel() != d.c || stats.mean.size() != d.c || stats.var.size() != d.c) {
        throw ShapeError("batch_norm: parameters " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                         " do not match input " + shape_str(input.shape()));
    }
    const std::size_t plane = d.plane(), count = d.n * plane;
    if (mode == Mode::train && count < 2) {
        throw ValueError("batch_norm: train mode needs at least 2 values per channel, input is " +
                         shape_str(input.shape()));
    }
    const double* x = input.data().data();

    std::vector<double> mu(d.c), inv_std(d.c);
    for (std::size_t c = 0; c < d.c; ++c) {
        if (mode == Mode::eval) {
            mu[c] = stats.mean[c];
            inv_std[c] = 1.0 / std::sqrt(stats.var[c] + eps);
            continue;
        }
        double s = 0.0;
        for (std::size_t b = 0; b < d.n; ++b) {
            const double* p = x + (b * d.c + c) * plane;
            for (std::size_t q = 0; q < plane; ++q) s += p[q];
        }
        const double m = s / double(count);
        double ss = 0.0;
        for (std::size_t b = 0; b < d.n; ++b) {
            const double* p = x + (b * d.c + c) * plane;
            for (std::size_t q = 0; q < plane; ++q) ss += (p[q] - m) * (p[q] - m);
        }
        const double var = ss / double(count);
        mu[c] = m;
        inv_std[c] = 1.0 / std::sqrt(var + eps);
        stats.mean[c] = (1.0 - momentum) * stats.mean[c] + momentum * m;
        stats.var[c] = (1.0 - momentum) * stats.var[c] + momentum * ss / double(count - 1);
    }

    // Normalized activations are kept for the backward pass.
    std::vector<double> xhat(input.numel()), out(input.numel());
    for (std::size_t b = 0; b < d.n; ++b) {
        for (std::size_t c = 0; c < d.c; ++c) {
            const std::size_t off = (b * d.c + c) * plane;
            for (std::size_t q = 0; q < plane; ++q) {
                xhat[off + q] = (x[off + q] - mu[c]) * inv_std[c];
                out[off + q] = gamma[c] * xhat[off + q] + beta[c];
            }
        }
    }

    return Tensor::make_result(
        input.shape(), std::move(out), {input, gamma, beta},
        [d, mode, inv_std = std::move(inv_std), xhat = std::move(xhat)](detail::Node& self) {
            detail::Node& in = *self.parents[0];
            detail::Node& gm = *self.parents[1];
            detail::Node& bt = *self.parents[2];
            const std::size_t plane = d.plane();
            const double count = double(d.n * plane);
            for (std::size_t c = 0; c < d.c; ++c) {
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::size_t b = 0; b < d.n; ++b) {
                    const std::size_t off = (b * d.c + c) * plane;
                    for (std::size_t q = 0; q < plane; ++q) {
                        sum_g += self.grad[off + q];
                        sum_gx += self.grad[off + q] * xhat[off + q];
                    }
                }
                if (gm.requires_grad) gm.grad_buffer()[c] += sum_gx;
                if (bt.requires_grad) bt.grad_buffer()[c] += sum_g;
                if (!in.requires_grad) continue;
                auto& gx = in.grad_buffer();
                const double k = gm.data[c] * inv_std[c];
                for (std::size_t b = 0; b < d.n; ++b) {
                    const std::size_t off = (b * d.c + c) * plane;
                    for (std::size_t q = 0; q < plane; ++q) {
                        const double g = self.grad[off + q];
                        gx[off + q] += mode == Mode::eval
                                           ? k * g
                                           : k * (g - sum_g / count - xhat[off + q] * sum_gx / count);
                    }
                }
            }
        });
}

Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v < 0.0 ? 0.0 : v; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

Tensor max_pool2d(const Tensor& input) {
    const Dims4 d = dims4("max_pool2d", input);
    if (d.h % 2 || d.w % 2) {
        throw ShapeError("max_pool2d: spatial dims of " + shape_str(input.shape()) + " must be even");
    }
    const std::size_t oh = d.h / 2, ow = d.w / 2;
    std::vector<double> out(d.n * d.c * oh * ow);
    std::vector<std::size_t> arg(out.size());
    const double* x = input.data().data();
    for (std::size_t pc = 0; pc < d.n * d.c; ++pc) {
        const double* plane = x + pc * d.plane();
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                const std::size_t cand[4] = {2 * i * d.w + 2 * j, 2 * i * d.w + 2 * j + 1,
                                             (2 * i + 1) * d.w + 2 * j, (2 * i + 1) * d.w + 2 * j + 1};
                std::size_t best = cand[0];
                for (std::size_t k = 1; k < 4; ++k) {
                    if (beats(plane[cand[k]], plane[best])) best = cand[k];
                }
                const std::size_t o = (pc * oh + i) * ow + j;
                out[o] = plane[best];
                arg[o] = pc * d.plane() + best;
            }
        }
    }
    return Tensor::make_result({d.n, d.c, oh, ow}, std::move(out), {input}, [arg = std::move(arg)](detail::Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += self.grad[o];
    });
}

Tensor dropout(const Tensor& input, double p, Mode mode, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ValueError("dropout: p must be in [0, 1), got " + std::to_string(p));
    if (mode == Mode::eval || p == 0.0) return input;
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(input.numel()), out(input.numel());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
        out[i] = input[i] * mask[i];
    }
    return Tensor::make_result(input.shape(), std::move(out), {input}, [mask = std::move(mask)](detail::Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += self.grad[i] * mask[i];
    });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Tensor parts[] = {a, b};
    return concat_channels(parts);
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_channels: nothing to concatenate");
    const Dims4 first = dims4("concat_channels", parts[0]);
    std::size_t channels = 0;
    std::vector<std::size_t> widths;
    for (const Tensor& t : parts) {
        const Dims4 d = dims4("concat_channels", t);
        if (d.n != first.n || d.h != first.h || d.w != first.w) {
            throw ShapeError("concat_channels: " + shape_str(parts[0].shape()) + " and " + shape_str(t.shape()) +
                             " differ outside the channel axis");
        }
        widths.push_back(d.c * d.plane());
        channels += d.c;
    }
    const std::size_t sample = channels * first.plane();
    std::vector<double> out(first.n * sample);
    for (std::size_t b = 0; b < first.n; ++b) {
        double* dst = out.data() + b * sample;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const double* src = parts[k].data().data() + b * widths[k];
            dst = std::copy(src, src + widths[k], dst);
        }
    }
    return Tensor::make_result({first.n, channels, first.h, first.w}, std::move(out),
                               std::vector<Tensor>(parts.begin(), parts.end()),
                               [n = first.n, sample, widths](detail::Node& self) {
                                   for (std::size_t b = 0; b < n; ++b) {
                                       const double* src = self.grad.data() + b * sample;
                                       for (std::size_t k = 0; k < widths.size(); ++k) {
                                           detail::Node& part = *self.parents[k];
                                           if (part.requires_grad) {
                                               double* dst = part.grad_buffer().data() + b * widths[k];
                                               for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
                                           }
                                           src += widths[k];
                                       }
                                   }
                               });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        for (auto& parent : self.parents) {
            if (!parent->requires_grad) continue;
            auto& g = parent->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            detail::Node& parent = *self.parents[k];
            if (!parent.requires_grad) continue;
            const double sign = k == 0 ? 1.0 : -1.0;
            auto& g = parent.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        detail::Node& x = *self.parents[0];
        detail::Node& y = *self.parents[1];
        // x and y may alias (mul(t, t)); read operand data before accumulating.
        if (x.requires_grad) {
            auto& g = x.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.data[i];
        }
        if (y.requires_grad) {
            auto& g = y.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.data[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    if (!std::isfinite(factor)) throw ValueError("scale: factor must be finite");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    return Tensor::make_result(x.shape(), std::move(out), {x}, [factor](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return Tensor::make_result({1}, {acc}, {x}, [](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (double& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / double(x.numel())); }

Tensor global_avg_pool(const Tensor& x) {
    const Dims4 d = dims4("global_avg_pool", x);
    const std::size_t plane = d.plane();
    std::vector<double> out(d.n * d.c);
    for (std::size_t pc = 0; pc < out.size(); ++pc) {
        const double* p = x.data().data() + pc * plane;
        double acc = 0.0;
        for (std::size_t q = 0; q < plane; ++q) acc += p[q];
        out[pc] = acc / double(plane);
    }
    return Tensor::make_result({d.n, d.c, 1, 1}, std::move(out), {x}, [plane](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t pc = 0; pc < self.grad.size(); ++pc) {
            const double v = self.grad[pc] / double(plane);
            for (std::size_t q = 0; q < plane; ++q) g[pc * plane + q] += v;
        }
    });
}

Tensor global_max_pool(const Tensor& x) {
    const Dims4 d = dims4("global_max_pool", x);
    const std::size_t plane = d.plane();
    std::vector<double> out(d.n * d.c);
    std::vector<std::size_t> arg(out.size());
    for (std::size_t pc = 0; pc < out.size(); ++pc) {
        const double* p = x.data().data() + pc * plane;
        std::size_t best = 0;
        for (std::size_t k = 1; k < plane; ++k) {
            if (beats(p[k], p[best])) best = k;
        }
        out[pc] = p[best];
        arg[pc] = pc * plane + best;
    }
    return Tensor::make_result({d.n, d.c, 1, 1}, std::move(out), {x}, [arg = std::move(arg)](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t pc = 0; pc < arg.size(); ++pc) g[arg[pc]] += self.grad[pc];
    });
}

Tensor channel_mean(const Tensor& x) { return reduce_channels(x, false); }

Tensor channel_max(const Tensor& x) { return reduce_channels(x, true); }

Tensor broadcast_mul(const Tensor& x, const Tensor& attn) {
    const Dims4 d = dims4("broadcast_mul", x);
    const Dims4 a = dims4("broadcast_mul", attn);
    const bool per_channel = a.n == d.n && a.c == d.c && a.h == 1 && a.w == 1;
    const bool per_pixel = a.n == d.n && a.c == 1 && a.h == d.h && a.w == d.w;
    if (!per_channel && !per_pixel) {
        throw ShapeError("broadcast_mul: attention " + shape_str(attn.shape()) + " does not broadcast against " +
                         shape_str(x.shape()));
    }
    const std::size_t plane = d.plane();
    // Index of the attention value that scales element (b, c, q).
    auto attn_index = [d, plane, per_channel](std::size_t b, std::size_t c, std::size_t q) {
        return per_channel ? b * d.c + c : b * plane + q;
    };
    std::vector<double> out(x.numel());
    for (std::size_t b = 0; b < d.n; ++b) {
        for (std::size_t c = 0; c < d.c; ++c) {
            const std::size_t off = (b * d.c + c) * plane;
            for (std::size_t q = 0; q < plane; ++q) out[off + q] = attn[attn_index(b, c, q)] * x[off + q];
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), {x, attn}, [d, plane, attn_index](detail::Node& self) {
        detail::Node& xn = *self.parents[0];
        detail::Node& an = *self.parents[1];
        for (std::size_t b = 0; b < d.n; ++b) {
            for (std::size_t c = 0; c < d.c; ++c) {
                const std::size_t off = (b * d.c + c) * plane;
                for (std::size_t q = 0; q < plane; ++q) {
                    const std::size_t ai = attn_index(b, c, q);
                    const double g = self.grad[off + q];
                    if (xn.requires_grad) xn.grad_buffer()[off + q] += g * an.data[ai];
                    if (an.requires_grad) an.grad_buffer()[ai] += g * xn.data[off + q];
                }
            }
        }
    });
}

Tensor pad_reflect(const Tensor& x, std::size_t bottom, std::size_t right) {
    const Dims4 d = dims4("pad_reflect", x);
    if (bottom >= d.h || right >= d.w) {
        throw ShapeError("pad_reflect: padding (" + std::to_string(bottom) + ", " + std::to_string(right) +
                         ") must be smaller than the spatial dims of " + shape_str(x.shape()));
    }
    if (bottom == 0 && right == 0) return x;
    const std::size_t oh = d.h + bottom, ow = d.w + right;
    // Source pixel feeding each output pixel of one plane.
    std::vector<std::size_t> src(oh * ow);
    for (std::size_t i = 0; i < oh; ++i) {
        const std::size_t si = i < d.h ? i : 2 * (d.h - 1) - i;
        for (std::size_t j = 0; j < ow; ++j) {
            const std::size_t sj = j < d.w ? j : 2 * (d.w - 1) - j;
            src[i * ow + j] = si * d.w + sj;
        }
    }
    std::vector<double> out(d.n * d.c * oh * ow);
    for (std::size_t pc = 0; pc < d.n * d.c; ++pc) {
        for (std::size_t q = 0; q < src.size(); ++q) out[pc * src.size() + q] = x[pc * d.plane() + src[q]];
    }
    return Tensor::make_result({d.n, d.c, oh, ow}, std::move(out), {x},
                               [planes = d.n * d.c, in_plane = d.plane(), src = std::move(src)](detail::Node& self) {
                                   auto& g = self.parents[0]->grad_buffer();
                                   for (std::size_t pc = 0; pc < planes; ++pc) {
                                       for (std::size_t q = 0; q < src.size(); ++q) {
                                           g[pc * in_plane + src[q]] += self.grad[pc * src.size() + q];
                                       }
                                   }
                               });
}

Tensor crop(const Tensor& x, std::size_t height, std::size_t width) {
    const Dims4 d = dims4("crop", x);
    if (height == 0 || width == 0 || height > d.h || width > d.w) {
        throw ShapeError("crop: cannot take " + std::to_string(height) + "x" + std::to_string(width) + " from " +
                         shape_str(x.shape()));
    }
    if (height == d.h && width == d.w) return x;
    std::vector<double> out(d.n * d.c * height * width);
    for (std::size_t pc = 0; pc < d.n * d.c; ++pc) {
        for (std::size_t i = 0; i < height; ++i) {
            const double* row = x.data().data() + pc * d.plane() + i * d.w;
            std::copy(row, row + width, out.begin() + std::ptrdiff_t((pc * height + i) * width));
        }
    }
    return Tensor::make_result({d.n, d.c, height, width}, std::move(out), {x}, [d, height, width](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t pc = 0; pc < d.n * d.c; ++pc) {
            for (std::size_t i = 0; i < height; ++i) {
                for (std::size_t j = 0; j < width; ++j) {
                    g[pc * d.plane() + i * d.w + j] += self.grad[(pc * height + i) * width + j];
                }
            }
        }
    });
}

}  // namespace cdan::ops
