/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

// Test-only helpers. The gradient checker and the loop oracles share no code
// with the library kernels.

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cdan/rng.hpp"
#include "cdan/tensor.hpp"

namespace cdan::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

inline bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
               return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
           });
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

struct NamedLeaf {
    std::string name;
    Tensor tensor;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;  // "<leaf>[index] analytic=... numeric=..."
    std::size_t checked = 0;
    std::size_t kinks = 0;  // coordinates judged on a one-sided difference
};

/// Gradients smaller than this are compared on an absolute scale. The floor
/// is raised to 1e5 times the central-difference roundoff bound eps*|L|/h so
/// gradients that are analytically zero do not compare against pure noise.
inline constexpr double kGradFloor = 1e-6;
inline constexpr double kRoundoffMargin = 1e5;
inline constexpr double kFdStep = 1e-5;
/// One-sided differences further apart than this (relative) may mean a ReLU or
/// max-pool kink lies within one step of the probed point. Matches the check
/// tolerance, since a kink shifts the central difference by about half the gap.
inline constexpr double kKinkGap = 1e-4;

/// Compares backward() against central differences of `loss_fn`.
///
/// When a kink lies within one step of the probed point, the central
/// difference averages two different slopes. The forward and backward
/// differences then disagree, and the analytic value may match either one of
/// them, since the point sits on one smooth side of the kink. Strong
/// curvature also separates them, so the central difference stays a candidate.
///
/// `loss_fn` must rebuild the graph from the current leaf values and be a
/// deterministic function of them. Up to `samples_per_leaf` coordinates of
/// each leaf are probed (all of them when the leaf is smaller).
inline GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::vector<NamedLeaf> leaves,
                                       std::size_t samples_per_leaf, std::uint64_t seed) {
    for (NamedLeaf& leaf : leaves) leaf.tensor.zero_grad();
    const Tensor loss = loss_fn();
    const double center = loss.item();
    const double floor = std::max(
        kGradFloor, kRoundoffMargin * std::numeric_limits<double>::epsilon() * std::abs(loss.item()) / kFdStep);
    loss.backward();
    Rng rng(seed);
    GradCheckResult result;
    for (NamedLeaf& leaf : leaves) {
        const std::vector<double> analytic(leaf.tensor.grad().begin(), leaf.tensor.grad().end());
        std::vector<std::size_t> idx;
        const std::size_t n = leaf.tensor.numel();
        if (n <= samples_per_leaf) {
            for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        } else {
            for (std::size_t k = 0; k < samples_per_leaf; ++k) idx.push_back(rng.below(n));
        }
        auto values = leaf.tensor.mutable_data();
        for (std::size_t i : idx) {
            const double saved = values[i];
            values[i] = saved + kFdStep;
            const double up = loss_fn().item();
            values[i] = saved - kFdStep;
            const double down = loss_fn().item();
            values[i] = saved;
            auto relative = [&](double numeric) {
                return std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            };
            double numeric = (up - down) / (2.0 * kFdStep);
            double rel = relative(numeric);
            const double forward = (up - center) / kFdStep, backward = (center - down) / kFdStep;
            if (std::abs(forward - backward) > kKinkGap * std::max({std::abs(forward), std::abs(backward), floor})) {
                ++result.kinks;
                for (double candidate : {forward, backward}) {
                    if (relative(candidate) < rel) {
                        numeric = candidate;
                        rel = relative(candidate);
                    }
                }
            }
            ++result.checked;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst = leaf.name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic[i]) +
                               " numeric=" + std::to_string(numeric);
            }
        }
        leaf.tensor.zero_grad();
    }
    return result;
}

/// Fixed random projection to a scalar, so every output element carries a
/// distinct weight in the checked loss.
inline Tensor projection_weights(const Shape& shape, std::uint64_t seed) {
    Rng rng(seed);
    return random_tensor(shape, rng, 0.5, 1.5);
}

// ---- Direct oracles ------------------------------------------------------

/// Six nested loops over batch, output channel, output pixel and kernel taps.
inline std::vector<double> conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t O = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    const std::size_t OH = (H + 2 * pad - KH) / stride + 1, OW = (W + 2 * pad - KW) / stride + 1;
    std::vector<double> out(N * O * OH * OW, 0.0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t i = 0; i < OH; ++i)
                for (std::size_t j = 0; j < OW; ++j) {
                    double acc = b.defined() ? b[o] : 0.0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t ki = 0; ki < KH; ++ki)
                            for (std::size_t kj = 0; kj < KW; ++kj) {
                                const long y = long(i * stride + ki) - pad, xx = long(j * stride + kj) - pad;
                                if (y < 0 || xx < 0 || y >= long(H) || xx >= long(W)) continue;
                                acc += x[((n * C + c) * H + y) * W + xx] * w[((o * C + c) * KH + ki) * KW + kj];
                            }
                    out[((n * O + o) * OH + i) * OW + j] = acc;
                }
    return out;
}

/// Each input pixel scatters kernel-weighted copies into the output.
inline std::vector<double> conv_transpose2d_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                                                   int pad) {
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t O = w.dim(1), KH = w.dim(2), KW = w.dim(3);
    const std::size_t OH = (H - 1) * stride + KH - 2 * pad, OW = (W - 1) * stride + KW - 2 * pad;
    std::vector<double> out(N * O * OH * OW, 0.0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j)
                    for (std::size_t o = 0; o < O; ++o)
                        for (std::size_t ki = 0; ki < KH; ++ki)
                            for (std::size_t kj = 0; kj < KW; ++kj) {
                                const long y = long(i * stride + ki) - pad, xx = long(j * stride + kj) - pad;
                                if (y < 0 || xx < 0 || y >= long(OH) || xx >= long(OW)) continue;
                                out[((n * O + o) * OH + y) * OW + xx] +=
                                    x[((n * C + c) * H + i) * W + j] * w[((c * O + o) * KH + ki) * KW + kj];
                            }
    if (b.defined()) {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < O; ++o)
                for (std::size_t q = 0; q < OH * OW; ++q) out[(n * O + o) * OH * OW + q] += b[o];
    }
    return out;
}

}  // namespace cdan::testing
