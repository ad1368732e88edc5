/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "cdan/nn.hpp"

namespace cdan {

struct CdanConfig {
    /// Input width followed by the four encoder stage widths.
    std::vector<std::size_t> encoder_channels{3, 64, 128, 256, 512};
    /// Bottleneck width followed by the outputs of the four transposed convs.
    std::vector<std::size_t> decoder_channels{512, 256, 128, 64, 32};
    std::size_t dense_layers = 4;
    std::size_t growth_rate = 16;
    double dropout = 0.2;
    std::size_t cbam_reduction = 16;
    std::size_t out_channels = 3;

    /// Throws ValueError on an inconsistent schedule.
    void validate() const;
    bool operator==(const CdanConfig&) const = default;
};

/// Spatial extent (height, width) of an image before padding.
struct SpatialDims {
    std::size_t height = 0;
    std::size_t width = 0;
    bool operator==(const SpatialDims&) const = default;
};

/// Reflect-pads bottom/right so both spatial dims become multiples of `multiple`.
std::pair<Tensor, SpatialDims> pad_to_multiple(const Tensor& x, std::size_t multiple = 8);
Tensor crop_to(const Tensor& x, SpatialDims dims);

/// Shapes observed during one forward pass.
struct ForwardTrace {
    Shape padded_input;
    std::vector<Shape> skips;  // S1..S4
    Shape bottleneck;
    std::vector<Shape> gates;  // one per dense branch, finest resolution first
};

class CdanModel {
public:
    /// Deterministic initialization from `seed`.
    CdanModel(CdanConfig config, std::uint64_t seed);

    CdanModel(const CdanModel&) = delete;
    CdanModel& operator=(const CdanModel&) = delete;
    CdanModel(CdanModel&&) noexcept = default;
    CdanModel& operator=(CdanModel&&) noexcept = default;

    /// N x 3 x H x W in [0, 1] -> N x 3 x H x W in (0, 1). Train mode needs
    /// `dropout_rng` whenever the dropout rate is positive.
    Tensor forward(const Tensor& x, ops::Mode mode, Rng* dropout_rng = nullptr, ForwardTrace* trace = nullptr) const;

    const CdanConfig& config() const { return config_; }
    /// Parameters and buffers in registration order.
    const nn::Registry& registry() const { return registry_; }
    nn::Registry& registry() { return registry_; }
    std::size_t num_params() const { return nn::count_parameters(registry_.params); }
    void zero_grad();

private:
    struct Up {
        nn::ConvTranspose2d deconv;
        nn::BatchNorm2d bn;
        nn::Conv2d fuse;  // absent on the last, stride-1 stage
        nn::Cbam cbam;
    };
    struct Branch {
        nn::DenseBlock dense;
        nn::Conv2d gate;
    };

    // Layers live behind a pointer so buffer addresses in the registry
    // survive moves of the model.
    struct Layers {
        std::vector<nn::ConvBlock> encoder;
        nn::Cbam bottleneck;
        std::vector<Branch> branches;
        std::vector<Up> decoder;
        nn::DenseBlock head_dense;
        nn::Conv2d head_out;
    };

    void build_registry();

    CdanConfig config_;
    std::unique_ptr<Layers> layers_;
    nn::Registry registry_;
};

}  // namespace cdan
