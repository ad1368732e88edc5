/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <string>
#include <vector>

#include "cdan/ops.hpp"
#include "cdan/rng.hpp"
#include "cdan/tensor.hpp"

namespace cdan::nn {

using ops::Mode;

struct ParamRef {
    std::string name;
    Tensor tensor;  // shares storage with the owning layer
};

struct BufferRef {
    std::string name;
    std::vector<double>* values;
};

/// Flat, ordered view of every learnable tensor and persistent buffer.
struct Registry {
    std::vector<ParamRef> params;
    std::vector<BufferRef> buffers;
};

std::size_t count_parameters(const std::vector<ParamRef>& params);

class Conv2d {
public:
    Conv2d() = default;
    /// Kaiming-uniform (fan-in, ReLU gain) weights; bias uniform in +-1/sqrt(fan_in).
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, int stride, int padding, Rng& rng,
           bool with_bias = true);

    Tensor forward(const Tensor& x) const { return ops::conv2d(x, weight, bias, stride_, padding_); }
    void register_into(const std::string& prefix, Registry& reg);
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t out_channels() const { return weight.dim(0); }

    Tensor weight;
    Tensor bias;

private:
    int stride_ = 1;
    int padding_ = 0;
};

class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, int stride, int padding,
                    Rng& rng);

    Tensor forward(const Tensor& x) const { return ops::conv_transpose2d(x, weight, bias, stride_, padding_); }
    void register_into(const std::string& prefix, Registry& reg);

    Tensor weight;
    Tensor bias;

private:
    int stride_ = 1;
    int padding_ = 0;
};

class BatchNorm2d {
public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(std::size_t channels);

    /// Train mode folds batch statistics into the running stats.
    Tensor forward(const Tensor& x, Mode mode) const { return ops::batch_norm(x, gamma, beta, stats, mode); }
    void register_into(const std::string& prefix, Registry& reg);

    Tensor gamma;
    Tensor beta;
    mutable ops::BatchNormStats stats;
};

/// conv 3x3 (stride 1, pad 1) -> batch norm -> ReLU.
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(std::size_t in_channels, std::size_t out_channels, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode) const;
    void register_into(const std::string& prefix, Registry& reg);
    std::size_t in_channels() const { return conv.in_channels(); }
    std::size_t out_channels() const { return conv.out_channels(); }

    Conv2d conv;
    BatchNorm2d bn;
};

/// Densely connected stack. Layer i sees the concatenation of the block input
/// and the outputs of layers 0..i-1 and adds `growth` channels
/// (BN -> ReLU -> 3x3 conv).
class DenseBlock {
public:
    struct Layer {
        BatchNorm2d bn;
        Conv2d conv;
    };

    DenseBlock() = default;
    DenseBlock(std::size_t in_channels, std::size_t num_layers, std::size_t growth, Rng& rng);

    /// `layer_inputs`, when given, receives the input shape of each layer.
    Tensor forward(const Tensor& x, Mode mode, std::vector<Shape>* layer_inputs = nullptr) const;
    void register_into(const std::string& prefix, Registry& reg);

    std::size_t in_channels() const { return in_channels_; }
    std::size_t out_channels() const { return in_channels_ + layers.size() * growth_; }

    std::vector<Layer> layers;

private:
    std::size_t in_channels_ = 0;
    std::size_t growth_ = 0;
};

/// Shared two-layer 1x1 bottleneck over average- and max-pooled descriptors.
class ChannelAttention {
public:
    ChannelAttention() = default;
    ChannelAttention(std::size_t channels, std::size_t reduction, Rng& rng);

    /// N x C x H x W -> N x C x 1 x 1 gate in (0, 1).
    Tensor forward(const Tensor& features) const;
    void register_into(const std::string& prefix, Registry& reg);
    std::size_t hidden_width() const { return fc1.out_channels(); }

    Conv2d fc1;
    Conv2d fc2;
};

/// 7x7 conv over the channel-wise mean and max maps.
class SpatialAttention {
public:
    SpatialAttention() = default;
    explicit SpatialAttention(Rng& rng);

    /// N x C x H x W -> N x 1 x H x W gate in (0, 1).
    Tensor forward(const Tensor& features) const;
    void register_into(const std::string& prefix, Registry& reg);

    Conv2d conv;
};

class Cbam {
public:
    Cbam() = default;
    Cbam(std::size_t channels, std::size_t reduction, Rng& rng);

    /// Channel gating followed by spatial gating; output shape equals input.
    Tensor forward(const Tensor& features) const;
    void register_into(const std::string& prefix, Registry& reg);

    ChannelAttention channel;
    SpatialAttention spatial;
};

}  // namespace cdan::nn
