/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/nn.hpp"

#include <cmath>

#include "cdan/error.hpp"

namespace cdan::nn {
namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(values), true);
}

void require_channels(const char* block, const Tensor& x, std::size_t expected) {
    if (x.ndim() != 4 || x.dim(1) != expected) {
        throw ShapeError(std::string(block) + ": expected " + std::to_string(expected) +
                         " input channels, got tensor " + shape_str(x.shape()));
    }
}

}  // namespace

std::size_t count_parameters(const std::vector<ParamRef>& params) {
    std::size_t total = 0;
    for (const ParamRef& p : params) total += p.tensor.numel();
    return total;
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, int stride, int padding,
               Rng& rng, bool with_bias)
    : stride_(stride), padding_(padding) {
    const double fan_in = double(in_channels * kernel * kernel);
    weight = uniform_tensor({out_channels, in_channels, kernel, kernel}, std::sqrt(6.0 / fan_in), rng);
    if (with_bias) bias = uniform_tensor({out_channels}, 1.0 / std::sqrt(fan_in), rng);
}

void Conv2d::register_into(const std::string& prefix, Registry& reg) {
    reg.params.push_back({prefix + ".weight", weight});
    if (bias.defined()) reg.params.push_back({prefix + ".bias", bias});
}

ConvTranspose2d::ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, int stride,
                                 int padding, Rng& rng)
    : stride_(stride), padding_(padding) {
    // Fan-in of the transposed layer is taken from the weight's second axis.
    const double fan_in = double(out_channels * kernel * kernel);
    weight = uniform_tensor({in_channels, out_channels, kernel, kernel}, std::sqrt(6.0 / fan_in), rng);
    bias = uniform_tensor({out_channels}, 1.0 / std::sqrt(fan_in), rng);
}

void ConvTranspose2d::register_into(const std::string& prefix, Registry& reg) {
    reg.params.push_back({prefix + ".weight", weight});
    reg.params.push_back({prefix + ".bias", bias});
}

BatchNorm2d::BatchNorm2d(std::size_t channels)
    : gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)),
      stats(ops::BatchNormStats::identity(channels)) {}

void BatchNorm2d::register_into(const std::string& prefix, Registry& reg) {
    reg.params.push_back({prefix + ".weight", gamma});
    reg.params.push_back({prefix + ".bias", beta});
    reg.buffers.push_back({prefix + ".running_mean", &stats.mean});
    reg.buffers.push_back({prefix + ".running_var", &stats.var});
}

ConvBlock::ConvBlock(std::size_t in_channels, std::size_t out_channels, Rng& rng)
    : conv(in_channels, out_channels, 3, 1, 1, rng), bn(out_channels) {}

Tensor ConvBlock::forward(const Tensor& x, Mode mode) const {
    require_channels("ConvBlock", x, in_channels());
    return ops::relu(bn.forward(conv.forward(x), mode));
}

void ConvBlock::register_into(const std::string& prefix, Registry& reg) {
    conv.register_into(prefix + ".conv", reg);
    bn.register_into(prefix + ".bn", reg);
}

DenseBlock::DenseBlock(std::size_t in_channels, std::size_t num_layers, std::size_t growth, Rng& rng)
    : in_channels_(in_channels), growth_(growth) {
    for (std::size_t i = 0; i < num_layers; ++i) {
        const std::size_t width = in_channels + i * growth;
        layers.push_back({BatchNorm2d(width), Conv2d(width, growth, 3, 1, 1, rng)});
    }
}

Tensor DenseBlock::forward(const Tensor& x, Mode mode, std::vector<Shape>* layer_inputs) const {
    require_channels("DenseBlock", x, in_channels_);
    std::vector<Tensor> features{x};
    Tensor joined = x;
    for (const Layer& layer : layers) {
        if (layer_inputs) layer_inputs->push_back(joined.shape());
        features.push_back(layer.conv.forward(ops::relu(layer.bn.forward(joined, mode))));
        joined = ops::concat_channels(features);
    }
    return joined;
}

void DenseBlock::register_into(const std::string& prefix, Registry& reg) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = prefix + ".layers." + std::to_string(i);
        layers[i].bn.register_into(p + ".bn", reg);
        layers[i].conv.register_into(p + ".conv", reg);
    }
}

ChannelAttention::ChannelAttention(std::size_t channels, std::size_t reduction, Rng& rng) {
    if (reduction == 0) throw ValueError("ChannelAttention: reduction must be >= 1");
    const std::size_t hidden = (channels + reduction - 1) / reduction;
    fc1 = Conv2d(channels, hidden, 1, 1, 0, rng);
    fc2 = Conv2d(hidden, channels, 1, 1, 0, rng);
}

Tensor ChannelAttention::forward(const Tensor& features) const {
    require_channels("ChannelAttention", features, fc1.in_channels());
    auto mlp = [this](const Tensor& descriptor) { return fc2.forward(ops::relu(fc1.forward(descriptor))); };
    return ops::sigmoid(ops::add(mlp(ops::global_avg_pool(features)), mlp(ops::global_max_pool(features))));
}

void ChannelAttention::register_into(const std::string& prefix, Registry& reg) {
    fc1.register_into(prefix + ".fc1", reg);
    fc2.register_into(prefix + ".fc2", reg);
}

SpatialAttention::SpatialAttention(Rng& rng) : conv(2, 1, 7, 1, 3, rng) {}

Tensor SpatialAttention::forward(const Tensor& features) const {
    if (features.ndim() != 4) throw ShapeError("SpatialAttention: expected 4-D input, got " + shape_str(features.shape()));
    return ops::sigmoid(conv.forward(ops::concat_channels(ops::channel_mean(features), ops::channel_max(features))));
}

void SpatialAttention::register_into(const std::string& prefix, Registry& reg) { conv.register_into(prefix + ".conv", reg); }

Cbam::Cbam(std::size_t channels, std::size_t reduction, Rng& rng) : channel(channels, reduction, rng), spatial(rng) {}

Tensor Cbam::forward(const Tensor& features) const {
    const Tensor refined = ops::broadcast_mul(features, channel.forward(features));
    return ops::broadcast_mul(refined, spatial.forward(refined));
}

void Cbam::register_into(const std::string& prefix, Registry& reg) {
    channel.register_into(prefix + ".channel", reg);
    spatial.register_into(prefix + ".spatial", reg);
}

}  // namespace cdan::nn
