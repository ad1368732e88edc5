/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/model.hpp"

#include "cdan/error.hpp"

namespace cdan {
namespace {

constexpr std::size_t kStages = 4;

}  // namespace

void CdanConfig::validate() const {
    if (encoder_channels.size() != kStages + 1) {
        throw ValueError("encoder schedule needs input width plus 4 stage widths, got " +
                         std::to_string(encoder_channels.size()) + " entries");
    }
    if (decoder_channels.size() != kStages + 1) {
        throw ValueError("decoder schedule needs bottleneck width plus 4 stage widths, got " +
                         std::to_string(decoder_channels.size()) + " entries");
    }
    for (std::size_t c : encoder_channels) {
        if (c == 0) throw ValueError("encoder channel widths must be positive");
    }
    for (std::size_t c : decoder_channels) {
        if (c == 0) throw ValueError("decoder channel widths must be positive");
    }
    if (decoder_channels.front() != encoder_channels.back()) {
        throw ValueError("decoder starts at " + std::to_string(decoder_channels.front()) +
                         " channels but the bottleneck has " + std::to_string(encoder_channels.back()));
    }
    if (dense_layers == 0 || growth_rate == 0) throw ValueError("dense blocks need at least one layer and growth >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValueError("dropout must be in [0, 1)");
    if (cbam_reduction == 0) throw ValueError("CBAM reduction must be >= 1");
    if (out_channels == 0) throw ValueError("output channels must be positive");
}

std::pair<Tensor, SpatialDims> pad_to_multiple(const Tensor& x, std::size_t multiple) {
    if (multiple == 0) throw ValueError("pad_to_multiple: multiple must be >= 1");
    if (x.ndim() != 4) throw ShapeError("pad_to_multiple: expected N x C x H x W, got " + shape_str(x.shape()));
    const SpatialDims dims{x.dim(2), x.dim(3)};
    if (dims.height < multiple || dims.width < multiple) {
        throw ShapeError("pad_to_multiple: image " + shape_str(x.shape()) + " is smaller than " +
                         std::to_string(multiple) + "x" + std::to_string(multiple));
    }
    const std::size_t bottom = (multiple - dims.height % multiple) % multiple;
    const std::size_t right = (multiple - dims.width % multiple) % multiple;
    return {ops::pad_reflect(x, bottom, right), dims};
}

Tensor crop_to(const Tensor& x, SpatialDims dims) { return ops::crop(x, dims.height, dims.width); }

CdanModel::CdanModel(CdanConfig config, std::uint64_t seed) : config_(std::move(config)), layers_(std::make_unique<Layers>()) {
    config_.validate();
    Rng rng(seed);
    const auto& enc = config_.encoder_channels;
    const auto& dec = config_.decoder_channels;
    Layers& l = *layers_;

    for (std::size_t k = 0; k < kStages; ++k) l.encoder.emplace_back(enc[k], enc[k + 1], rng);
    l.bottleneck = nn::Cbam(enc[kStages], config_.cbam_reduction, rng);

    // Branch j reads skip S(j+1) and gates the decoder stage at the same resolution.
    for (std::size_t j = 0; j + 1 < kStages; ++j) {
        nn::DenseBlock dense(enc[j + 1], config_.dense_layers, config_.growth_rate, rng);
        nn::Conv2d gate(dense.out_channels(), dec[kStages - 1 - j], 1, 1, 0, rng);
        l.branches.push_back({std::move(dense), std::move(gate)});
    }

    for (std::size_t i = 0; i < kStages; ++i) {
        Up up;
        const bool last = i + 1 == kStages;
        up.deconv = last ? nn::ConvTranspose2d(dec[i], dec[i + 1], 3, 1, 1, rng)
                         : nn::ConvTranspose2d(dec[i], dec[i + 1], 4, 2, 1, rng);
        up.bn = nn::BatchNorm2d(dec[i + 1]);
        if (!last) {
            up.fuse = nn::Conv2d(dec[i + 1] + enc[kStages - 1 - i], dec[i + 1], 1, 1, 0, rng);
            up.cbam = nn::Cbam(dec[i + 1], config_.cbam_reduction, rng);
        }
        l.decoder.push_back(std::move(up));
    }

    l.head_dense = nn::DenseBlock(dec[kStages], config_.dense_layers, config_.growth_rate, rng);
    l.head_out = nn::Conv2d(l.head_dense.out_channels(), config_.out_channels, 1, 1, 0, rng);
    build_registry();
}

void CdanModel::build_registry() {
    registry_ = {};
    Layers& l = *layers_;
    for (std::size_t k = 0; k < l.encoder.size(); ++k) l.encoder[k].register_into("enc" + std::to_string(k + 1), registry_);
    l.bottleneck.register_into("bottleneck.cbam", registry_);
    for (std::size_t j = 0; j < l.branches.size(); ++j) {
        const std::string p = "branch" + std::to_string(j + 1);
        l.branches[j].dense.register_into(p + ".dense", registry_);
        l.branches[j].gate.register_into(p + ".gate", registry_);
    }
    for (std::size_t i = 0; i < l.decoder.size(); ++i) {
        const std::string p = "up" + std::to_string(i + 1);
        Up& up = l.decoder[i];
        up.deconv.register_into(p + ".deconv", registry_);
        up.bn.register_into(p + ".bn", registry_);
        if (up.fuse.weight.defined()) {
            up.fuse.register_into(p + ".fuse", registry_);
            up.cbam.register_into(p + ".cbam", registry_);
        }
    }
    l.head_dense.register_into("head.dense", registry_);
    l.head_out.register_into("head.out", registry_);
}

void CdanModel::zero_grad() {
    for (nn::ParamRef& p : registry_.params) p.tensor.zero_grad();
}

Tensor CdanModel::forward(const Tensor& x, ops::Mode mode, Rng* dropout_rng, ForwardTrace* trace) const {
    if (x.ndim() != 4 || x.dim(1) != config_.encoder_channels.front()) {
        throw ShapeError("CdanModel: expected N x " + std::to_string(config_.encoder_channels.front()) +
                         " x H x W input, got " + shape_str(x.shape()));
    }
    if (mode == ops::Mode::train && config_.dropout > 0.0 && !dropout_rng) {
        throw ValueError("CdanModel: train-mode forward needs a dropout RNG");
    }
    const Layers& l = *layers_;
    auto [h, original] = pad_to_multiple(x, 8);
    if (trace) trace->padded_input = h.shape();

    std::vector<Tensor> skips;
    for (std::size_t k = 0; k < kStages; ++k) {
        skips.push_back(l.encoder[k].forward(h, mode));
        if (k + 1 < kStages) {
            h = ops::max_pool2d(skips.back());
            if (mode == ops::Mode::train && config_.dropout > 0.0) h = ops::dropout(h, config_.dropout, mode, *dropout_rng);
        }
    }
    Tensor u = l.bottleneck.forward(skips.back());

    std::vector<Tensor> gates;
    for (std::size_t j = 0; j < l.branches.size(); ++j) {
        const Branch& br = l.branches[j];
        gates.push_back(ops::sigmoid(br.gate.forward(br.dense.forward(skips[j], mode))));
    }
    if (trace) {
        for (const Tensor& s : skips) trace->skips.push_back(s.shape());
        trace->bottleneck = skips.back().shape();
        for (const Tensor& g : gates) trace->gates.push_back(g.shape());
    }

    for (std::size_t i = 0; i < l.decoder.size(); ++i) {
        const Up& up = l.decoder[i];
        u = ops::relu(up.bn.forward(up.deconv.forward(u), mode));
        if (i + 1 < kStages) {
            const std::size_t level = kStages - 2 - i;  // S3, S2, S1
            u = up.fuse.forward(ops::concat_channels(u, skips[level]));
            u = up.cbam.forward(ops::mul(u, gates[level]));
        }
    }

    const Tensor out = ops::sigmoid(l.head_out.forward(l.head_dense.forward(u, mode)));
    return crop_to(out, original);
}

}  // namespace cdan
