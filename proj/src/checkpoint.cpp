/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/checkpoint.hpp"

#include <cmath>
#include <set>

#include "cdan/error.hpp"

namespace cdan {
namespace {

TensorRecord vector_record(const std::string& name, const std::vector<std::size_t>& values) {
    return {name, {values.size()}, std::vector<double>(values.begin(), values.end())};
}

const TensorRecord& require(const Archive& archive, const std::string& name) {
    const TensorRecord* rec = archive.find(name);
    if (!rec) throw CorruptArchiveError("checkpoint lacks record '" + name + "'");
    return *rec;
}

std::size_t as_count(double v, const std::string& what) {
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e12) throw CorruptArchiveError("checkpoint field " + what + " is not a count");
    return std::size_t(v);
}

}  // namespace

Archive checkpoint_archive(const CdanModel& model, const CheckpointMeta& meta) {
    Archive archive;
    const CdanConfig& cfg = model.config();
    archive.records.push_back({"meta.seed", {2}, {double(meta.seed >> 32), double(meta.seed & 0xffffffffu)}});
    archive.records.push_back({"meta.epoch", {1}, {double(meta.epoch)}});
    archive.records.push_back(vector_record("config.encoder_channels", cfg.encoder_channels));
    archive.records.push_back(vector_record("config.decoder_channels", cfg.decoder_channels));
    archive.records.push_back({"config.scalars",
                               {5},
                               {double(cfg.dense_layers), double(cfg.growth_rate), cfg.dropout,
                                double(cfg.cbam_reduction), double(cfg.out_channels)}});
    for (const nn::ParamRef& p : model.registry().params) {
        archive.records.push_back({p.name, p.tensor.shape(), std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())});
    }
    for (const nn::BufferRef& b : model.registry().buffers) {
        archive.records.push_back({b.name, {b.values->size()}, *b.values});
    }
    return archive;
}

void save_checkpoint(const CdanModel& model, const CheckpointMeta& meta, const std::string& path) {
    write_archive(path, checkpoint_archive(model, meta));
}

CdanConfig config_from_archive(const Archive& archive) {
    CdanConfig cfg;
    auto counts = [&](const std::string& name) {
        const TensorRecord& rec = require(archive, name);
        std::vector<std::size_t> out;
        for (double v : rec.values) out.push_back(as_count(v, name));
        return out;
    };
    cfg.encoder_channels = counts("config.encoder_channels");
    cfg.decoder_channels = counts("config.decoder_channels");
    const TensorRecord& scalars = require(archive, "config.scalars");
    if (scalars.values.size() != 5) throw CorruptArchiveError("checkpoint config.scalars must hold 5 values");
    cfg.dense_layers = as_count(scalars.values[0], "dense_layers");
    cfg.growth_rate = as_count(scalars.values[1], "growth_rate");
    cfg.dropout = scalars.values[2];
    cfg.cbam_reduction = as_count(scalars.values[3], "cbam_reduction");
    cfg.out_channels = as_count(scalars.values[4], "out_channels");
    try {
        cfg.validate();
    } catch (const ValueError& e) {
        throw CorruptArchiveError(std::string("checkpoint config is invalid: ") + e.what());
    }
    return cfg;
}

void restore_tensors(CdanModel& model, const Archive& archive) {
    std::set<std::string> expected;
    nn::Registry& reg = model.registry();
    for (nn::ParamRef& p : reg.params) {
        expected.insert(p.name);
        const TensorRecord* rec = archive.find(p.name);
        if (!rec) throw UnknownTensorError("checkpoint lacks tensor '" + p.name + "'");
        if (rec->shape != p.tensor.shape()) {
            throw UnknownTensorError("tensor '" + p.name + "' has shape " + shape_str(rec->shape) +
                                     " in the checkpoint but " + shape_str(p.tensor.shape()) + " in the model");
        }
        std::copy(rec->values.begin(), rec->values.end(), p.tensor.mutable_data().begin());
    }
    for (nn::BufferRef& b : reg.buffers) {
        expected.insert(b.name);
        const TensorRecord* rec = archive.find(b.name);
        if (!rec) throw UnknownTensorError("checkpoint lacks buffer '" + b.name + "'");
        if (rec->values.size() != b.values->size()) {
            throw UnknownTensorError("buffer '" + b.name + "' has " + std::to_string(rec->values.size()) +
                                     " values in the checkpoint but " + std::to_string(b.values->size()) +
                                     " in the model");
        }
        *b.values = rec->values;
    }
    for (const TensorRecord& rec : archive.records) {
        const bool metadata = rec.name.starts_with("meta.") || rec.name.starts_with("config.");
        if (!metadata && !expected.count(rec.name)) {
            throw UnknownTensorError("checkpoint tensor '" + rec.name + "' does not exist in the model");
        }
    }
}

std::pair<CdanModel, CheckpointMeta> load_checkpoint(const std::string& path) {
    const Archive archive = read_archive(path);
    CdanModel model(config_from_archive(archive), 0);
    restore_tensors(model, archive);
    const TensorRecord& seed = require(archive, "meta.seed");
    const TensorRecord& epoch = require(archive, "meta.epoch");
    if (seed.values.size() != 2 || epoch.values.size() != 1) throw CorruptArchiveError("checkpoint metadata is malformed");
    CheckpointMeta meta;
    meta.seed = (std::uint64_t(as_count(seed.values[0], "seed")) << 32) | std::uint64_t(as_count(seed.values[1], "seed"));
    meta.epoch = as_count(epoch.values[0], "epoch");
    return {std::move(model), meta};
}

}  // namespace cdan
