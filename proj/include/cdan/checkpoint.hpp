/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "cdan/archive.hpp"
#include "cdan/model.hpp"

namespace cdan {

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    bool operator==(const CheckpointMeta&) const = default;
};

/// Checkpoints are archives holding every parameter and buffer under its
/// registry name. "meta.*" records carry the seed (as 32-bit halves) and
/// epoch; "config.*" records echo the model configuration.
Archive checkpoint_archive(const CdanModel& model, const CheckpointMeta& meta);

void save_checkpoint(const CdanModel& model, const CheckpointMeta& meta, const std::string& path);

/// Rebuilds the model from the echoed config, then restores its tensors.
std::pair<CdanModel, CheckpointMeta> load_checkpoint(const std::string& path);

/// Copies archive tensors into `model`. Throws UnknownTensorError naming the
/// first tensor that is missing or does not match.
void restore_tensors(CdanModel& model, const Archive& archive);

CdanConfig config_from_archive(const Archive& archive);

}  // namespace cdan
