/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdan/tensor.hpp"

namespace cdan {

/// Named-tensor container used for checkpoints and extractor weights.
///
/// Byte layout, all integers little-endian:
///   magic    8 bytes  "CDANARCH"
///   version  u32      kArchiveVersion
///   count    u64      number of records
///   per record:
///     name_len u32, name bytes (UTF-8, no terminator)
///     ndim     u32, dims u64 x ndim
///     payload  float64 x prod(dims), IEEE-754 little-endian
struct TensorRecord {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct Archive {
    std::vector<TensorRecord> records;

    const TensorRecord* find(const std::string& name) const;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

std::vector<std::uint8_t> serialize_archive(const Archive& archive);
/// Throws CheckpointVersionError or CorruptArchiveError.
Archive deserialize_archive(const std::vector<std::uint8_t>& bytes);

void write_archive(const std::string& path, const Archive& archive);
Archive read_archive(const std::string& path);

}  // namespace cdan
