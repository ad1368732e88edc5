/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cdan/error.hpp"

namespace cdan {
namespace {

constexpr char kMagic[8] = {'C', 'D', 'A', 'N', 'A', 'R', 'C', 'H'};
static_assert(std::endian::native == std::endian::little, "archive codec assumes a little-endian host");

// Upper bounds that reject garbage headers before allocating.
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 8;

class Writer {
public:
    template <class T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + size);
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    template <class T>
    T get(const char* what) {
        T value;
        take(&value, sizeof(T), what);
        return value;
    }
    void take(void* dst, std::size_t size, const char* what) {
        if (size > bytes_.size() - pos_) {
            throw CorruptArchiveError(std::string("corrupt archive: truncated while reading ") + what + " at byte " +
                                      std::to_string(pos_));
        }
        std::memcpy(dst, bytes_.data() + pos_, size);
        pos_ += size;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const TensorRecord* Archive::find(const std::string& name) const {
    for (const TensorRecord& r : records) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

std::vector<std::uint8_t> serialize_archive(const Archive& archive) {
    Writer w;
    w.put_bytes(kMagic, sizeof kMagic);
    w.put(kArchiveVersion);
    w.put(std::uint64_t(archive.records.size()));
    for (const TensorRecord& r : archive.records) {
        if (shape_numel(r.shape) != r.values.size()) {
            throw ShapeError("archive record '" + r.name + "' has shape " + shape_str(r.shape) + " but " +
                             std::to_string(r.values.size()) + " values");
        }
        w.put(std::uint32_t(r.name.size()));
        w.put_bytes(r.name.data(), r.name.size());
        w.put(std::uint32_t(r.shape.size()));
        for (std::size_t d : r.shape) w.put(std::uint64_t(d));
        w.put_bytes(r.values.data(), r.values.size() * sizeof(double));
    }
    return std::move(w.bytes);
}

Archive deserialize_archive(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    char magic[sizeof kMagic];
    r.take(magic, sizeof magic, "magic");
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CorruptArchiveError("corrupt archive: bad magic");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kArchiveVersion) {
        throw CheckpointVersionError("archive version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(kArchiveVersion) + ")");
    }
    Archive archive;
    const auto count = r.get<std::uint64_t>("record count");
    for (std::uint64_t i = 0; i < count; ++i) {
        TensorRecord rec;
        const auto name_len = r.get<std::uint32_t>("name length");
        if (name_len > kMaxNameLength) throw CorruptArchiveError("corrupt archive: implausible name length");
        rec.name.resize(name_len);
        r.take(rec.name.data(), name_len, "name");
        const auto ndim = r.get<std::uint32_t>("rank");
        if (ndim == 0 || ndim > kMaxRank) {
            throw CorruptArchiveError("corrupt archive: record '" + rec.name + "' has rank " + std::to_string(ndim));
        }
        std::size_t numel = 1;
        for (std::uint32_t k = 0; k < ndim; ++k) {
            const auto d = r.get<std::uint64_t>("dims");
            if (d == 0 || d > r.remaining()) {
                throw CorruptArchiveError("corrupt archive: record '" + rec.name + "' has bad extent " +
                                          std::to_string(d));
            }
            rec.shape.push_back(std::size_t(d));
            numel *= std::size_t(d);
        }
        if (numel > r.remaining() / sizeof(double)) {
            throw CorruptArchiveError("corrupt archive: truncated payload of record '" + rec.name + "'");
        }
        rec.values.resize(numel);
        r.take(rec.values.data(), numel * sizeof(double), "payload");
        archive.records.push_back(std::move(rec));
    }
    if (r.remaining() != 0) throw CorruptArchiveError("corrupt archive: trailing bytes after last record");
    return archive;
}

void write_archive(const std::string& path, const Archive& archive) {
    const auto bytes = serialize_archive(archive);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

Archive read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_archive(bytes);
}

}  // namespace cdan
