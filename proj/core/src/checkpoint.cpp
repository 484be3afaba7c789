#include "v4e/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace v4e {

namespace {

constexpr char kMagic[4] = {'V', '4', 'E', 'C'};

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CheckpointError(std::string("truncated container while reading ") + what);
    return v;
}

uint32_t crc_of(const std::vector<float>& values) {
    uLong crc = crc32(0L, Z_NULL, 0);
    if (!values.empty())
        crc = crc32(crc, reinterpret_cast<const Bytef*>(values.data()),
                    static_cast<uInt>(values.size() * sizeof(float)));
    return static_cast<uint32_t>(crc);
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open for write: " + path);
    os.write(kMagic, 4);
    write_pod<uint32_t>(os, kVersion);
    write_pod<uint32_t>(os, static_cast<uint32_t>(entries_.size()));
    for (const auto& [name, e] : entries_) {
        write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint32_t>(os, static_cast<uint32_t>(e.shape.size()));
        for (int64_t d : e.shape) write_pod<int64_t>(os, d);
        os.write(reinterpret_cast<const char*>(e.values.data()),
                 static_cast<std::streamsize>(e.values.size() * sizeof(float)));
        write_pod<uint32_t>(os, crc_of(e.values));
    }
    if (!os) throw CheckpointError("write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open for read: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("bad magic bytes in " + path);
    uint32_t version = read_pod<uint32_t>(is, "version");
    if (version != kVersion)
        throw CheckpointError("unsupported container version " + std::to_string(version) + " in " + path);
    uint32_t count = read_pod<uint32_t>(is, "entry count");
    Checkpoint ckpt;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nlen = read_pod<uint32_t>(is, "name length");
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        if (!is) throw CheckpointError("truncated container while reading name in " + path);
        uint32_t ndim = read_pod<uint32_t>(is, "ndim");
        Shape shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = read_pod<int64_t>(is, "dim");
        int64_t numel = shape_numel(shape);
        if (numel < 0) throw CheckpointError("negative entry size for " + name);
        std::vector<float> values(static_cast<size_t>(numel));
        is.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(float)));
        if (!is) throw CheckpointError("truncated values for entry " + name + " in " + path);
        uint32_t crc = read_pod<uint32_t>(is, "crc");
        if (crc != crc_of(values))
            throw CheckpointError("integrity check failed for entry " + name + " in " + path);
        ckpt.put(name, std::move(shape), std::move(values));
    }
    return ckpt;
}

uint64_t checkpoint_content_hash(const Checkpoint& ckpt) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [name, e] : ckpt.entries()) {
        feed(name.data(), name.size());
        for (int64_t d : e.shape) feed(&d, sizeof(d));
        feed(e.values.data(), e.values.size() * sizeof(float));
    }
    return h;
}

}  // namespace v4e
