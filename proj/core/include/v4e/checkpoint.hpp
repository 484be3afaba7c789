#ifndef V4E_CHECKPOINT_HPP
#define V4E_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "v4e/tensor.hpp"

namespace v4e {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat binary container of named float32 tensors, shared by model
// checkpoints and the tail-feature cache.
//
// Layout (all little-endian):
//   magic "V4EC" | u32 version=1 | u32 entry_count
//   per entry: u32 name_len | name bytes | u32 ndim | i64 dims[ndim]
//              | f32 values[numel] | u32 crc32(values)
//
// Entries are written in name order, so identical contents produce
// byte-identical files.
class Checkpoint {
public:
    struct Entry {
        Shape shape;
        std::vector<float> values;
    };

    static constexpr uint32_t kVersion = 1;

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    size_t size() const { return entries_.size(); }

    const Entry& entry(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw CheckpointError("missing checkpoint entry: " + name);
        return it->second;
    }

    void put(const std::string& name, Shape shape, std::vector<float> values) {
        if (shape_numel(shape) != static_cast<int64_t>(values.size()))
            throw CheckpointError("entry shape/value mismatch for " + name);
        entries_[name] = Entry{std::move(shape), std::move(values)};
    }

    template <typename T>
    void put_tensor(const std::string& name, const Tensor<T>& t) {
        std::vector<float> v(t.data.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(t.data[i]);
        put(name, t.shape, std::move(v));
    }

    template <typename T>
    Tensor<T> get_tensor(const std::string& name) const {
        const Entry& e = entry(name);
        Tensor<T> t(e.shape);
        for (size_t i = 0; i < e.values.size(); ++i) t.data[i] = static_cast<T>(e.values[i]);
        return t;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [k, v] : entries_) out.push_back(k);
        return out;
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

private:
    std::map<std::string, Entry> entries_;
};

// 64-bit FNV-1a over the raw bytes of every entry, in name order. Used for
// the frozen-teacher invariant.
uint64_t checkpoint_content_hash(const Checkpoint& ckpt);

}  // namespace v4e

#endif
