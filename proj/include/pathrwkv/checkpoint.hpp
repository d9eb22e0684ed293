#pragma once

// Parameter checkpoint file:
//   magic "PRWK" | u32 version | u32 entry count |
//   per entry: u32 name length | name bytes | u32 rank | u32 extents... |
//              f32 data (row-major, little-endian)
// Model configuration and task normalization statistics ride along as
// reserved "meta." entries, so one file restores a runnable model.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "pathrwkv/optim.hpp"

namespace prwk {

constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
    Shape shape;
    std::vector<float> data;
};

using CheckpointMap = std::map<std::string, NamedArray>;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& os, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

class ByteReader {
public:
    explicit ByteReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open file: " + path);
    }
    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() {
        const std::uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }
    void skip(std::size_t n) {
        in_.seekg(static_cast<std::streamoff>(n), std::ios::cur);
        if (!in_) throw DataError("seek past end of " + path_, offset_);
        offset_ += static_cast<long long>(n);
    }
    long long offset() const { return offset_; }
    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    void read(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw DataError("truncated file: " + path_, offset_);
        offset_ += static_cast<long long>(n);
    }
    std::string path_;
    std::ifstream in_;
    long long offset_ = 0;
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const CheckpointMap& entries) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint: " + path);
    os.write("PRWK", 4);
    detail::put_u32(os, kCheckpointVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, arr] : entries) {
        if (shape_numel(arr.shape) != arr.data.size())
            throw ContractError("checkpoint entry " + name + " has inconsistent shape");
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(arr.shape.size()));
        for (std::size_t e : arr.shape) detail::put_u32(os, static_cast<std::uint32_t>(e));
        for (float f : arr.data) detail::put_f32(os, f);
    }
    if (!os) throw DataError("write failed: " + path);
}

inline CheckpointMap load_checkpoint(const std::string& path) {
    detail::ByteReader r(path);
    if (r.bytes(4) != "PRWK") throw DataError("bad magic in " + path, 0);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version), 4);
    const std::uint32_t count = r.u32();
    CheckpointMap out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        if (name_len > (1u << 20)) throw DataError("implausible name length", r.offset() - 4);
        const std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw DataError("implausible tensor rank", r.offset() - 4);
        NamedArray arr;
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            arr.shape.push_back(r.u32());
            n *= arr.shape.back();
        }
        if (n > (1ull << 31)) throw DataError("implausible tensor size", r.offset());
        arr.data.resize(n);
        for (std::size_t j = 0; j < n; ++j) arr.data[j] = r.f32();
        out.emplace(name, std::move(arr));
    }
    if (!r.at_eof()) throw DataError("trailing bytes in " + path, r.offset());
    return out;
}

template <typename Real>
CheckpointMap snapshot_params(const ParamStore<Real>& store) {
    CheckpointMap out;
    for (const auto& [name, t] : store.params()) {
        NamedArray arr;
        arr.shape = t.shape();
        arr.data.reserve(t.numel());
        for (Real v : t.value()) arr.data.push_back(static_cast<float>(v));
        out.emplace(name, std::move(arr));
    }
    return out;
}

template <typename Real>
void restore_params(ParamStore<Real>& store, const CheckpointMap& ckpt,
                    const std::string& skip_prefix = "meta.") {
    for (const auto& [name, arr] : ckpt) {
        if (name.rfind(skip_prefix, 0) == 0) continue;
        auto& p = store.at(name);
        if (p.shape() != arr.shape)
            throw DataError("checkpoint entry " + name + " has shape " +
                            shape_str(arr.shape) + ", model expects " +
                            shape_str(p.shape()));
        auto dst = p.value();
        for (std::size_t i = 0; i < arr.data.size(); ++i)
            dst[i] = static_cast<Real>(arr.data[i]);
    }
}

}  // namespace prwk
