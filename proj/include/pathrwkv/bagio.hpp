#pragma once

// On-disk tile bag:
//   magic "PRWK" | u32 version | u32 N | u32 D_in |
//   N*D_in f32 row-major features | N pairs of i32 grid coords
// and the line-delimited dataset manifest (TSV):
//   slide_id <TAB> path <TAB> n_tiles <TAB> one column per task (empty = missing)

#include <filesystem>
#include <sstream>

#include "pathrwkv/checkpoint.hpp"
#include "pathrwkv/data.hpp"

namespace prwk {

constexpr std::uint32_t kBagVersion = 1;

inline void write_bag(const std::string& path, const TileBag& bag) {
    if (bag.n == 0) throw ContractError("write_bag: empty bag");
    if (bag.features.size() != bag.n * bag.d_in || bag.coords.size() != bag.n)
        throw ContractError("write_bag: inconsistent bag");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write bag: " + path);
    os.write("PRWK", 4);
    detail::put_u32(os, kBagVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(bag.n));
    detail::put_u32(os, static_cast<std::uint32_t>(bag.d_in));
    for (float f : bag.features) detail::put_f32(os, f);
    for (const auto& c : bag.coords) {
        detail::put_u32(os, static_cast<std::uint32_t>(c.x));
        detail::put_u32(os, static_cast<std::uint32_t>(c.y));
    }
    if (!os) throw DataError("write failed: " + path);
}

struct BagHeader {
    std::uint32_t n = 0;
    std::uint32_t d_in = 0;
};

namespace detail {

inline BagHeader read_bag_header(ByteReader& r, const std::string& path) {
    if (r.bytes(4) != "PRWK") throw DataError("bad magic in " + path, 0);
    const std::uint32_t version = r.u32();
    if (version != kBagVersion)
        throw DataError("unsupported bag version " + std::to_string(version), 4);
    BagHeader h;
    h.n = r.u32();
    h.d_in = r.u32();
    if (h.n == 0) throw DataError("bag has zero tiles: " + path, 8);
    if (h.d_in == 0 || h.d_in > (1u << 20))
        throw DataError("implausible feature dim in " + path, 12);
    return h;
}

}  // namespace detail

inline TileBag read_bag(const std::string& path) {
    detail::ByteReader r(path);
    const BagHeader h = detail::read_bag_header(r, path);
    TileBag bag;
    bag.slide_id = std::filesystem::path(path).stem().string();
    bag.n = h.n;
    bag.d_in = h.d_in;
    bag.features.resize(static_cast<std::size_t>(h.n) * h.d_in);
    for (auto& f : bag.features) {
        f = r.f32();
        if (!std::isfinite(f))
            throw DataError("non-finite feature in " + path, r.offset() - 4);
    }
    bag.coords.resize(h.n);
    for (auto& c : bag.coords) {
        c.x = r.i32();
        c.y = r.i32();
    }
    if (!r.at_eof()) throw DataError("trailing bytes in " + path, r.offset());
    return bag;
}

// Streams a stored bag in fixed-size row blocks so full slides never have to
// be resident; used by recurrent inference.
class BagFileStream {
public:
    BagFileStream(const std::string& path, std::size_t block_rows)
        : reader_(path), path_(path), block_(block_rows) {
        header_ = detail::read_bag_header(reader_, path);
    }

    std::size_t total_tiles() const { return header_.n; }
    std::size_t d_in() const { return header_.d_in; }

    // Fills the next block; returns number of rows (0 at end).
    std::size_t next(std::vector<float>& features, std::vector<GridCoord>& coords) {
        const std::size_t remaining = header_.n - row_;
        const std::size_t take = std::min(block_, remaining);
        features.resize(take * header_.d_in);
        coords.resize(take);
        if (take == 0) return 0;
        for (auto& f : features) {
            f = reader_.f32();
            if (!std::isfinite(f))
                throw DataError("non-finite feature in " + path_, reader_.offset() - 4);
        }
        // coords live after the full feature block; re-opening per block would
        // be simpler but this keeps one pass. Buffer them on first need.
        if (coord_cache_.empty()) load_coords();
        std::copy(coord_cache_.begin() + static_cast<long>(row_),
                  coord_cache_.begin() + static_cast<long>(row_ + take), coords.begin());
        row_ += take;
        return take;
    }

private:
    void load_coords() {
        detail::ByteReader r2(path_);
        detail::read_bag_header(r2, path_);
        const std::size_t skip = static_cast<std::size_t>(header_.n) * header_.d_in;
        r2.skip(skip * 4);
        coord_cache_.resize(header_.n);
        for (auto& c : coord_cache_) {
            c.x = r2.i32();
            c.y = r2.i32();
        }
    }

    detail::ByteReader reader_;
    std::string path_;
    std::size_t block_;
    BagHeader header_;
    std::size_t row_ = 0;
    std::vector<GridCoord> coord_cache_;
};

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct SlideRecord {
    std::string slide_id;
    std::string path;  // relative to the manifest directory
    std::size_t n_tiles = 0;
    LabelSet labels;
};

struct Manifest {
    std::vector<std::string> task_names;
    std::vector<SlideRecord> records;
};

inline std::string format_label(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_manifest(const std::string& path, const Manifest& m) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write manifest: " + path);
    os << "slide_id\tpath\tn_tiles";
    for (const auto& t : m.task_names) os << '\t' << t;
    os << '\n';
    for (const auto& r : m.records) {
        os << r.slide_id << '\t' << r.path << '\t' << r.n_tiles;
        for (const auto& t : m.task_names) {
            os << '\t';
            auto it = r.labels.find(t);
            if (it != r.labels.end()) os << format_label(it->second);
        }
        os << '\n';
    }
    if (!os) throw DataError("write failed: " + path);
}

inline Manifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open manifest: " + path);
    Manifest m;
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty manifest: " + path);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) header.push_back(field);
    }
    if (header.size() < 3 || header[0] != "slide_id" || header[1] != "path" ||
        header[2] != "n_tiles")
        throw DataError("bad manifest header in " + path);
    m.task_names.assign(header.begin() + 3, header.end());
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        fields.resize(header.size());  // trailing empties
        SlideRecord rec;
        rec.slide_id = fields[0];
        rec.path = fields[1];
        try {
            rec.n_tiles = static_cast<std::size_t>(std::stoull(fields[2]));
        } catch (const std::exception&) {
            throw DataError("bad n_tiles in " + path + " line " + std::to_string(line_no));
        }
        for (std::size_t i = 0; i < m.task_names.size(); ++i) {
            const std::string& f = fields[3 + i];
            if (f.empty()) continue;
            try {
                rec.labels[m.task_names[i]] = std::stod(f);
            } catch (const std::exception&) {
                throw DataError("bad label '" + f + "' in " + path + " line " +
                                std::to_string(line_no));
            }
        }
        m.records.push_back(std::move(rec));
    }
    return m;
}

}  // namespace prwk
