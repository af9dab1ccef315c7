#pragma once

#include <bit>
#include <boost/crc.hpp>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "octoflow/block_forest.hpp"

namespace octoflow {

class FormatError : public Error {
public:
    enum class Code { bad_magic, bad_version, truncated, length_mismatch, checksum, invalid_block };

    FormatError(Code c, const std::string& what) : Error("forest file: " + what), code(c) {}
    Code code;
};

namespace detail {

class ByteWriter {
public:
    std::vector<std::uint8_t> bytes;

    template <class T>
    void put(T value) {
        static_assert(std::is_integral_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bytes.push_back(std::uint8_t((std::uint64_t(value) >> (8 * i)) & 0xff));
    }
    void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    template <class T>
    T get() {
        static_assert(std::is_integral_v<T>);
        if (pos_ + sizeof(T) > size_) throw FormatError(FormatError::Code::truncated, "unexpected end of data");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return T(v);
    }
    double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::size_t position() const { return pos_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
    boost::crc_32_type crc;
    crc.process_bytes(data, n);
    return crc.checksum();
}

inline constexpr std::size_t header_bytes = 4 + 4 + 6 * 8 + 3 * 4 + 3 * 4 + 3 + 4 + 8;
inline constexpr std::size_t block_bytes = 8 + 4 + 8 + 8;

} // namespace detail

inline constexpr std::uint32_t forest_file_version = 1;

inline std::vector<std::uint8_t> serialize_forest(const SetupForest& forest) {
    detail::ByteWriter w;
    for (char c : std::string("OFBF")) w.put(std::uint8_t(c));
    w.put(forest_file_version);
    const auto& g = forest.geometry;
    for (int i = 0; i < 3; ++i) w.put_f64(g.domain.lo[i]);
    for (int i = 0; i < 3; ++i) w.put_f64(g.domain.hi[i]);
    for (int i = 0; i < 3; ++i) w.put(std::uint32_t(g.root_dims[i]));
    for (int i = 0; i < 3; ++i) w.put(std::uint32_t(g.cells_per_block[i]));
    for (int i = 0; i < 3; ++i) w.put(std::uint8_t(g.periodic[i] ? 1 : 0));
    w.put(std::uint32_t(forest.rank_count));
    w.put(std::uint64_t(forest.size()));
    forest.for_each([&](const SetupBlock& b) {
        w.put(b.id.bits);
        w.put(std::uint32_t(b.rank));
        w.put_f64(b.workload);
        w.put_f64(b.memory);
    });
    w.put(detail::crc32(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

//! Parses a forest file. Neighbor relations are recomputed on demand, never stored.
inline SetupForest deserialize_forest(const std::vector<std::uint8_t>& bytes) {
    using Code = FormatError::Code;
    if (bytes.size() < 8) throw FormatError(Code::truncated, "shorter than the header");
    if (std::memcmp(bytes.data(), "OFBF", 4) != 0) throw FormatError(Code::bad_magic, "bad magic");
    detail::ByteReader r(bytes.data(), bytes.size());
    r.get<std::uint32_t>();
    const auto version = r.get<std::uint32_t>();
    if (version != forest_file_version)
        throw FormatError(Code::bad_version, "unsupported version " + std::to_string(version));
    if (bytes.size() < detail::header_bytes + 4) throw FormatError(Code::truncated, "shorter than the header");

    ForestGeometry g;
    for (int i = 0; i < 3; ++i) g.domain.lo[i] = r.get_f64();
    for (int i = 0; i < 3; ++i) g.domain.hi[i] = r.get_f64();
    for (int i = 0; i < 3; ++i) g.root_dims[i] = int(r.get<std::uint32_t>());
    for (int i = 0; i < 3; ++i) g.cells_per_block[i] = int(r.get<std::uint32_t>());
    for (int i = 0; i < 3; ++i) g.periodic[i] = r.get<std::uint8_t>() != 0;
    const auto rank_count = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();

    const std::size_t available = bytes.size() - detail::header_bytes - 4;
    if (count > available / detail::block_bytes || count * detail::block_bytes != available)
        throw FormatError(Code::length_mismatch, "block count " + std::to_string(count) +
                                                     " does not match the data length");
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    if constexpr (std::endian::native != std::endian::little) stored = __builtin_bswap32(stored);
    if (stored != detail::crc32(bytes.data(), bytes.size() - 4))
        throw FormatError(Code::checksum, "checksum mismatch");

    for (int i = 0; i < 3; ++i)
        if (g.root_dims[i] < 1 || g.cells_per_block[i] < 1)
            throw FormatError(Code::invalid_block, "invalid grid dimensions");
    if (rank_count == 0) throw FormatError(Code::invalid_block, "rank count is zero");

    SetupForest forest(g);
    forest.rank_count = rank_count;
    const auto codec = g.codec();
    for (std::uint64_t k = 0; k < count; ++k) {
        BlockId id(r.get<std::uint64_t>());
        const auto rank = r.get<std::uint32_t>();
        const double workload = r.get_f64();
        const double memory = r.get_f64();
        if (!codec.valid(id) || codec.root_index(id) >= g.root_count())
            throw FormatError(Code::invalid_block, "invalid block id");
        if (rank >= rank_count) throw FormatError(Code::invalid_block, "block rank out of range");
        if (forest.contains(id)) throw FormatError(Code::invalid_block, "duplicate block id");
        forest.insert(id);
        auto* b = forest.find(id);
        b->rank = rank;
        b->workload = workload;
        b->memory = memory;
    }
    return forest;
}

inline void write_forest_file(const SetupForest& forest, const std::string& path) {
    const auto bytes = serialize_forest(forest);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw Error("failed writing " + path);
}

inline SetupForest read_forest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_forest(bytes);
}

} // namespace octoflow
