#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <vector>

#include "octoflow/core.hpp"

namespace octoflow {

inline constexpr int max_forest_level = 19;

//! Octree path identifier: marker bit, root index, then 3 bits per level (octant = z*4 + y*2 + x).
struct BlockId {
    std::uint64_t bits = 0;

    constexpr BlockId() = default;
    constexpr explicit BlockId(std::uint64_t b) : bits(b) {}
    friend constexpr bool operator==(BlockId, BlockId) = default;
    friend constexpr auto operator<=>(BlockId, BlockId) = default;
};

inline int root_width_for(std::uint64_t root_count) {
    if (root_count == 0) throw Error("root grid must contain at least one block");
    return root_count == 1 ? 0 : int(std::bit_width(root_count - 1));
}

//! Encodes and decodes ids for a fixed root grid.
struct BlockIdCodec {
    int root_width = 0;

    int bit_length(BlockId id) const { return int(std::bit_width(id.bits)); }

    int max_level() const { return std::min(max_forest_level, (64 - 1 - root_width) / 3); }

    bool valid(BlockId id) const {
        if (id.bits == 0) return false;
        const int extra = bit_length(id) - 1 - root_width;
        return extra >= 0 && extra % 3 == 0 && extra / 3 <= max_level();
    }

    int level(BlockId id) const {
        if (!valid(id)) throw Error("malformed block id");
        return (bit_length(id) - 1 - root_width) / 3;
    }

    BlockId root(std::uint64_t index) const {
        if (root_width < 64 && (index >> root_width) != 0) throw Error("root index out of range");
        return BlockId((std::uint64_t(1) << root_width) | index);
    }

    std::uint64_t root_index(BlockId id) const {
        const int l = level(id);
        return (id.bits >> (3 * l)) & ((std::uint64_t(1) << root_width) - 1);
    }

    BlockId child(BlockId id, int octant) const {
        if (octant < 0 || octant > 7) throw Error("octant out of range");
        if (level(id) >= max_level()) throw Error("block id capacity exceeded");
        return BlockId((id.bits << 3) | std::uint64_t(octant));
    }

    BlockId parent(BlockId id) const {
        if (level(id) == 0) throw Error("root block has no parent");
        return BlockId(id.bits >> 3);
    }

    int octant(BlockId id) const {
        if (level(id) == 0) throw Error("root block has no octant");
        return int(id.bits & 7);
    }

    //! Octants from the root downwards.
    std::vector<int> path(BlockId id) const {
        const int l = level(id);
        std::vector<int> p(l);
        for (int k = 0; k < l; ++k) p[k] = int((id.bits >> (3 * (l - 1 - k))) & 7);
        return p;
    }

    BlockId encode(std::uint64_t root_index, const std::vector<int>& path) const {
        BlockId id = root(root_index);
        for (int o : path) id = child(id, o);
        return id;
    }
};

} // namespace octoflow

template <>
struct std::hash<octoflow::BlockId> {
    std::size_t operator()(octoflow::BlockId id) const noexcept {
        return std::hash<std::uint64_t>{}(id.bits);
    }
};
