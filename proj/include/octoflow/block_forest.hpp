#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "octoflow/block_id.hpp"
#include "octoflow/core.hpp"

namespace octoflow {

enum class ConnectionClass : std::uint8_t { face = 0, edge = 1, corner = 2 };

inline const char* to_string(ConnectionClass c) {
    switch (c) {
    case ConnectionClass::face: return "face";
    case ConnectionClass::edge: return "edge";
    case ConnectionClass::corner: return "corner";
    }
    return "?";
}

//! The 26 neighbor directions in z-y-x order.
inline const std::array<Int3, 26>& neighbor_directions() {
    static const auto dirs = [] {
        std::array<Int3, 26> d{};
        int k = 0;
        for (int z = -1; z <= 1; ++z)
            for (int y = -1; y <= 1; ++y)
                for (int x = -1; x <= 1; ++x)
                    if (x || y || z) d[k++] = Int3{x, y, z};
        return d;
    }();
    return dirs;
}

//! Root grid, block resolution and periodicity shared by every view of a forest.
struct ForestGeometry {
    AABB domain{{0, 0, 0}, {1, 1, 1}};
    std::array<int, 3> root_dims{1, 1, 1};
    std::array<int, 3> cells_per_block{10, 10, 10};
    std::array<bool, 3> periodic{false, false, false};

    std::uint64_t root_count() const {
        return std::uint64_t(root_dims[0]) * root_dims[1] * root_dims[2];
    }
    BlockIdCodec codec() const { return {root_width_for(root_count())}; }

    Int3 blocks_at_level(int level) const {
        return {std::int64_t(root_dims[0]) << level, std::int64_t(root_dims[1]) << level,
                std::int64_t(root_dims[2]) << level};
    }

    Int3 coords(BlockId id) const {
        const auto c = codec();
        const int l = c.level(id);
        const auto r = c.root_index(id);
        Int3 p{std::int64_t(r % root_dims[0]), std::int64_t((r / root_dims[0]) % root_dims[1]),
               std::int64_t(r / (std::uint64_t(root_dims[0]) * root_dims[1]))};
        for (int k = l - 1; k >= 0; --k) {
            const int o = int((id.bits >> (3 * k)) & 7);
            for (int i = 0; i < 3; ++i) p[i] = 2 * p[i] + ((o >> i) & 1);
        }
        return p;
    }

    BlockId id_at(int level, const Int3& p) const {
        const auto c = codec();
        Int3 r;
        for (int i = 0; i < 3; ++i) r[i] = p[i] >> level;
        const std::uint64_t root_index =
            std::uint64_t(r[0]) + std::uint64_t(root_dims[0]) * (std::uint64_t(r[1]) + std::uint64_t(root_dims[1]) * std::uint64_t(r[2]));
        BlockId id = c.root(root_index);
        for (int k = level - 1; k >= 0; --k) {
            int o = 0;
            for (int i = 0; i < 3; ++i) o |= int((p[i] >> k) & 1) << i;
            id = BlockId((id.bits << 3) | std::uint64_t(o));
        }
        return id;
    }

    Vec3 block_size(int level) const {
        const auto e = domain.extent();
        return {e[0] / root_dims[0] / double(1 << level), e[1] / root_dims[1] / double(1 << level),
                e[2] / root_dims[2] / double(1 << level)};
    }

    Vec3 cell_size(int level) const {
        const auto b = block_size(level);
        return {b[0] / cells_per_block[0], b[1] / cells_per_block[1], b[2] / cells_per_block[2]};
    }

    AABB aabb(BlockId id) const {
        const int l = codec().level(id);
        const auto p = coords(id);
        const auto s = block_size(l);
        AABB box;
        for (int i = 0; i < 3; ++i) {
            box.lo[i] = domain.lo[i] + double(p[i]) * s[i];
            box.hi[i] = domain.lo[i] + double(p[i] + 1) * s[i];
        }
        return box;
    }

    Int3 domain_cells(int ref_level) const {
        const auto b = blocks_at_level(ref_level);
        return {b[0] * cells_per_block[0], b[1] * cells_per_block[1], b[2] * cells_per_block[2]};
    }

    //! Block extent in cells of level ref_level (ref_level >= the block's level).
    IBox cell_box(int level, const Int3& coords, int ref_level) const {
        IBox box;
        for (int i = 0; i < 3; ++i) {
            const std::int64_t n = std::int64_t(cells_per_block[i]) << (ref_level - level);
            box.lo[i] = coords[i] * n;
            box.hi[i] = box.lo[i] + n;
        }
        return box;
    }

    //! Wraps block coordinates at `level` into the domain. Returns false for points beyond a
    //! non-periodic boundary. `shift` is set so that virtual = real + shift * extent.
    bool wrap(int level, Int3& p, Int3& shift) const {
        const auto n = blocks_at_level(level);
        for (int i = 0; i < 3; ++i) {
            shift[i] = 0;
            if (p[i] < 0 || p[i] >= n[i]) {
                if (!periodic[i]) return false;
                shift[i] = floor_div(p[i], n[i]);
                p[i] -= shift[i] * n[i];
            }
        }
        return true;
    }

    friend bool operator==(const ForestGeometry&, const ForestGeometry&) = default;
};

struct BlockInfo {
    BlockId id;
    int level;
    Int3 coords;
    AABB aabb;
};

struct SetupBlock {
    BlockId id;
    int level = 0;
    Int3 coords;
    std::uint32_t rank = 0;
    double workload = 1.0;
    double memory = 1.0;
};

struct NeighborRecord {
    BlockId id;
    std::uint32_t rank = 0;
    ConnectionClass cls = ConnectionClass::face;
    int level_diff = 0; //!< neighbor level minus own level
    Int3 shift;         //!< periodic image offset in domain extents
    friend bool operator==(const NeighborRecord&, const NeighborRecord&) = default;
};

//! Global block set used during setup (phase 1 of the two-stage initialization).
class SetupForest {
public:
    ForestGeometry geometry;
    std::uint32_t rank_count = 1;

    SetupForest() = default;
    explicit SetupForest(ForestGeometry g) : geometry(std::move(g)) {}

    std::size_t size() const { return blocks_.size(); }
    bool contains(BlockId id) const { return blocks_.count(id.bits) != 0; }
    const SetupBlock* find(BlockId id) const {
        auto it = blocks_.find(id.bits);
        return it == blocks_.end() ? nullptr : &it->second;
    }
    SetupBlock* find(BlockId id) {
        auto it = blocks_.find(id.bits);
        return it == blocks_.end() ? nullptr : &it->second;
    }

    //! Blocks sorted by id bits.
    std::vector<SetupBlock> blocks() const {
        std::vector<SetupBlock> v;
        v.reserve(blocks_.size());
        for (auto& [k, b] : blocks_) v.push_back(b);
        return v;
    }
    template <class F>
    void for_each(F&& f) const {
        for (auto& [k, b] : blocks_) f(b);
    }
    template <class F>
    void for_each_mut(F&& f) {
        for (auto& [k, b] : blocks_) f(b);
    }

    int max_level() const {
        int m = 0;
        for (auto& [k, b] : blocks_) m = std::max(m, b.level);
        return m;
    }

    BlockInfo info(const SetupBlock& b) const { return {b.id, b.level, b.coords, geometry.aabb(b.id)}; }

    void insert(BlockId id) {
        SetupBlock b;
        b.id = id;
        b.level = geometry.codec().level(id);
        b.coords = geometry.coords(id);
        blocks_[id.bits] = b;
    }
    void erase(BlockId id) { blocks_.erase(id.bits); }

    void split(BlockId id) {
        const auto codec = geometry.codec();
        if (!contains(id)) throw Error("split: unknown block");
        for (int o = 0; o < 8; ++o) insert(codec.child(id, o));
        erase(id);
    }

    //! Leaf covering the same-level block position p, searching ancestors only.
    const SetupBlock* covering_leaf(int level, const Int3& p) const {
        for (int l = level; l >= 0; --l) {
            Int3 q{p[0] >> (level - l), p[1] >> (level - l), p[2] >> (level - l)};
            if (auto* b = find(geometry.id_at(l, q))) return b;
        }
        return nullptr;
    }

private:
    std::map<std::uint64_t, SetupBlock> blocks_;
};

inline void enforce_two_one_balance(SetupForest& forest) {
    const auto& g = forest.geometry;
    bool changed = true;
    while (changed) {
        changed = false;
        auto blocks = forest.blocks();
        std::stable_sort(blocks.begin(), blocks.end(),
                         [](const SetupBlock& a, const SetupBlock& b) { return a.level > b.level; });
        for (const auto& b : blocks) {
            if (!forest.contains(b.id) || b.level < 2) continue;
            for (const auto& d : neighbor_directions()) {
                Int3 p = b.coords + d, shift;
                if (!g.wrap(b.level, p, shift)) continue;
                const auto* leaf = forest.covering_leaf(b.level, p);
                if (leaf && leaf->level < b.level - 1) {
                    forest.split(leaf->id);
                    changed = true;
                }
            }
        }
    }
}

using BlockPredicate = std::function<bool(const BlockInfo&)>;
using BlockWeight = std::function<std::pair<double, double>(const BlockInfo&)>;

inline std::pair<double, double> default_block_weight(const BlockInfo& b) {
    return {double(std::uint64_t(1) << b.level), 1.0};
}

inline SetupForest build_setup_forest(const ForestGeometry& geometry, const BlockPredicate& refine,
                                      const BlockPredicate& exclude, int max_level,
                                      const BlockWeight& weight = default_block_weight) {
    for (int i = 0; i < 3; ++i)
        if (geometry.root_dims[i] < 1) throw Error("root_dims must be positive");
    const auto codec = geometry.codec();
    if (max_level < 0 || max_level > codec.max_level())
        throw Error("max_level " + std::to_string(max_level) + " exceeds block id capacity");

    SetupForest forest(geometry);
    for (std::uint64_t r = 0; r < geometry.root_count(); ++r) forest.insert(codec.root(r));

    for (int pass = 0; pass < max_level; ++pass) {
        std::vector<BlockId> marked;
        forest.for_each([&](const SetupBlock& b) {
            if (b.level < max_level && refine && refine(forest.info(b))) marked.push_back(b.id);
        });
        if (marked.empty()) break;
        for (auto id : marked) forest.split(id);
    }

    auto remove_excluded = [&] {
        if (!exclude) return;
        std::vector<BlockId> gone;
        forest.for_each([&](const SetupBlock& b) {
            if (exclude(forest.info(b))) gone.push_back(b.id);
        });
        for (auto id : gone) forest.erase(id);
    };
    remove_excluded();
    if (forest.size() == 0) throw Error("forest is empty after exclusion");
    enforce_two_one_balance(forest);
    remove_excluded();

    forest.for_each_mut([&](SetupBlock& b) {
        auto [w, m] = weight(forest.info(b));
        b.workload = w;
        b.memory = m;
    });
    return forest;
}

//! All neighbors of a block, computed from the global block set.
inline std::vector<NeighborRecord> neighbors_of(const SetupForest& forest, const SetupBlock& b) {
    const auto& g = forest.geometry;
    std::vector<NeighborRecord> out;
    std::set<std::pair<std::uint64_t, Int3>> seen;

    auto add = [&](const SetupBlock& nb, const Int3& shift) {
        if (!seen.insert({nb.id.bits, shift}).second) return;
        const int ref = std::max(b.level, nb.level);
        const IBox mine = g.cell_box(b.level, b.coords, ref);
        IBox other = g.cell_box(nb.level, nb.coords, ref);
        const auto ext = g.domain_cells(ref);
        other = other.shifted(Int3{shift[0] * ext[0], shift[1] * ext[1], shift[2] * ext[2]});
        const int dim = contact_dimension(mine, other);
        if (dim < 0 || dim > 2) return;
        NeighborRecord r;
        r.id = nb.id;
        r.rank = nb.rank;
        r.cls = dim == 2 ? ConnectionClass::face : dim == 1 ? ConnectionClass::edge : ConnectionClass::corner;
        r.level_diff = nb.level - b.level;
        r.shift = shift;
        out.push_back(r);
    };

    for (const auto& d : neighbor_directions()) {
        Int3 p = b.coords + d, shift;
        if (!g.wrap(b.level, p, shift)) continue;
        if (auto* same = forest.find(g.id_at(b.level, p))) {
            add(*same, shift);
            continue;
        }
        if (b.level > 0) {
            Int3 q{p[0] >> 1, p[1] >> 1, p[2] >> 1};
            if (auto* coarse = forest.find(g.id_at(b.level - 1, q))) {
                add(*coarse, shift);
                continue;
            }
        }
        for (int o = 0; o < 8; ++o) {
            Int3 c;
            bool touches = true;
            for (int i = 0; i < 3; ++i) {
                const int bit = (o >> i) & 1;
                if (d[i] == 1 && bit != 0) touches = false;
                if (d[i] == -1 && bit != 1) touches = false;
                c[i] = 2 * p[i] + bit;
            }
            if (!touches) continue;
            if (auto* fine = forest.find(g.id_at(b.level + 1, c))) add(*fine, shift);
        }
    }
    std::sort(out.begin(), out.end(), [](const NeighborRecord& a, const NeighborRecord& c) {
        return std::tie(a.id, a.shift) < std::tie(c.id, c.shift);
    });
    return out;
}

inline std::map<BlockId, std::vector<NeighborRecord>> neighbor_table(const SetupForest& forest) {
    std::map<BlockId, std::vector<NeighborRecord>> t;
    forest.for_each([&](const SetupBlock& b) { t[b.id] = neighbors_of(forest, b); });
    return t;
}

struct Block {
    BlockId id;
    int level = 0;
    Int3 coords;
    AABB aabb;
    std::uint32_t rank = 0;
    double workload = 1.0;
    double memory = 1.0;
    std::vector<NeighborRecord> neighbors;
};

struct NeighborStub {
    BlockId id;
    std::uint32_t rank = 0;
};

//! Rank-local view: the rank's blocks with neighbor records, plus (id, rank) stubs of remote neighbors.
class BlockForest {
public:
    ForestGeometry geometry;
    std::uint32_t rank_count = 1;
    std::uint32_t rank = 0;
    std::vector<Block> local_blocks;
    std::vector<NeighborStub> neighbor_stubs;

    std::size_t stored_records() const { return local_blocks.size() + neighbor_stubs.size(); }

    const Block* find_local(BlockId id) const {
        for (auto& b : local_blocks)
            if (b.id == id) return &b;
        return nullptr;
    }
};

inline BlockForest make_local_forest(const SetupForest& forest, std::uint32_t rank) {
    BlockForest view;
    view.geometry = forest.geometry;
    view.rank_count = forest.rank_count;
    view.rank = rank;
    std::map<BlockId, std::uint32_t> remote;
    forest.for_each([&](const SetupBlock& sb) {
        if (sb.rank != rank) return;
        Block b;
        b.id = sb.id;
        b.level = sb.level;
        b.coords = sb.coords;
        b.aabb = forest.geometry.aabb(sb.id);
        b.rank = sb.rank;
        b.workload = sb.workload;
        b.memory = sb.memory;
        b.neighbors = neighbors_of(forest, sb);
        for (auto& n : b.neighbors)
            if (n.rank != rank) remote[n.id] = n.rank;
        view.local_blocks.push_back(std::move(b));
    });
    for (auto& [id, r] : remote) view.neighbor_stubs.push_back({id, r});
    return view;
}

} // namespace octoflow
