#pragma once

#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "octoflow/block_forest.hpp"

namespace octoflow::testing {

//! Random geometry and refinement: up to 3x3x3 roots, random periodicity, refinement marks drawn
//! from a hash of the block id so that the predicate is a pure function.
inline SetupForest random_forest(std::mt19937_64& rng, int max_level, double mark_probability = 0.3,
                                 bool allow_periodic = true) {
    std::uniform_int_distribution<int> roots(1, 3);
    std::bernoulli_distribution coin(0.5);
    ForestGeometry g;
    g.root_dims = {roots(rng), roots(rng), roots(rng)};
    for (int i = 0; i < 3; ++i) {
        g.domain.hi[i] = g.root_dims[i];
        g.periodic[i] = allow_periodic && coin(rng);
    }
    g.cells_per_block = {8, 8, 8};
    const std::uint64_t salt = rng();
    const auto threshold = std::uint64_t(mark_probability * double(UINT64_MAX));
    auto refine = [salt, threshold](const BlockInfo& b) {
        std::uint64_t h = b.id.bits * 0x9E3779B97F4A7C15ull ^ salt;
        h ^= h >> 31;
        h *= 0xBF58476D1CE4E5B9ull;
        h ^= h >> 29;
        return h < threshold;
    };
    return build_setup_forest(g, refine, nullptr, max_level);
}

//! Block box in cells of `ref` level with 1 cell per finest-level block.
inline IBox unit_box(const SetupForest&, const SetupBlock& b, int ref) {
    const auto s = std::int64_t(1) << (ref - b.level);
    return {b.coords * s, (b.coords + Int3{1, 1, 1}) * s};
}

//! Periodic images to try: -1..1 on periodic axes, 0 elsewhere.
inline std::vector<Int3> image_shifts(const ForestGeometry& g) {
    std::vector<Int3> out;
    for (int z = -1; z <= 1; ++z)
        for (int y = -1; y <= 1; ++y)
            for (int x = -1; x <= 1; ++x) {
                const Int3 s{x, y, z};
                bool ok = true;
                for (int i = 0; i < 3; ++i)
                    if (s[i] != 0 && !g.periodic[i]) ok = false;
                if (ok) out.push_back(s);
            }
    return out;
}

//! Brute-force neighbor relation: (neighbor id, image shift) -> contact dimension.
inline std::map<std::pair<std::uint64_t, Int3>, int> brute_force_neighbors(const SetupForest& f, const SetupBlock& b) {
    const int ref = std::max(f.max_level(), 0);
    const auto all = f.blocks();
    const auto ext = f.geometry.blocks_at_level(ref);
    std::map<std::pair<std::uint64_t, Int3>, int> out;
    const IBox mine = unit_box(f, b, ref);
    for (const auto& o : all)
        for (const auto& s : image_shifts(f.geometry)) {
            if (o.id == b.id && s == Int3{0, 0, 0}) continue;
            const IBox other = unit_box(f, o, ref).shifted(Int3{s[0] * ext[0], s[1] * ext[1], s[2] * ext[2]});
            // closed boxes touch when every axis overlaps or abuts; the dimension counts open overlaps
            int dim = 0;
            bool touch = true;
            for (int i = 0; i < 3; ++i) {
                if (other.lo[i] > mine.hi[i] || mine.lo[i] > other.hi[i]) touch = false;
                if (other.lo[i] < mine.hi[i] && mine.lo[i] < other.hi[i]) ++dim;
            }
            if (touch && dim <= 2) out[{o.id.bits, s}] = dim;
        }
    return out;
}

} // namespace octoflow::testing
