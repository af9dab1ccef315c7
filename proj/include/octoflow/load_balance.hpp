#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "octoflow/block_forest.hpp"

namespace octoflow {

enum class Curve { morton, hilbert };

inline std::uint64_t morton_key(const Int3& p) {
    std::uint64_t key = 0;
    for (int bit = 0; bit < 21; ++bit)
        for (int i = 0; i < 3; ++i) key |= ((std::uint64_t(p[i]) >> bit) & 1u) << (3 * bit + i);
    return key;
}

//! Hilbert index of p on a 2^bits cube (Skilling's transpose form).
inline std::uint64_t hilbert_key(const Int3& p, int bits = 21) {
    if (bits < 1 || bits > 21) throw Error("hilbert_key: bits out of range");
    std::array<std::uint32_t, 3> x{std::uint32_t(p[0]), std::uint32_t(p[1]), std::uint32_t(p[2])};
    const std::uint32_t m = 1u << (bits - 1);
    for (std::uint32_t q = m; q > 1; q >>= 1) {
        const std::uint32_t mask = q - 1;
        for (int i = 0; i < 3; ++i) {
            if (x[i] & q) {
                x[0] ^= mask;
            } else {
                const std::uint32_t t = (x[0] ^ x[i]) & mask;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
    }
    for (int i = 1; i < 3; ++i) x[i] ^= x[i - 1];
    std::uint32_t t = 0;
    for (std::uint32_t q = m; q > 1; q >>= 1)
        if (x[2] & q) t ^= q - 1;
    for (int i = 0; i < 3; ++i) x[i] ^= t;

    std::uint64_t key = 0;
    for (int bit = bits - 1; bit >= 0; --bit)
        for (int i = 0; i < 3; ++i) key = (key << 1) | ((x[i] >> bit) & 1u);
    return key;
}

//! Permutation ordering same-level block coordinates along the curve.
inline std::vector<std::size_t> sfc_order(const std::vector<Int3>& coords, Curve curve) {
    std::int64_t extent = 1;
    for (auto& c : coords)
        for (int i = 0; i < 3; ++i) {
            if (c[i] < 0) throw Error("sfc_order: negative coordinate");
            extent = std::max(extent, c[i] + 1);
        }
    int bits = 1;
    while ((std::int64_t(1) << bits) < extent) ++bits;
    if (bits > 21) throw Error("sfc_order: coordinates exceed 21 bits");

    std::vector<std::uint64_t> keys(coords.size());
    for (std::size_t k = 0; k < coords.size(); ++k)
        keys[k] = curve == Curve::morton ? morton_key(coords[k]) : hilbert_key(coords[k], bits);
    std::vector<std::size_t> perm(coords.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    return perm;
}

//! Splits an ordered weight sequence into `parts` contiguous chunks. Each cut is placed after the
//! first block at which the running weight reaches i * total / parts. Returns the chunk of every entry.
inline std::vector<std::uint32_t> greedy_prefix_cut(const std::vector<double>& weights, std::uint32_t parts) {
    if (parts == 0) throw Error("rank count must be positive");
    std::vector<std::uint32_t> chunk(weights.size(), 0);
    if (weights.empty()) return chunk;
    double wmax = 0;
    for (double w : weights) {
        if (!(w >= 0) || !std::isfinite(w)) throw Error("block weights must be finite and non-negative");
        wmax = std::max(wmax, w);
    }
    // quantize relative to the heaviest block so that cuts do not depend on the weight scale
    std::vector<std::int64_t> q(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k)
        q[k] = wmax > 0 ? std::llround(weights[k] / wmax * 4294967296.0) : 1;
    __int128 total = 0;
    for (auto v : q) total += v;
    __int128 cum = 0;
    std::uint32_t current = 0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        chunk[k] = current;
        cum += q[k];
        while (current + 1 < parts && cum * parts >= __int128(current + 1) * total) ++current;
    }
    return chunk;
}

struct Assignment {
    std::map<BlockId, std::uint32_t> rank_of;
    std::uint32_t rank_count = 1;

    void apply(SetupForest& forest) const {
        forest.rank_count = rank_count;
        forest.for_each_mut([&](SetupBlock& b) {
            auto it = rank_of.find(b.id);
            if (it == rank_of.end()) throw Error("assignment misses a block");
            b.rank = it->second;
        });
    }
};

//! Extension point for alternative partitioners (graph-based ones, for instance).
using Partitioner = std::function<Assignment(const SetupForest&, std::uint32_t)>;

inline Assignment level_wise_balance(const SetupForest& forest, std::uint32_t rank_count,
                                     Curve curve = Curve::morton) {
    if (rank_count == 0) throw Error("rank count must be positive");
    Assignment a;
    a.rank_count = rank_count;
    std::map<int, std::vector<SetupBlock>> by_level;
    forest.for_each([&](const SetupBlock& b) { by_level[b.level].push_back(b); });
    for (auto& [level, blocks] : by_level) {
        std::vector<Int3> coords;
        for (auto& b : blocks) coords.push_back(b.coords);
        const auto perm = sfc_order(coords, curve);
        std::vector<double> w;
        for (auto k : perm) w.push_back(blocks[k].workload);
        const auto chunk = greedy_prefix_cut(w, rank_count);
        for (std::size_t k = 0; k < perm.size(); ++k) a.rank_of[blocks[perm[k]].id] = chunk[k];
    }
    return a;
}

} // namespace octoflow
