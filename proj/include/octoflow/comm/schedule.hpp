#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "octoflow/block_forest.hpp"
#include "octoflow/grid_data.hpp"

namespace octoflow::comm {

enum class Pattern : std::uint8_t { equal = 0, coarse_to_fine = 1, fine_to_coarse = 2 };

inline const char* to_string(Pattern p) {
    switch (p) {
    case Pattern::equal: return "equal";
    case Pattern::coarse_to_fine: return "coarse_to_fine";
    case Pattern::fine_to_coarse: return "fine_to_coarse";
    }
    return "?";
}

//! minimal: the reduced exchange volumes. all_connections: every ghost cell fully, and
//! fine-to-coarse on every connection class (reference for the skip rule).
enum class CommMode { minimal, all_connections };

inline constexpr std::uint32_t all_directions = (1u << Q) - 1;

//! Directions whose components match d on every axis where d is nonzero.
inline std::uint32_t directions_along(const Int3& d) {
    std::uint32_t mask = 0;
    for (int a = 0; a < Q; ++a) {
        bool ok = true;
        for (int i = 0; i < 3; ++i)
            if (d[i] != 0 && D3Q19::e[a][i] != d[i]) ok = false;
        if (ok && a != 0) mask |= 1u << a;
    }
    return mask;
}

//! Directions a receiver pulls from a ghost region in direction d.
inline std::uint32_t inbound_directions(const Int3& d) { return directions_along(Int3{-d[0], -d[1], -d[2]}); }

//! Consecutive cells along x sharing one direction mask. Coordinates are global, receiver frame;
//! equal-level runs are in the common level, cross-level runs in coarse cells.
struct Run {
    Int3 start;
    std::int64_t length = 0;
    std::uint32_t mask = 0;
    friend bool operator==(const Run&, const Run&) = default;
};

struct Job {
    Pattern pattern = Pattern::equal;
    ConnectionClass cls = ConnectionClass::face;
    BlockId sender, receiver;
    std::uint32_t sender_rank = 0, receiver_rank = 0;
    int receiver_level = 0;
    int direction = 0;   //!< index into neighbor_directions(), receiver towards sender
    Int3 recv_origin;    //!< receiver origin, global cells of its level
    Int3 send_origin;    //!< sender origin (periodic image), global cells of its level
    std::vector<Run> runs;
    std::size_t payload = 0;

    auto sort_key() const {
        return std::make_tuple(receiver.bits, int(pattern), int(cls), direction, sender.bits, send_origin);
    }
    friend bool operator==(const Job&, const Job&) = default;
};

namespace detail {

inline int direction_index(const Int3& d) {
    const auto& dirs = neighbor_directions();
    for (int k = 0; k < 26; ++k)
        if (dirs[k] == d) return k;
    throw Error("invalid neighbor direction");
}

//! Per-axis sign of the sender position relative to the receiver (both boxes on one level).
inline Int3 relative_direction(const IBox& recv, const IBox& send) {
    Int3 d;
    for (int i = 0; i < 3; ++i) d[i] = send.lo[i] >= recv.hi[i] ? 1 : send.hi[i] <= recv.lo[i] ? -1 : 0;
    return d;
}

inline ConnectionClass class_of(int contact_dim) {
    return contact_dim == 2 ? ConnectionClass::face : contact_dim == 1 ? ConnectionClass::edge : ConnectionClass::corner;
}

inline IBox coarsen(const IBox& b) {
    IBox r;
    for (int i = 0; i < 3; ++i) {
        r.lo[i] = floor_div(b.lo[i], 2);
        r.hi[i] = floor_div(b.hi[i] + 1, 2);
    }
    return r;
}

inline IBox refine(const IBox& b) { return {b.lo * 2, b.hi * 2}; }

//! Collects runs over `region` with a per-cell mask (0 = skip).
template <class MaskFn>
inline std::vector<Run> collect_runs(const IBox& region, MaskFn&& mask_of) {
    std::vector<Run> runs;
    for (auto z = region.lo[2]; z < region.hi[2]; ++z)
        for (auto y = region.lo[1]; y < region.hi[1]; ++y) {
            Run cur;
            for (auto x = region.lo[0]; x < region.hi[0]; ++x) {
                const std::uint32_t m = mask_of(Int3{x, y, z});
                if (cur.length > 0 && m == cur.mask && cur.start[0] + cur.length == x) {
                    ++cur.length;
                    continue;
                }
                if (cur.length > 0 && cur.mask != 0) runs.push_back(cur);
                cur = Run{Int3{x, y, z}, 1, m};
            }
            if (cur.length > 0 && cur.mask != 0) runs.push_back(cur);
        }
    return runs;
}

inline std::size_t payload_of(const std::vector<Run>& runs, bool all19) {
    std::size_t n = 0;
    for (auto& r : runs) n += std::size_t(r.length) * (all19 ? Q : std::popcount(r.mask));
    return n;
}

} // namespace detail

//! Equal-level job. Boxes are global cells of the common level in the receiver frame; `coarser`
//! lists coarser blocks known to the caller, scaled to that level.
inline std::optional<Job> make_equal_job(const IBox& recv, const IBox& send, const std::vector<IBox>& coarser,
                                         CommMode mode) {
    const int dim = contact_dimension(recv, send);
    if (dim < 0 || dim > 2) return std::nullopt;
    const Int3 d = detail::relative_direction(recv, send);
    Job job;
    job.pattern = Pattern::equal;
    job.cls = detail::class_of(dim);
    job.direction = detail::direction_index(d);
    job.recv_origin = recv.lo;
    job.send_origin = send.lo;

    const Int3 dims = recv.hi - recv.lo;
    if (mode == CommMode::all_connections) {
        const IBox region = intersect(recv.grown(PdfField::ghost), send);
        job.runs = detail::collect_runs(region, [](const Int3&) { return all_directions; });
    } else {
        const IBox contact = closed_intersection(recv, send);
        std::vector<IBox> triple;
        for (auto& c : coarser)
            if (contact_dimension(contact, c) >= 0) triple.push_back(closed_intersection(contact, c));
        const std::uint32_t inbound = inbound_directions(d);
        if (triple.empty()) {
            if (job.cls == ConnectionClass::corner) return std::nullopt;
            const IBox region = ghost_region(dims, d, 1).shifted(recv.lo);
            job.runs = detail::collect_runs(region, [&](const Int3&) { return inbound; });
        } else if (job.cls != ConnectionClass::face) {
            const IBox region = ghost_region(dims, d, 2).shifted(recv.lo);
            job.runs = detail::collect_runs(region, [](const Int3&) { return all_directions; });
        } else {
            int normal = 0;
            for (int i = 0; i < 3; ++i)
                if (d[i] != 0) normal = i;
            const IBox region = ghost_region(dims, d, 2).shifted(recv.lo);
            const std::int64_t first_layer = d[normal] > 0 ? recv.hi[normal] : recv.lo[normal] - 1;
            job.runs = detail::collect_runs(region, [&](const Int3& p) -> std::uint32_t {
                for (auto& t : triple) {
                    std::int64_t gap = 0;
                    for (int i = 0; i < 3; ++i) {
                        if (i == normal) continue;
                        gap = std::max({gap, t.lo[i] - (p[i] + 1), p[i] - t.hi[i]});
                    }
                    if (gap <= 1) return all_directions;
                }
                return p[normal] == first_layer ? inbound : 0u;
            });
        }
    }
    job.payload = detail::payload_of(job.runs, false);
    if (job.runs.empty()) return std::nullopt;
    return job;
}

//! Coarse-to-fine job: fine receiver box (level L) and coarse sender box (level L-1), receiver frame.
//! Covers every coarse cell of the sender overlapping the receiver's four fine ghost layers.
inline std::optional<Job> make_explosion_job(const IBox& fine_recv, const IBox& coarse_send) {
    const int dim = contact_dimension(detail::coarsen(fine_recv), coarse_send);
    if (dim < 0 || dim > 2) return std::nullopt;
    Job job;
    job.pattern = Pattern::coarse_to_fine;
    job.cls = detail::class_of(dim);
    job.direction = detail::direction_index(detail::relative_direction(detail::coarsen(fine_recv), coarse_send));
    job.recv_origin = fine_recv.lo;
    job.send_origin = coarse_send.lo;
    const IBox ring = detail::coarsen(fine_recv.grown(PdfField::ghost));
    const IBox inner = detail::coarsen(fine_recv);
    const IBox region = intersect(ring, coarse_send);
    job.runs = detail::collect_runs(region, [&](const Int3& c) { return inner.contains(c) ? 0u : all_directions; });
    job.payload = detail::payload_of(job.runs, true);
    if (job.runs.empty()) return std::nullopt;
    return job;
}

//! Fine-to-coarse job: coarse receiver box (level L) and fine sender box (level L+1), receiver frame.
//! Minimal mode keeps only the region matching the pair's connection class; all_connections adds the
//! edge/corner regions that the skip rule drops.
inline std::optional<Job> make_coalescence_job(const IBox& coarse_recv, const IBox& fine_send, CommMode mode) {
    const IBox foot = detail::coarsen(fine_send);
    const int dim = contact_dimension(coarse_recv, foot);
    if (dim < 0 || dim > 2) return std::nullopt;
    Job job;
    job.pattern = Pattern::fine_to_coarse;
    job.cls = detail::class_of(dim);
    // direction from receiver to sender
    job.direction = detail::direction_index(detail::relative_direction(coarse_recv, foot));
    job.recv_origin = coarse_recv.lo;
    job.send_origin = fine_send.lo;

    // cells are collected per direction d (fine block towards coarse block)
    std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::uint32_t> masks;
    for (const auto& d : neighbor_directions()) {
        int nonzero = 0;
        for (int i = 0; i < 3; ++i) nonzero += d[i] != 0;
        const ConnectionClass cls = nonzero == 1 ? ConnectionClass::face : nonzero == 2 ? ConnectionClass::edge : ConnectionClass::corner;
        if (mode == CommMode::minimal && cls != job.cls) continue;
        const std::uint32_t dirs = directions_along(d);
        if (dirs == 0) continue;
        const Int3 fdims = foot.hi - foot.lo;
        const IBox region = ghost_region(fdims, d, 1).shifted(foot.lo);
        if (intersect(region, coarse_recv) != region) continue;
        for_each_cell(region, [&](const Int3& c) { masks[{c[2], c[1], c[0]}] |= dirs; });
    }
    if (masks.empty()) return std::nullopt;
    IBox bounds{Int3{INT64_MAX, INT64_MAX, INT64_MAX}, Int3{INT64_MIN, INT64_MIN, INT64_MIN}};
    for (auto& [k, m] : masks) {
        const Int3 c{std::get<2>(k), std::get<1>(k), std::get<0>(k)};
        for (int i = 0; i < 3; ++i) {
            bounds.lo[i] = std::min(bounds.lo[i], c[i]);
            bounds.hi[i] = std::max(bounds.hi[i], c[i] + 1);
        }
    }
    job.runs = detail::collect_runs(bounds, [&](const Int3& c) -> std::uint32_t {
        auto it = masks.find({c[2], c[1], c[0]});
        return it == masks.end() ? 0u : it->second;
    });
    job.payload = detail::payload_of(job.runs, false);
    return job;
}

//! Jobs of one rank, grouped by the level whose time step drives them.
struct CommSchedule {
    std::uint32_t rank = 0;
    int finest_level = 0;
    CommMode mode = CommMode::minimal;
    //! [pattern][level] -> jobs sorted by sort_key
    std::array<std::map<int, std::vector<Job>>, 3> send, recv;

    const std::vector<Job>& sends(Pattern p, int level) const {
        static const std::vector<Job> none;
        auto it = send[int(p)].find(level);
        return it == send[int(p)].end() ? none : it->second;
    }
    const std::vector<Job>& recvs(Pattern p, int level) const {
        static const std::vector<Job> none;
        auto it = recv[int(p)].find(level);
        return it == recv[int(p)].end() ? none : it->second;
    }
    std::size_t job_count() const {
        std::size_t n = 0;
        for (auto& per : recv)
            for (auto& [l, v] : per) n += v.size();
        return n;
    }
};

namespace detail {

struct PlacedBlock {
    BlockId id;
    std::uint32_t rank;
    int level;
    IBox box; //!< own level, receiver frame
};

inline Int3 shift_cells(const ForestGeometry& g, const Int3& shift, int level) {
    const auto ext = g.domain_cells(level);
    return {shift[0] * ext[0], shift[1] * ext[1], shift[2] * ext[2]};
}

inline IBox scaled(const IBox& b, int from_level, int to_level) {
    IBox r = b;
    for (int l = from_level; l < to_level; ++l) r = refine(r);
    return r;
}

} // namespace detail

//! Builds the jobs in which the rank's blocks take part, from rank-local knowledge only.
inline CommSchedule build_comm_schedule(const BlockForest& forest, CommMode mode = CommMode::minimal) {
    const auto& g = forest.geometry;
    CommSchedule s;
    s.rank = forest.rank;
    s.mode = mode;

    // coarser neighbors of block b expressed in the frame where b sits at b_shift
    auto coarser_boxes = [&](const Block& b, const Int3& b_shift, int level) {
        std::vector<IBox> out;
        for (auto& n : b.neighbors) {
            if (n.level_diff != -1) continue;
            IBox box = g.cell_box(b.level - 1, g.coords(n.id), b.level - 1)
                           .shifted(detail::shift_cells(g, n.shift + b_shift, b.level - 1));
            out.push_back(detail::scaled(box, b.level - 1, level));
        }
        return out;
    };

    auto own_box = [&](int level, const Int3& coords, const Int3& shift) {
        return g.cell_box(level, coords, level).shifted(detail::shift_cells(g, shift, level));
    };

    for (const Block& b : forest.local_blocks) {
        for (const NeighborRecord& n : b.neighbors) {
            const int nl = b.level + n.level_diff;
            const Int3 ncoords = g.coords(n.id);
            const Int3 zero{0, 0, 0};
            const Int3 back{-n.shift[0], -n.shift[1], -n.shift[2]};

            // b receives from n, frame of b
            {
                const IBox rb = own_box(b.level, b.coords, zero);
                const IBox nb = own_box(nl, ncoords, n.shift);
                std::optional<Job> job;
                if (n.level_diff == 0)
                    job = make_equal_job(rb, nb, coarser_boxes(b, zero, b.level), mode);
                else if (n.level_diff == -1)
                    job = make_explosion_job(rb, nb);
                else
                    job = make_coalescence_job(rb, nb, mode);
                if (job) {
                    job->sender = n.id;
                    job->sender_rank = n.rank;
                    job->receiver = b.id;
                    job->receiver_rank = b.rank;
                    job->receiver_level = b.level;
                    s.recv[int(job->pattern)][b.level].push_back(std::move(*job));
                }
            }
            // b sends to n, frame of n (n unshifted, b at -shift)
            {
                const IBox rb = own_box(nl, ncoords, zero);
                const IBox sb = own_box(b.level, b.coords, back);
                std::optional<Job> job;
                if (n.level_diff == 0)
                    job = make_equal_job(rb, sb, coarser_boxes(b, back, b.level), mode);
                else if (n.level_diff == +1)
                    job = make_explosion_job(rb, sb);
                else
                    job = make_coalescence_job(rb, sb, mode);
                if (job) {
                    job->sender = b.id;
                    job->sender_rank = b.rank;
                    job->receiver = n.id;
                    job->receiver_rank = n.rank;
                    job->receiver_level = nl;
                    s.send[int(job->pattern)][nl].push_back(std::move(*job));
                }
            }
        }
        s.finest_level = std::max(s.finest_level, b.level);
    }
    for (auto* side : {&s.send, &s.recv})
        for (auto& per : *side)
            for (auto& [l, v] : per)
                std::sort(v.begin(), v.end(), [](const Job& a, const Job& b) { return a.sort_key() < b.sort_key(); });
    return s;
}

} // namespace octoflow::comm
