#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "octoflow/comm/schedule.hpp"
#include "octoflow/comm/transport.hpp"
#include "octoflow/grid_data.hpp"

namespace octoflow::comm {

// ---------------------------------------------------------------------------------------------
// pack / unpack. Payload order: runs in job order, cells along the run, directions ascending.

//! Mean of an octet, summed pairwise so that eight equal values give that value exactly.
inline double octet_mean(const double* v) {
    return (((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]))) * 0.125;
}

inline void pack(const Job& job, const BlockGrid& sender, std::vector<double>& out) {
    const auto& pdf = sender.pdf;
    const double* f = pdf.src();
    const std::size_t cells = pdf.cells();
    for (const Run& r : job.runs) {
        for (std::int64_t k = 0; k < r.length; ++k) {
            const Int3 c{r.start[0] + k, r.start[1], r.start[2]};
            if (job.pattern == Pattern::fine_to_coarse) {
                const Int3 base = c * 2 - job.send_origin;
                for (int a = 0; a < Q; ++a) {
                    if (!(r.mask >> a & 1u)) continue;
                    double v[8];
                    for (int m = 0; m < 8; ++m)
                        v[m] = f[a * cells + pdf.index(base[0] + (m & 1), base[1] + (m >> 1 & 1), base[2] + (m >> 2))];
                    out.push_back(octet_mean(v));
                }
            } else {
                const std::size_t idx = pdf.index(c - job.send_origin);
                for (int a = 0; a < Q; ++a)
                    if (r.mask >> a & 1u) out.push_back(f[a * cells + idx]);
            }
        }
    }
}

//! Writes a job's payload into the receiver; returns the number of values consumed.
inline std::size_t unpack(const Job& job, BlockGrid& receiver, const double* in, std::size_t available) {
    if (available < job.payload)
        throw Error("payload length mismatch: job needs " + std::to_string(job.payload) + " values, " +
                    std::to_string(available) + " left");
    auto& pdf = receiver.pdf;
    double* f = pdf.src();
    const std::size_t cells = pdf.cells();
    std::size_t n = 0;
    for (const Run& r : job.runs) {
        for (std::int64_t k = 0; k < r.length; ++k) {
            const Int3 c{r.start[0] + k, r.start[1], r.start[2]};
            if (job.pattern == Pattern::coarse_to_fine) {
                const Int3 base = c * 2 - job.recv_origin;
                for (int oz = 0; oz < 2; ++oz)
                    for (int oy = 0; oy < 2; ++oy)
                        for (int ox = 0; ox < 2; ++ox) {
                            const std::size_t idx = pdf.index(base[0] + ox, base[1] + oy, base[2] + oz);
                            for (int a = 0; a < Q; ++a) f[a * cells + idx] = in[n + a];
                        }
                n += Q;
            } else {
                const std::size_t idx = pdf.index(c - job.recv_origin);
                for (int a = 0; a < Q; ++a)
                    if (r.mask >> a & 1u) f[a * cells + idx] = in[n++];
            }
        }
    }
    return n;
}

//! pack/unpack with the PDF offsets of every payload value resolved once. fan is 8 where one
//! value covers an octet of fine cells (averaged when sending, replicated when receiving).
struct IndexPlan {
    int fan = 1;
    std::vector<std::uint32_t> offsets; //!< payload size * fan entries
};

inline IndexPlan pack_plan(const Job& job, const PdfField& pdf) {
    IndexPlan plan;
    plan.fan = job.pattern == Pattern::fine_to_coarse ? 8 : 1;
    plan.offsets.reserve(job.payload * plan.fan);
    const std::size_t cells = pdf.cells();
    for (const Run& r : job.runs)
        for (std::int64_t k = 0; k < r.length; ++k) {
            const Int3 c{r.start[0] + k, r.start[1], r.start[2]};
            if (plan.fan == 8) {
                const Int3 base = c * 2 - job.send_origin;
                for (int a = 0; a < Q; ++a) {
                    if (!(r.mask >> a & 1u)) continue;
                    for (int oz = 0; oz < 2; ++oz)
                        for (int oy = 0; oy < 2; ++oy)
                            for (int ox = 0; ox < 2; ++ox)
                                plan.offsets.push_back(
                                    std::uint32_t(a * cells + pdf.index(base[0] + ox, base[1] + oy, base[2] + oz)));
                }
            } else {
                const std::size_t idx = pdf.index(c - job.send_origin);
                for (int a = 0; a < Q; ++a)
                    if (r.mask >> a & 1u) plan.offsets.push_back(std::uint32_t(a * cells + idx));
            }
        }
    return plan;
}

inline IndexPlan unpack_plan(const Job& job, const PdfField& pdf) {
    IndexPlan plan;
    plan.fan = job.pattern == Pattern::coarse_to_fine ? 8 : 1;
    plan.offsets.reserve(job.payload * plan.fan);
    const std::size_t cells = pdf.cells();
    for (const Run& r : job.runs)
        for (std::int64_t k = 0; k < r.length; ++k) {
            const Int3 c{r.start[0] + k, r.start[1], r.start[2]};
            if (plan.fan == 8) {
                const Int3 base = c * 2 - job.recv_origin;
                for (int a = 0; a < Q; ++a)
                    for (int oz = 0; oz < 2; ++oz)
                        for (int oy = 0; oy < 2; ++oy)
                            for (int ox = 0; ox < 2; ++ox)
                                plan.offsets.push_back(
                                    std::uint32_t(a * cells + pdf.index(base[0] + ox, base[1] + oy, base[2] + oz)));
            } else {
                const std::size_t idx = pdf.index(c - job.recv_origin);
                for (int a = 0; a < Q; ++a)
                    if (r.mask >> a & 1u) plan.offsets.push_back(std::uint32_t(a * cells + idx));
            }
        }
    return plan;
}

inline void pack(const IndexPlan& plan, const double* f, std::vector<double>& out) {
    const std::uint32_t* o = plan.offsets.data();
    const std::size_t n = plan.offsets.size();
    const std::size_t start = out.size();
    out.resize(start + n / std::size_t(plan.fan));
    double* dst = out.data() + start;
    if (plan.fan == 1) {
        for (std::size_t k = 0; k < n; ++k) dst[k] = f[o[k]];
        return;
    }
    for (std::size_t k = 0; k < n; k += 8) {
        const double v[8] = {f[o[k]],     f[o[k + 1]], f[o[k + 2]], f[o[k + 3]],
                             f[o[k + 4]], f[o[k + 5]], f[o[k + 6]], f[o[k + 7]]};
        dst[k / 8] = octet_mean(v);
    }
}

inline std::size_t unpack(const IndexPlan& plan, double* f, const double* in, std::size_t available) {
    const std::size_t values = plan.offsets.size() / std::size_t(plan.fan);
    if (available < values)
        throw Error("payload length mismatch: job needs " + std::to_string(values) + " values, " +
                    std::to_string(available) + " left");
    const std::uint32_t* o = plan.offsets.data();
    if (plan.fan == 1) {
        for (std::size_t k = 0; k < values; ++k) f[o[k]] = in[k];
    } else {
        for (std::size_t k = 0; k < values; ++k)
            for (int m = 0; m < 8; ++m) f[o[8 * k + m]] = in[k];
    }
    return values;
}

// ---------------------------------------------------------------------------------------------
// explosion interpolation

//! Coarse cells exploded into one fine block, with neighbor lookup for slope estimation.
struct ExplodedCells {
    IBox bounds;                 //!< global coarse cells around the fine block (ring included)
    std::vector<char> present;   //!< per cell of bounds
    std::vector<Int3> cells;     //!< global coarse coordinates, sorted
    std::vector<std::uint8_t> tangential; //!< per cell: bit i set if the cell lies within the block's extent along axis i

    std::size_t slot(const Int3& c) const {
        return std::size_t((c[0] - bounds.lo[0]) +
                           bounds.size(0) * ((c[1] - bounds.lo[1]) + bounds.size(1) * (c[2] - bounds.lo[2])));
    }
    bool has(const Int3& c) const { return bounds.contains(c) && present[slot(c)]; }
};

inline ExplodedCells collect_exploded(const BlockGrid& fine, const std::vector<const Job*>& jobs) {
    ExplodedCells e;
    const IBox box{fine.origin, fine.origin + fine.pdf.dims()};
    e.bounds = detail::coarsen(box.grown(PdfField::ghost));
    e.present.assign(std::size_t(e.bounds.count()), 0);
    for (const Job* j : jobs)
        for (const Run& r : j->runs)
            for (std::int64_t k = 0; k < r.length; ++k) {
                const Int3 c{r.start[0] + k, r.start[1], r.start[2]};
                e.present[e.slot(c)] = 1;
            }
    const IBox foot = detail::coarsen(box);
    for_each_cell(e.bounds, [&](const Int3& c) {
        if (!e.present[e.slot(c)]) return;
        e.cells.push_back(c);
        std::uint8_t t = 0;
        for (int i = 0; i < 3; ++i)
            if (c[i] >= foot.lo[i] && c[i] < foot.hi[i]) t |= std::uint8_t(1u << i);
        e.tangential.push_back(t);
    });
    return e;
}

//! Linear correction inside every exploded octet. The slope of each PDF is a central difference
//! of the neighboring exploded coarse values (one-sided at the ring boundary, zero without
//! neighbors). Offsets are +-1/4 coarse cells and cancel within an octet, so the octet sums of
//! every PDF, and with them mass and momentum, are unchanged; constant data stays constant.
//! Slopes are only applied along the interface, never across it: across it the two fine layers
//! of an octet feed the two fine sub-steps, and a slope there would make a steady coarse state
//! look unsteady to the fine block.
inline void interpolate_exploded(BlockGrid& fine, const ExplodedCells& e) {
    auto& pdf = fine.pdf;
    double* f = pdf.src();
    const std::size_t cells = pdf.cells();
    const auto fine_index = [&](const Int3& c, int ox, int oy, int oz) {
        const Int3 base = c * 2 - fine.origin;
        return pdf.index(base[0] + ox, base[1] + oy, base[2] + oz);
    };
    // coarse values before correction: every child of an exploded cell still holds it
    std::vector<Pdfs> value(e.cells.size());
    std::unordered_map<std::size_t, std::size_t> where;
    where.reserve(e.cells.size());
    for (std::size_t k = 0; k < e.cells.size(); ++k) {
        value[k] = pdf.get(fine_index(e.cells[k], 0, 0, 0));
        where[e.slot(e.cells[k])] = k;
    }
    const auto lookup = [&](const Int3& c) -> const Pdfs* {
        if (!e.has(c)) return nullptr;
        return &value[where.at(e.slot(c))];
    };
    for (std::size_t k = 0; k < e.cells.size(); ++k) {
        const Int3& c = e.cells[k];
        const Pdfs& v = value[k];
        std::array<Pdfs, 3> slope{};
        for (int i = 0; i < 3; ++i) {
            if (!(e.tangential[k] >> i & 1u)) continue;
            Int3 up = c, down = c;
            up[i] += 1;
            down[i] -= 1;
            const Pdfs* pu = lookup(up);
            const Pdfs* pd = lookup(down);
            for (int a = 0; a < Q; ++a) {
                if (pu && pd) slope[i][a] = 0.5 * ((*pu)[a] - (*pd)[a]);
                else if (pu) slope[i][a] = (*pu)[a] - v[a];
                else if (pd) slope[i][a] = v[a] - (*pd)[a];
                else slope[i][a] = 0;
            }
        }
        for (int oz = 0; oz < 2; ++oz)
            for (int oy = 0; oy < 2; ++oy)
                for (int ox = 0; ox < 2; ++ox) {
                    const double sx = ox ? 0.25 : -0.25, sy = oy ? 0.25 : -0.25, sz = oz ? 0.25 : -0.25;
                    const std::size_t idx = fine_index(c, ox, oy, oz);
                    for (int a = 0; a < Q; ++a)
                        f[a * cells + idx] = v[a] + sx * slope[0][a] + sy * slope[1][a] + sz * slope[2][a];
                }
    }
}

// ---------------------------------------------------------------------------------------------
// two-phase exchange for one rank

struct ExchangeOptions {
    bool interpolate = true; //!< false: pure homogeneous explosion
};

class Communicator {
public:
    Communicator(std::uint32_t rank, Transport& transport, CommSchedule schedule,
                 std::map<BlockId, BlockGrid*> blocks, ExchangeOptions options = {})
        : rank_(rank), transport_(&transport), schedule_(std::move(schedule)), blocks_(std::move(blocks)),
          options_(options) {
        for (auto& [level, jobs] : schedule_.recv[int(Pattern::coarse_to_fine)]) {
            std::map<BlockId, std::vector<const Job*>> per_block;
            for (auto& j : jobs) per_block[j.receiver].push_back(&j);
            for (auto& [id, list] : per_block) exploded_[level].emplace_back(id, collect_exploded(block(id), list));
        }
        for (int p = 0; p < 3; ++p) {
            for (auto& [level, jobs] : schedule_.send[p]) {
                auto& plans = send_plans_[{level, p}];
                for (const Job& j : jobs)
                    plans.push_back(j.receiver_rank == rank_ ? IndexPlan{} : pack_plan(j, block(j.sender).pdf));
            }
            for (auto& [level, jobs] : schedule_.recv[p]) {
                auto& plans = recv_plans_[{level, p}];
                for (const Job& j : jobs) {
                    RecvPlan r{&block(j.receiver), nullptr, unpack_plan(j, block(j.receiver).pdf), {}};
                    if (j.sender_rank == rank_) {
                        r.sender = &block(j.sender);
                        r.local = pack_plan(j, r.sender->pdf);
                    }
                    plans.push_back(std::move(r));
                }
            }
        }
    }

    const CommSchedule& schedule() const { return schedule_; }

    void initiate(int level, Pattern p) {
        const std::uint64_t seq = ++seq_[{level, int(p)}];
        std::map<std::uint32_t, std::vector<double>> out;
        const auto& jobs = schedule_.sends(p, level);
        if (jobs.empty()) return;
        const auto& plans = send_plans_.at({level, int(p)});
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            const Job& j = jobs[k];
            if (j.receiver_rank == rank_) continue;
            pack(plans[k], block(j.sender).pdf.src(), out[j.receiver_rank]);
        }
        for (auto& [dst, payload] : out) transport_->send({rank_, dst, level, p, seq}, std::move(payload));
    }

    void finish(int level, Pattern p) {
        const std::uint64_t seq = seq_[{level, int(p)}];
        const auto& jobs = schedule_.recvs(p, level);
        std::map<std::uint32_t, std::pair<std::vector<double>, std::size_t>> in;
        for (const Job& j : jobs)
            if (j.sender_rank != rank_ && !in.count(j.sender_rank))
                in[j.sender_rank] = {transport_->receive({j.sender_rank, rank_, level, p, seq}), 0};
        if (!jobs.empty()) {
            const auto& plans = recv_plans_.at({level, int(p)});
            for (std::size_t k = 0; k < jobs.size(); ++k) {
                const Job& j = jobs[k];
                const RecvPlan& r = plans[k];
                double* f = r.receiver->pdf.src();
                if (j.sender_rank == rank_ && r.local.fan == 1 && r.unpack.fan == 1) {
                    const double* g = r.sender->pdf.src();
                    const std::uint32_t* from = r.local.offsets.data();
                    const std::uint32_t* to = r.unpack.offsets.data();
                    for (std::size_t v = 0, n = r.unpack.offsets.size(); v < n; ++v) f[to[v]] = g[from[v]];
                } else if (j.sender_rank == rank_) {
                    scratch_.clear();
                    pack(r.local, r.sender->pdf.src(), scratch_);
                    unpack(r.unpack, f, scratch_.data(), scratch_.size());
                } else {
                    auto& [buf, pos] = in[j.sender_rank];
                    pos += unpack(r.unpack, f, buf.data() + pos, buf.size() - pos);
                }
            }
        }
        for (auto& [src, entry] : in)
            if (entry.second != entry.first.size())
                throw Error("payload length mismatch: " + std::to_string(entry.first.size() - entry.second) +
                            " unread values from rank " + std::to_string(src));
        if (p == Pattern::coarse_to_fine && options_.interpolate) {
            auto it = exploded_.find(level);
            if (it != exploded_.end())
                for (auto& [id, cells] : it->second) interpolate_exploded(block(id), cells);
        }
    }

    void exchange(int level, Pattern p) {
        initiate(level, p);
        finish(level, p);
    }

private:
    BlockGrid& block(BlockId id) {
        auto it = blocks_.find(id);
        if (it == blocks_.end()) throw Error("communicator: block is not local to rank " + std::to_string(rank_));
        return *it->second;
    }

    struct RecvPlan {
        BlockGrid* receiver;
        BlockGrid* sender; //!< local sender, else null
        IndexPlan unpack;
        IndexPlan local;   //!< pack plan of a local sender
    };

    std::uint32_t rank_;
    Transport* transport_;
    CommSchedule schedule_;
    std::map<BlockId, BlockGrid*> blocks_;
    ExchangeOptions options_;
    std::map<std::pair<int, int>, std::uint64_t> seq_;
    std::map<int, std::vector<std::pair<BlockId, ExplodedCells>>> exploded_;
    std::map<std::pair<int, int>, std::vector<IndexPlan>> send_plans_;
    std::map<std::pair<int, int>, std::vector<RecvPlan>> recv_plans_;
    std::vector<double> scratch_;
};

} // namespace octoflow::comm
