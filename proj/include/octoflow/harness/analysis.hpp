#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "octoflow/harness/scenario.hpp"
#include "octoflow/timestepper.hpp"

namespace octoflow::harness {

struct NormReport {
    std::uint64_t t = 0; //!< time steps of the finest level
    double L1 = 0, L2 = 0, Linf = 0;
    double flow_rate = 0, flow_rate_error = 0;
    double mlups = 0;
};

struct Norms {
    double L1 = 0, L2 = 0, Linf = 0;
};

//! Running sums for the weighted error norms; add cells in a fixed order for reproducible results.
class NormAccumulator {
public:
    void add(double du, double dx) {
        const double w = dx * dx * dx;
        l1_ += w * du;
        l2_ += w * du * du;
        linf_ = std::max(linf_, du);
    }
    Norms result() const { return {l1_, std::sqrt(l2_), linf_}; }

private:
    double l1_ = 0, l2_ = 0, linf_ = 0;
};

//! Normalized velocity of every interior fluid cell, visited in block-id order.
template <class F>
void for_each_fluid_cell(const Solver& solver, double u_ref, F&& f) {
    const auto& g = solver.geometry();
    for (const BlockGrid* b : solver.blocks()) {
        const auto& p = solver.params()[b->level];
        const double dx = g.cell_size(b->level)[0];
        for_each_cell(b->interior, [&](const Int3& c) {
            const std::size_t idx = b->pdf.index(c);
            if (!b->flags.is_fluid(idx)) return;
            const Vec3 u = cell_moments(*b, idx, p).u * (1.0 / u_ref);
            f(*b, b->origin + c, cell_center(g, b->level, b->origin + c), u, dx);
        });
    }
}

inline Norms error_norms(const Solver& solver, const Scenario& s) {
    if (!s.has_analytic()) throw Error("error_norms: scenario has no analytic solution");
    NormAccumulator acc;
    for_each_fluid_cell(solver, s.u_ref, [&](const BlockGrid&, const Int3&, const Vec3& x, const Vec3& u, double dx) {
        acc.add(norm(u - s.analytic(x)), dx);
    });
    return acc.result();
}

//! Q = mean normalized u_x over the fluid cells cut by the plane x = (domain center), weighted
//! by the cell face area, times the scenario's cross-section area.
inline std::pair<double, double> flow_rate(const Solver& solver, const Scenario& s) {
    if (s.area <= 0) throw Error("flow_rate: scenario defines no cross-section");
    const auto& g = solver.geometry();
    double sum = 0, weight = 0;
    for_each_fluid_cell(solver, s.u_ref, [&](const BlockGrid& b, const Int3& global, const Vec3&, const Vec3& u, double dx) {
        const auto n = g.domain_cells(b.level)[0];
        if (global[0] != n / 2) return;
        sum += u[0] * dx * dx;
        weight += dx * dx;
    });
    if (weight == 0) throw Error("flow_rate: the cross-section contains no fluid cell");
    const double q = sum / weight * s.area;
    return {q, std::abs(q - s.flow_rate_ref) / s.flow_rate_ref};
}

inline double mlups(std::uint64_t weighted_updates, double seconds) {
    if (!(seconds > 0)) throw Error("mlups: elapsed time must be positive");
    return double(weighted_updates) / seconds / 1e6;
}

inline NormReport evaluate(const Solver& solver, const Scenario& s, double rate = 0) {
    NormReport r;
    r.t = solver.steps_done() << solver.finest_level();
    r.mlups = rate;
    if (s.has_analytic()) {
        const auto n = error_norms(solver, s);
        r.L1 = n.L1;
        r.L2 = n.L2;
        r.Linf = n.Linf;
        std::tie(r.flow_rate, r.flow_rate_error) = flow_rate(solver, s);
    }
    return r;
}

inline const char* csv_header = "t,L1,L2,Linf,flow_rate,flow_rate_error,mlups";

inline std::string csv_row(const NormReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", (unsigned long long)r.t, r.L1, r.L2, r.Linf,
                  r.flow_rate, r.flow_rate_error, r.mlups);
    return buf;
}

//! Blocks per level and each level's share of volume, workload and memory.
struct LevelShares {
    std::map<int, std::uint64_t> blocks;
    std::map<int, double> coverage, workload, memory;
};

inline LevelShares level_shares(const SetupForest& forest) {
    LevelShares s;
    double volume = 0, work = 0;
    std::uint64_t total = 0;
    const auto& g = forest.geometry;
    forest.for_each([&](const SetupBlock& b) {
        ++s.blocks[b.level];
        ++total;
        s.coverage[b.level] += g.aabb(b.id).volume();
        s.workload[b.level] += b.workload;
        volume += g.aabb(b.id).volume();
        work += b.workload;
    });
    for (auto& [l, v] : s.coverage) v /= volume;
    for (auto& [l, v] : s.workload) v /= work;
    for (auto& [l, n] : s.blocks) s.memory[l] = double(n) / double(total);
    return s;
}

} // namespace octoflow::harness
