#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "octoflow/block_forest.hpp"
#include "octoflow/lattice_model.hpp"
#include "octoflow/level_params.hpp"

namespace octoflow {

enum class CellType : std::uint8_t { fluid = 0, noslip = 1, velocity = 2, outside = 3 };

struct CellClass {
    CellType type = CellType::fluid;
    Vec3 u_wall{0, 0, 0};
};

using GeometryFn = std::function<CellClass(const Vec3&)>;

//! Two PDF arrays (structure of arrays) covering a block plus its ghost layers.
class PdfField {
public:
    static constexpr int ghost = 4;

    PdfField() = default;
    PdfField(const Int3& dims, int level) : dims_(dims), level_(level) {
        for (int i = 0; i < 3; ++i) ext_[i] = dims[i] + 2 * ghost;
        cells_ = std::size_t(ext_[0] * ext_[1] * ext_[2]);
        src_.assign(cells_ * Q, 0.0);
        dst_.assign(cells_ * Q, 0.0);
        for (int a = 0; a < Q; ++a) offset_[a] = D3Q19::e[a][0] + ext_[0] * (D3Q19::e[a][1] + ext_[1] * D3Q19::e[a][2]);
    }

    const Int3& dims() const { return dims_; }
    const Int3& extent() const { return ext_; }
    int level() const { return level_; }
    std::size_t cells() const { return cells_; }

    //! Linear cell index of local coordinates (interior starts at 0, ghosts are negative / >= dims).
    std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return std::size_t((x + ghost) + ext_[0] * ((y + ghost) + ext_[1] * (z + ghost)));
    }
    std::size_t index(const Int3& p) const { return index(p[0], p[1], p[2]); }
    Int3 coords(std::size_t idx) const {
        const auto i = std::int64_t(idx);
        return {i % ext_[0] - ghost, (i / ext_[0]) % ext_[1] - ghost, i / (ext_[0] * ext_[1]) - ghost};
    }
    bool in_allocation(const Int3& p) const {
        for (int i = 0; i < 3; ++i)
            if (p[i] < -ghost || p[i] >= dims_[i] + ghost) return false;
        return true;
    }
    std::ptrdiff_t offset(int a) const { return offset_[a]; }

    double* src() { return src_.data(); }
    const double* src() const { return src_.data(); }
    double* dst() { return dst_.data(); }
    const double* dst() const { return dst_.data(); }

    double& at(int a, std::size_t cell) { return src_[std::size_t(a) * cells_ + cell]; }
    double at(int a, std::size_t cell) const { return src_[std::size_t(a) * cells_ + cell]; }
    double& at(int a, const Int3& p) { return at(a, index(p)); }
    double at(int a, const Int3& p) const { return at(a, index(p)); }

    Pdfs get(std::size_t cell) const {
        Pdfs f;
        for (int a = 0; a < Q; ++a) f[a] = src_[std::size_t(a) * cells_ + cell];
        return f;
    }
    void set(std::size_t cell, const Pdfs& f) {
        for (int a = 0; a < Q; ++a) src_[std::size_t(a) * cells_ + cell] = f[a];
    }

    //! Fills every cell of both arrays.
    void fill(const Pdfs& f) {
        for (int a = 0; a < Q; ++a) {
            std::fill(src_.begin() + std::ptrdiff_t(a * cells_), src_.begin() + std::ptrdiff_t((a + 1) * cells_), f[a]);
            std::fill(dst_.begin() + std::ptrdiff_t(a * cells_), dst_.begin() + std::ptrdiff_t((a + 1) * cells_), f[a]);
        }
    }

    void swap() { src_.swap(dst_); }

private:
    Int3 dims_{0, 0, 0};
    Int3 ext_{0, 0, 0};
    int level_ = 0;
    std::size_t cells_ = 0;
    std::vector<double> src_, dst_;
    std::array<std::ptrdiff_t, Q> offset_{};
};

//! Per-cell classification covering the same extent as PdfField.
class FlagField {
public:
    FlagField() = default;
    explicit FlagField(const PdfField& shape) : ext_(shape.extent()), types_(shape.cells(), CellType::outside) {}

    CellType type(std::size_t cell) const { return types_[cell]; }
    CellType type(const Int3& p) const { return types_[index(p)]; }
    bool is_fluid(std::size_t cell) const { return types_[cell] == CellType::fluid; }
    bool is_boundary(std::size_t cell) const {
        return types_[cell] == CellType::noslip || types_[cell] == CellType::velocity ||
               types_[cell] == CellType::outside;
    }
    Vec3 wall_velocity(std::size_t cell) const {
        auto it = wall_.find(cell);
        return it == wall_.end() ? Vec3{0, 0, 0} : it->second;
    }

    void set(std::size_t cell, const CellClass& c) {
        types_[cell] = c.type;
        if (c.type == CellType::velocity)
            wall_[cell] = c.u_wall;
        else
            wall_.erase(cell);
    }
    std::size_t size() const { return types_.size(); }

private:
    std::size_t index(const Int3& p) const {
        const auto g = PdfField::ghost;
        return std::size_t((p[0] + g) + ext_[0] * ((p[1] + g) + ext_[1] * (p[2] + g)));
    }

    Int3 ext_{0, 0, 0};
    std::vector<CellType> types_;
    std::unordered_map<std::size_t, Vec3> wall_;
};

//! Where the coarser neighbors of a block sit, in the block's local cell coordinates.
struct InterfaceInfo {
    bool has_coarser_neighbor = false;
    std::vector<IBox> coarser_regions;
    std::bitset<26> coarser_proximity; //!< per neighbor_directions() entry: ghost region overlaps a coarser block
};

//! Ghost region of depth `depth` in direction d: lateral extent equals the interior.
inline IBox ghost_region(const Int3& dims, const Int3& d, std::int64_t depth) {
    IBox r;
    for (int i = 0; i < 3; ++i) {
        if (d[i] > 0) {
            r.lo[i] = dims[i];
            r.hi[i] = dims[i] + depth;
        } else if (d[i] < 0) {
            r.lo[i] = -depth;
            r.hi[i] = 0;
        } else {
            r.lo[i] = 0;
            r.hi[i] = dims[i];
        }
    }
    return r;
}

inline Int3 block_origin(const ForestGeometry& g, int level, const Int3& coords) {
    return g.cell_box(level, coords, level).lo;
}

//! Box of a neighbor in the local cell coordinates of `self`, at level `ref` (>= both levels).
inline IBox neighbor_box(const ForestGeometry& g, const Block& self, const NeighborRecord& n, int ref) {
    const int nl = self.level + n.level_diff;
    const IBox nb = g.cell_box(nl, g.coords(n.id), ref);
    const auto ext = g.domain_cells(ref);
    const Int3 shift{n.shift[0] * ext[0], n.shift[1] * ext[1], n.shift[2] * ext[2]};
    const Int3 origin = g.cell_box(self.level, self.coords, ref).lo;
    return nb.shifted(shift - origin);
}

inline InterfaceInfo make_interface_info(const ForestGeometry& g, const Block& b) {
    InterfaceInfo info;
    const Int3 dims{g.cells_per_block[0], g.cells_per_block[1], g.cells_per_block[2]};
    for (auto& n : b.neighbors) {
        if (n.level_diff != -1) continue;
        info.has_coarser_neighbor = true;
        info.coarser_regions.push_back(neighbor_box(g, b, n, b.level));
    }
    const auto& dirs = neighbor_directions();
    for (std::size_t k = 0; k < dirs.size(); ++k)
        for (auto& box : info.coarser_regions)
            if (!intersect(ghost_region(dims, dirs[k], PdfField::ghost), box).empty()) info.coarser_proximity.set(k);
    return info;
}

//! Number of whole cells between cell p and box (0 when p lies inside), Chebyshev metric.
inline std::int64_t cell_gap(const Int3& p, const IBox& box) {
    std::int64_t gap = 0;
    for (int i = 0; i < 3; ++i) {
        std::int64_t gi = 0;
        if (p[i] < box.lo[i]) gi = box.lo[i] - p[i] - 1;
        else if (p[i] >= box.hi[i]) gi = p[i] - box.hi[i];
        gap = std::max(gap, gi);
    }
    return gap;
}

//! Width of the band (in fine cells) next to a coarser block inside which fine cells copy the
//! classification of their coarse parent cell.
inline constexpr std::int64_t interface_band = 4;

//! Physical center of a cell given in global level-`level` cell coordinates, with periodic wrap.
inline Vec3 cell_center(const ForestGeometry& g, int level, const Int3& global) {
    const auto h = g.cell_size(level);
    const auto n = g.domain_cells(level);
    Vec3 c;
    for (int i = 0; i < 3; ++i) {
        std::int64_t k = global[i];
        if (g.periodic[i]) k = k - floor_div(k, n[i]) * n[i];
        c[i] = g.domain.lo[i] + (double(k) + 0.5) * h[i];
    }
    return c;
}

inline FlagField classify_cells(const ForestGeometry& g, const Block& b, const InterfaceInfo& info,
                                const PdfField& shape, const GeometryFn& geometry) {
    FlagField flags(shape);
    const Int3 origin = block_origin(g, b.level, b.coords);
    const auto& dims = shape.dims();
    const IBox all{Int3{-PdfField::ghost, -PdfField::ghost, -PdfField::ghost},
                   Int3{dims[0] + PdfField::ghost, dims[1] + PdfField::ghost, dims[2] + PdfField::ghost}};
    for_each_cell(all, [&](const Int3& p) {
        bool coarse = false;
        for (auto& box : info.coarser_regions)
            if (cell_gap(p, box) < interface_band) {
                coarse = true;
                break;
            }
        const Int3 global = origin + p;
        CellClass c;
        if (coarse) {
            const Int3 parent{floor_div(global[0], 2), floor_div(global[1], 2), floor_div(global[2], 2)};
            c = geometry(cell_center(g, b.level - 1, parent));
        } else {
            c = geometry(cell_center(g, b.level, global));
        }
        flags.set(shape.index(p), c);
    });
    return flags;
}

//! One bounce-back link: before streaming, src[target] = src[source] + term.
struct BoundaryLink {
    std::size_t target; //!< (direction a, boundary cell b) in the source array
    std::size_t source; //!< (inverse(a), fluid cell x = b + e_a)
    double term;
};

struct KernelCounters {
    std::uint64_t collide = 0;
    std::uint64_t stream = 0;
    std::uint64_t fused = 0;
};

//! Everything a rank stores for one of its blocks.
struct BlockGrid {
    BlockId id;
    int level = 0;
    Int3 coords;
    Int3 origin; //!< global cell coordinates of local cell (0,0,0)
    PdfField pdf;
    FlagField flags;
    InterfaceInfo iface;
    IBox interior;
    IBox stream_region;
    std::vector<BoundaryLink> links;
    bool interior_all_fluid = false;
    bool region_all_fluid = false;
    std::uint64_t fluid_cells = 0;
    KernelCounters counters;

    BlockGrid() = default;
    BlockGrid(const BlockGrid&) = delete;
    BlockGrid& operator=(const BlockGrid&) = delete;
};

inline bool all_fluid(const BlockGrid& g, const IBox& box) {
    bool ok = true;
    for_each_cell(box, [&](const Int3& p) { ok = ok && g.flags.is_fluid(g.pdf.index(p)); });
    return ok;
}

inline void build_boundary_links(BlockGrid& g, double rho0) {
    g.links.clear();
    const auto cells = g.pdf.cells();
    for_each_cell(g.stream_region, [&](const Int3& x) {
        const auto xi = g.pdf.index(x);
        if (!g.flags.is_fluid(xi)) return;
        for (int a = 1; a < Q; ++a) {
            const Int3 b{x[0] - D3Q19::e[a][0], x[1] - D3Q19::e[a][1], x[2] - D3Q19::e[a][2]};
            const auto bi = g.pdf.index(b);
            if (!g.flags.is_boundary(bi)) continue;
            double term = 0;
            if (g.flags.type(bi) == CellType::velocity)
                term = 6.0 * D3Q19::w[a] * rho0 * D3Q19::edot(a, g.flags.wall_velocity(bi));
            g.links.push_back({std::size_t(a) * cells + bi, std::size_t(D3Q19::inverse[a]) * cells + xi, term});
        }
    });
}

//! Sets up a block: flags, interface info, links; PDFs at rest equilibrium.
inline void init_block_grid(BlockGrid& grid, const ForestGeometry& g, const Block& b, const GeometryFn& geometry,
                            double rho0 = 1.0) {
    const Int3 dims{g.cells_per_block[0], g.cells_per_block[1], g.cells_per_block[2]};
    for (int i = 0; i < 3; ++i)
        if (dims[i] < 8 || dims[i] % 2 != 0)
            throw Error("cells per block must be even and at least 8 in every direction");
    grid.id = b.id;
    grid.level = b.level;
    grid.coords = b.coords;
    grid.origin = block_origin(g, b.level, b.coords);
    grid.pdf = PdfField(dims, b.level);
    grid.iface = make_interface_info(g, b);
    grid.flags = classify_cells(g, b, grid.iface, grid.pdf, geometry);
    grid.interior = IBox{Int3{0, 0, 0}, dims};
    grid.stream_region = grid.iface.has_coarser_neighbor ? grid.interior.grown(2) : grid.interior;
    grid.pdf.fill(equilibrium(1.0, Vec3{0, 0, 0}, rho0));
    build_boundary_links(grid, rho0);
    grid.interior_all_fluid = all_fluid(grid, grid.interior);
    grid.region_all_fluid = all_fluid(grid, grid.stream_region);
    grid.fluid_cells = 0;
    for_each_cell(grid.interior, [&](const Int3& p) { grid.fluid_cells += grid.flags.is_fluid(grid.pdf.index(p)); });
}

// ---------------------------------------------------------------------------------------------
// kernels

inline void boundary_treatment(BlockGrid& g) {
    double* f = g.pdf.src();
    for (const auto& l : g.links) f[l.target] = f[l.source] + l.term;
}

namespace detail {

//! Unrolled pairwise TRT update of one cell (SRT when both rates are equal). Agrees with
//! collide_trt up to rounding.
struct Relaxer {
    double le, lo, rho0;
    double F[Q];
    bool forced;

    explicit Relaxer(const LevelParams& p)
        : le(p.kind == CollisionKind::trt ? p.lambda_e : p.omega),
          lo(p.kind == CollisionKind::trt ? p.lambda_o : p.omega), rho0(p.rho0), forced(p.has_force) {
        for (int a = 0; a < Q; ++a) F[a] = p.has_force ? p.force[a] : 0.0;
    }

    void operator()(double* f) const {
        double rho = 0;
#pragma GCC unroll 19
        for (int a = 0; a < Q; ++a) rho += f[a];
        const double jx = (f[1] - f[2]) + (f[7] - f[8]) + (f[9] - f[10]) + (f[11] - f[12]) + (f[13] - f[14]);
        const double jy = (f[3] - f[4]) + (f[7] - f[8]) - (f[9] - f[10]) + (f[15] - f[16]) + (f[17] - f[18]);
        const double jz = (f[5] - f[6]) + (f[11] - f[12]) - (f[13] - f[14]) + (f[15] - f[16]) - (f[17] - f[18]);
        const double inv = 1.0 / rho0;
        const double ux = jx * inv, uy = jy * inv, uz = jz * inv;
        const double usq = 1.5 * (ux * ux + uy * uy + uz * uz);
        constexpr double w0 = 1.0 / 3, w1 = 1.0 / 18, w2 = 1.0 / 36;
        f[0] -= le * (f[0] - w0 * (rho - rho0 * usq));
        auto pair = [&](int a, double w, double eu) {
            const int b = a + 1;
            const double eq_even = w * (rho + rho0 * (4.5 * eu * eu - usq));
            const double eq_odd = w * rho0 * 3.0 * eu;
            const double even = le * (0.5 * (f[a] + f[b]) - eq_even);
            const double odd = lo * (0.5 * (f[a] - f[b]) - eq_odd);
            f[a] = f[a] - even - odd;
            f[b] = f[b] - even + odd;
        };
        pair(1, w1, ux);
        pair(3, w1, uy);
        pair(5, w1, uz);
        pair(7, w2, ux + uy);
        pair(9, w2, ux - uy);
        pair(11, w2, ux + uz);
        pair(13, w2, ux - uz);
        pair(15, w2, uy + uz);
        pair(17, w2, uy - uz);
        // F is zero without a body force; adding it unconditionally keeps the loop branch-free
#pragma GCC unroll 19
        for (int a = 0; a < Q; ++a) f[a] += F[a];
    }
};

//! Row-wise driver over a box; calls body(first_cell_index, count) for each x-row.
template <class Body>
inline void for_each_row(const PdfField& pdf, const IBox& box, Body&& body) {
    const auto n = box.size(0);
    for (auto z = box.lo[2]; z < box.hi[2]; ++z)
        for (auto y = box.lo[1]; y < box.hi[1]; ++y) body(pdf.index(box.lo[0], y, z), std::size_t(n));
}

//! Relaxes n consecutive cells, reading in[a][k] and writing out[a][k]; in and out may coincide
//! but distinct directions never overlap.
inline void relax_row(const Relaxer& relax, const double* const* in, double* const* out, std::size_t n) {
#pragma GCC ivdep
    for (std::size_t k = 0; k < n; ++k) {
        double f[Q];
#pragma GCC unroll 19
        for (int a = 0; a < Q; ++a) f[a] = in[a][k];
        relax(f);
#pragma GCC unroll 19
        for (int a = 0; a < Q; ++a) out[a][k] = f[a];
    }
}

} // namespace detail

inline void collide(BlockGrid& g, const LevelParams& p) {
    double* src = g.pdf.src();
    const std::size_t cells = g.pdf.cells();
    const bool dense = g.interior_all_fluid;
    const detail::Relaxer relax(p);
    detail::for_each_row(g.pdf, g.interior, [&](std::size_t first, std::size_t n) {
        double* ptr[Q];
        if (dense) {
            for (int a = 0; a < Q; ++a) ptr[a] = src + a * cells + first;
            detail::relax_row(relax, ptr, ptr, n);
            return;
        }
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t c = first + k;
            if (!g.flags.is_fluid(c)) continue;
            for (int a = 0; a < Q; ++a) ptr[a] = src + a * cells + c;
            detail::relax_row(relax, ptr, ptr, 1);
        }
    });
    ++g.counters.collide;
}

//! Boundary treatment followed by pull streaming over the stream region; swaps the arrays.
inline void stream(BlockGrid& g) {
    boundary_treatment(g);
    const double* src = g.pdf.src();
    double* dst = g.pdf.dst();
    const std::size_t cells = g.pdf.cells();
    const bool dense = g.region_all_fluid;
    detail::for_each_row(g.pdf, g.stream_region, [&](std::size_t first, std::size_t n) {
        for (int a = 0; a < Q; ++a) {
            const double* s = src + a * cells - g.pdf.offset(a);
            double* d = dst + a * cells;
            if (dense) {
                for (std::size_t k = first; k < first + n; ++k) d[k] = s[k];
            } else {
                for (std::size_t k = first; k < first + n; ++k)
                    if (g.flags.is_fluid(k)) d[k] = s[k];
            }
        }
    });
    g.pdf.swap();
    ++g.counters.stream;
}

//! Boundary treatment, pull streaming and collision in one pass; ghost cells of the stream region
//! are streamed but not collided.
inline void fused_stream_collide(BlockGrid& g, const LevelParams& p) {
    boundary_treatment(g);
    const double* src = g.pdf.src();
    double* dst = g.pdf.dst();
    const std::size_t cells = g.pdf.cells();
    const bool dense = g.region_all_fluid;
    const auto& in = g.interior;
    const auto& region = g.stream_region;
    const detail::Relaxer relax(p);
    const double* from[Q];
    double* to[Q];
    const auto copy = [&](std::size_t first, std::size_t n) {
        for (int a = 0; a < Q; ++a) {
            const double* s = src + a * cells - g.pdf.offset(a);
            double* d = dst + a * cells;
            for (std::size_t k = first; k < first + n; ++k)
                if (dense || g.flags.is_fluid(k)) d[k] = s[k];
        }
    };
    const auto update = [&](std::size_t first, std::size_t n) {
        if (dense) {
            for (int a = 0; a < Q; ++a) {
                from[a] = src + a * cells - g.pdf.offset(a) + first;
                to[a] = dst + a * cells + first;
            }
            detail::relax_row(relax, from, to, n);
            return;
        }
        for (std::size_t c = first; c < first + n; ++c) {
            if (!g.flags.is_fluid(c)) continue;
            for (int a = 0; a < Q; ++a) {
                from[a] = src + a * cells - g.pdf.offset(a) + c;
                to[a] = dst + a * cells + c;
            }
            detail::relax_row(relax, from, to, 1);
        }
    };
    for (auto z = region.lo[2]; z < region.hi[2]; ++z)
        for (auto y = region.lo[1]; y < region.hi[1]; ++y) {
            const std::size_t row = g.pdf.index(region.lo[0], y, z);
            const std::size_t n = std::size_t(region.size(0));
            const bool inside = z >= in.lo[2] && z < in.hi[2] && y >= in.lo[1] && y < in.hi[1];
            if (!inside) {
                copy(row, n);
                continue;
            }
            const std::size_t left = std::size_t(in.lo[0] - region.lo[0]);
            const std::size_t mid = std::size_t(in.size(0));
            copy(row, left);
            update(row + left, mid);
            copy(row + left + mid, n - left - mid);
        }
    g.pdf.swap();
    ++g.counters.fused;
}

//! Velocity of a cell including the half-force correction, in lattice units of its level.
inline Moments cell_moments(const BlockGrid& g, std::size_t cell, const LevelParams& p) {
    const auto f = g.pdf.get(cell);
    std::optional<Vec3> force;
    if (p.has_force) force = p.accel * p.rho0;
    return macroscopic(f, p.rho0, force, 1.0);
}

} // namespace octoflow
