#include <gtest/gtest.h>

#include <random>
#include <set>

#include "octoflow/grid_data.hpp"
#include "octoflow/harness/scenario.hpp"
#include "octoflow/level_params.hpp"

using namespace octoflow;

namespace {

struct Standalone {
    ForestGeometry geometry;
    BlockForest view;
    std::unique_ptr<BlockGrid> grid = std::make_unique<BlockGrid>();
};

//! One 8^3 block on a unit root grid.
Standalone standalone(const GeometryFn& cells, bool periodic = true) {
    Standalone s;
    s.geometry.cells_per_block = {8, 8, 8};
    s.geometry.periodic = {periodic, periodic, periodic};
    const auto f = build_setup_forest(s.geometry, nullptr, nullptr, 0);
    s.view = make_local_forest(f, 0);
    init_block_grid(*s.grid, s.geometry, s.view.local_blocks.at(0), cells);
    return s;
}

CellClass fluid(const Vec3&) { return {CellType::fluid, {}}; }

void randomize(PdfField& pdf, std::mt19937_64& rng, bool ghosts_too = true) {
    std::uniform_real_distribution<double> d(-0.02, 0.02);
    const auto& dims = pdf.dims();
    const std::int64_t g = ghosts_too ? PdfField::ghost : 0;
    for_each_cell(IBox{Int3{-g, -g, -g}, Int3{dims[0] + g, dims[1] + g, dims[2] + g}}, [&](const Int3& p) {
        Pdfs f;
        for (int a = 0; a < Q; ++a) f[a] = D3Q19::w[a] * (1 + d(rng) * 10);
        pdf.set(pdf.index(p), f);
    });
}

LevelParams trt_params(bool forced) {
    ForceConfig force;
    if (forced) force.acceleration_0 = {1e-5, -2e-6, 3e-6};
    return make_level_params(RelaxationConfig::from_viscosity(0.05), force, 0);
}

} // namespace

TEST(Classification, AllFluid) {
    auto s = standalone(fluid);
    EXPECT_TRUE(s.grid->interior_all_fluid);
    EXPECT_EQ(s.grid->fluid_cells, 512u);
}

TEST(Classification, PipeCenterSampling) {
    harness::ScenarioConfig c;
    c.scenario = harness::ScenarioKind::pipe_poiseuille;
    const auto sc = harness::make_scenario(c);
    EXPECT_EQ(sc.cells(Vec3{0.2, 0.5 + 0.51, 0.5}).type, CellType::noslip);
    EXPECT_EQ(sc.cells(Vec3{0.2, 0.5, 0.5 + 0.49}).type, CellType::fluid);
    // every cell of a uniform block follows the class of its own center
    auto wall = [](const Vec3& p) { return CellClass{p[1] < 0.3 ? CellType::noslip : CellType::fluid, {}}; };
    auto s = standalone(wall);
    for_each_cell(IBox{Int3{-4, -4, -4}, Int3{12, 12, 12}}, [&](const Int3& p) {
        const double y = (double(((p[1] % 8) + 8) % 8) + 0.5) / 8;
        EXPECT_EQ(s.grid->flags.type(p), y < 0.3 ? CellType::noslip : CellType::fluid);
    });
}

TEST(Classification, InterfaceBandFollowsCoarseParent) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> offset(0.05, 0.95);
    for (int k = 0; k < 20; ++k) {
        const double w = offset(rng);
        auto cells = [w](const Vec3& p) { return CellClass{p[1] < w ? CellType::noslip : CellType::fluid, {}}; };
        ForestGeometry g;
        g.root_dims = {2, 1, 1};
        g.domain.hi = Vec3{2, 1, 1};
        g.cells_per_block = {8, 8, 8};
        auto refine = [](const BlockInfo& b) { return b.coords[0] == 1; };
        const auto f = build_setup_forest(g, refine, nullptr, 1);
        const auto view = make_local_forest(f, 0);
        for (const Block& b : view.local_blocks) {
            if (b.level != 1) continue;
            BlockGrid grid;
            init_block_grid(grid, g, b, cells);
            const Int3 origin = block_origin(g, 1, b.coords);
            for_each_cell(IBox{Int3{-4, -4, -4}, Int3{12, 12, 12}}, [&](const Int3& p) {
                const Int3 gl = origin + p;
                // the coarse block spans fine x in [0, 16); band: fine x within 4 cells of it
                const bool band = b.coords[0] == 2 && gl[0] < 16 + 4;
                const double y = band ? (double(floor_div(gl[1], 2)) + 0.5) / 8 : (double(gl[1]) + 0.5) / 16;
                ASSERT_EQ(grid.flags.type(p), y < w ? CellType::noslip : CellType::fluid)
                    << "wall " << w << " cell " << gl[0] << "," << gl[1] << "," << gl[2];
            });
        }
    }
}

TEST(Stream, MatchesGatherOracle) {
    std::mt19937_64 rng(2);
    auto s = standalone(fluid);
    auto& pdf = s.grid->pdf;
    randomize(pdf, rng);
    std::vector<Pdfs> before(pdf.cells());
    for (std::size_t c = 0; c < pdf.cells(); ++c) before[c] = pdf.get(c);
    stream(*s.grid);
    for_each_cell(s.grid->interior, [&](const Int3& x) {
        for (int a = 0; a < Q; ++a) {
            const Int3 from{x[0] - D3Q19::e[a][0], x[1] - D3Q19::e[a][1], x[2] - D3Q19::e[a][2]};
            ASSERT_EQ(pdf.at(a, x), before[pdf.index(from)][a]);
        }
    });
}

TEST(Stream, PeriodicWrapOracle) {
    std::mt19937_64 rng(3);
    auto s = standalone(fluid);
    auto& pdf = s.grid->pdf;
    randomize(pdf, rng, false);
    auto wrap = [](std::int64_t v) { return ((v % 8) + 8) % 8; };
    // periodic ghosts filled by hand
    for_each_cell(IBox{Int3{-1, -1, -1}, Int3{9, 9, 9}}, [&](const Int3& p) {
        pdf.set(pdf.index(p), pdf.get(pdf.index(Int3{wrap(p[0]), wrap(p[1]), wrap(p[2])})));
    });
    std::vector<Pdfs> before(512);
    for_each_cell(s.grid->interior, [&](const Int3& p) { before[std::size_t(p[0] + 8 * (p[1] + 8 * p[2]))] = pdf.get(pdf.index(p)); });
    stream(*s.grid);
    for_each_cell(s.grid->interior, [&](const Int3& x) {
        for (int a = 0; a < Q; ++a) {
            const Int3 f{wrap(x[0] - D3Q19::e[a][0]), wrap(x[1] - D3Q19::e[a][1]), wrap(x[2] - D3Q19::e[a][2])};
            ASSERT_EQ(pdf.at(a, x), before[std::size_t(f[0] + 8 * (f[1] + 8 * f[2]))][a]);
        }
    });
}

TEST(Stream, UniformFieldAndSingleParticle) {
    auto s = standalone(fluid);
    auto& pdf = s.grid->pdf;
    const auto eq = equilibrium(1.0, {0.01, 0.02, 0});
    pdf.fill(eq);
    stream(*s.grid);
    for_each_cell(s.grid->interior, [&](const Int3& p) {
        for (int a = 0; a < Q; ++a) ASSERT_EQ(pdf.at(a, p), eq[a]);
    });
    pdf.fill(Pdfs{});
    pdf.at(1, Int3{3, 4, 5}) = 1.0;
    stream(*s.grid);
    for_each_cell(s.grid->interior, [&](const Int3& p) {
        for (int a = 0; a < Q; ++a) ASSERT_EQ(pdf.at(a, p), (a == 1 && p == Int3{4, 4, 5}) ? 1.0 : 0.0);
    });
}

TEST(Stream, EveryDestinationReadsOneDistinctSource) {
    auto walls = [](const Vec3& p) { return CellClass{p[1] < 0.2 || p[2] > 0.8 ? CellType::noslip : CellType::fluid, {}}; };
    auto s = standalone(walls);
    auto& pdf = s.grid->pdf;
    const std::size_t cells = pdf.cells();
    // unique tag per (direction, cell); links write tags of their source slot
    for (int a = 0; a < Q; ++a)
        for (std::size_t c = 0; c < cells; ++c) pdf.src()[a * cells + c] = double(a * cells + c);
    stream(*s.grid);
    std::set<double> seen;
    for_each_cell(s.grid->interior, [&](const Int3& x) {
        const std::size_t xi = pdf.index(x);
        if (!s.grid->flags.is_fluid(xi)) return;
        for (int a = 0; a < Q; ++a) {
            const double tag = pdf.at(a, xi);
            ASSERT_TRUE(seen.insert(tag).second) << "source read twice";
            const auto slot = std::size_t(tag);
            const std::size_t from = pdf.index(Int3{x[0] - D3Q19::e[a][0], x[1] - D3Q19::e[a][1], x[2] - D3Q19::e[a][2]});
            if (s.grid->flags.is_fluid(from)) {
                EXPECT_EQ(slot, a * cells + from);
            } else {
                // bounce-back: the fluid cell's own opposite population
                EXPECT_EQ(slot, std::size_t(D3Q19::inverse[a]) * cells + xi);
            }
        }
    });
}

TEST(Boundary, SingleCellChannelReflects) {
    // fluid only in the layer y in [3/8, 4/8)
    auto layer = [](const Vec3& p) {
        return CellClass{p[1] > 3.0 / 8 && p[1] < 4.0 / 8 ? CellType::fluid : CellType::noslip, {}};
    };
    auto s = standalone(layer);
    auto& pdf = s.grid->pdf;
    std::mt19937_64 rng(4);
    randomize(pdf, rng);
    const Int3 x{2, 3, 5};
    const Pdfs before = pdf.get(pdf.index(x));
    stream(*s.grid);
    const Pdfs after = pdf.get(pdf.index(x));
    for (int a = 0; a < Q; ++a) {
        if (D3Q19::e[a][1] != 0) {
            EXPECT_EQ(after[a], before[D3Q19::inverse[a]]) << "direction " << a;
        }
    }
}

TEST(Boundary, ZeroVelocityWallEqualsNoSlip) {
    auto noslip = [](const Vec3& p) { return CellClass{p[2] > 0.7 ? CellType::noslip : CellType::fluid, {}}; };
    auto resting = [](const Vec3& p) {
        return p[2] > 0.7 ? CellClass{CellType::velocity, {0, 0, 0}} : CellClass{CellType::fluid, {}};
    };
    auto a = standalone(noslip), b = standalone(resting);
    std::mt19937_64 rng(5);
    randomize(a.grid->pdf, rng);
    std::copy(a.grid->pdf.src(), a.grid->pdf.src() + a.grid->pdf.cells() * Q, b.grid->pdf.src());
    stream(*a.grid);
    stream(*b.grid);
    for (std::size_t k = 0; k < a.grid->pdf.cells() * Q; ++k) ASSERT_EQ(a.grid->pdf.src()[k], b.grid->pdf.src()[k]);
}

TEST(Boundary, MovingWallAddsMomentumTerm) {
    const Vec3 u{0.05, 0, 0};
    auto lid = [u](const Vec3& p) {
        return p[2] > 0.7 ? CellClass{CellType::velocity, u} : CellClass{CellType::fluid, {}};
    };
    auto s = standalone(lid);
    auto& pdf = s.grid->pdf;
    pdf.fill(equilibrium(1.0, {0, 0, 0}));
    stream(*s.grid);
    // last fluid layer: z index 5 (center 0.6875); direction (-1, 0, -1) comes from the lid
    const Int3 x{3, 3, 5};
    int a = 0;
    for (int k = 0; k < Q; ++k)
        if (D3Q19::e[k][0] == -1 && D3Q19::e[k][1] == 0 && D3Q19::e[k][2] == -1) a = k;
    EXPECT_NEAR(pdf.at(a, x), 1.0 / 36 + 6.0 / 36 * (-0.05), 1e-16);
}

TEST(Kernels, CollideMatchesReferenceOperator) {
    for (bool forced : {false, true}) {
        for (auto kind : {CollisionKind::srt, CollisionKind::trt}) {
            auto s = standalone(fluid);
            std::mt19937_64 rng(6);
            randomize(s.grid->pdf, rng);
            auto p = trt_params(forced);
            p.kind = kind;
            if (kind == CollisionKind::srt) p.lambda_o = p.lambda_e = p.omega;
            std::vector<Pdfs> before(s.grid->pdf.cells());
            for (std::size_t c = 0; c < before.size(); ++c) before[c] = s.grid->pdf.get(c);
            collide(*s.grid, p);
            for_each_cell(s.grid->interior, [&](const Int3& x) {
                const std::size_t c = s.grid->pdf.index(x);
                const Pdfs ref = kind == CollisionKind::srt
                                     ? collide_srt(before[c], p.omega, forced ? &p.force : nullptr)
                                     : collide_trt(before[c], p.lambda_e, p.lambda_o, forced ? &p.force : nullptr);
                for (int a = 0; a < Q; ++a) ASSERT_NEAR(s.grid->pdf.at(a, c), ref[a], 1e-15);
            });
            // ghost layers are never collided
            const std::size_t ghost = s.grid->pdf.index(Int3{-1, 2, 2});
            for (int a = 0; a < Q; ++a) EXPECT_EQ(s.grid->pdf.at(a, ghost), before[ghost][a]);
        }
    }
}

TEST(Kernels, FusedEqualsSplit) {
    auto walls = [](const Vec3& p) {
        if (p[1] < 0.2) return CellClass{CellType::noslip, {}};
        if (p[1] > 0.85) return CellClass{CellType::velocity, {0.03, 0, 0.01}};
        return CellClass{CellType::fluid, {}};
    };
    for (bool forced : {false, true}) {
        auto a = standalone(walls), b = standalone(walls);
        std::mt19937_64 rng(7);
        randomize(a.grid->pdf, rng);
        std::copy(a.grid->pdf.src(), a.grid->pdf.src() + a.grid->pdf.cells() * Q, b.grid->pdf.src());
        const auto p = trt_params(forced);
        stream(*a.grid);
        collide(*a.grid, p);
        fused_stream_collide(*b.grid, p);
        for_each_cell(a.grid->interior, [&](const Int3& x) {
            const std::size_t c = a.grid->pdf.index(x);
            if (!a.grid->flags.is_fluid(c)) return;
            for (int k = 0; k < Q; ++k) ASSERT_NEAR(a.grid->pdf.at(k, c), b.grid->pdf.at(k, c), 1e-14);
        });
    }
}

TEST(Kernels, EquilibriumIsSteadyUnderBothPaths) {
    auto a = standalone(fluid), b = standalone(fluid);
    const auto eq = equilibrium(1.0, {0.02, 0.01, -0.01});
    a.grid->pdf.fill(eq);
    b.grid->pdf.fill(eq);
    const auto p = trt_params(false);
    for (int step = 0; step < 3; ++step) {
        collide(*a.grid, p);
        stream(*a.grid);
        fused_stream_collide(*b.grid, p);
    }
    for_each_cell(a.grid->interior, [&](const Int3& x) {
        for (int k = 0; k < Q; ++k) {
            ASSERT_NEAR(a.grid->pdf.at(k, x), eq[k], 1e-15);
            ASSERT_NEAR(b.grid->pdf.at(k, x), eq[k], 1e-15);
        }
    });
}

TEST(Kernels, CountersTrackPasses) {
    auto s = standalone(fluid);
    const auto p = trt_params(false);
    collide(*s.grid, p);
    stream(*s.grid);
    fused_stream_collide(*s.grid, p);
    EXPECT_EQ(s.grid->counters.collide, 1u);
    EXPECT_EQ(s.grid->counters.stream, 1u);
    EXPECT_EQ(s.grid->counters.fused, 1u);
}

TEST(Moments, ReportedVelocityIncludesHalfForce) {
    auto s = standalone(fluid);
    const auto p = trt_params(true);
    const auto m = cell_moments(*s.grid, s.grid->pdf.index(Int3{1, 1, 1}), p);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(m.u[i], 0.5 * p.accel[i], 1e-18);
}

TEST(Setup, StreamRegionGrowsOnlyNextToCoarserBlocks) {
    ForestGeometry g;
    g.root_dims = {2, 1, 1};
    g.domain.hi = Vec3{2, 1, 1};
    g.cells_per_block = {8, 8, 8};
    const auto f = build_setup_forest(g, [](const BlockInfo& b) { return b.coords[0] == 1; }, nullptr, 1);
    const auto view = make_local_forest(f, 0);
    for (const Block& b : view.local_blocks) {
        BlockGrid grid;
        init_block_grid(grid, g, b, fluid);
        const bool coarser = b.level == 1 && b.coords[0] == 2;
        EXPECT_EQ(grid.iface.has_coarser_neighbor, coarser);
        EXPECT_EQ(grid.stream_region.size(0), coarser ? 12 : 8);
    }
}
