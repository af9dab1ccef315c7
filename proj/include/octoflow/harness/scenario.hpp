#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include "octoflow/block_forest.hpp"
#include "octoflow/grid_data.hpp"
#include "octoflow/harness/config.hpp"
#include "octoflow/load_balance.hpp"

namespace octoflow::harness {

//! Normalized analytic profile (maximum 1) continued beyond the walls. Plane: u_x = 4 y (1 - y).
//! Pipe of unit diameter along x centered at (y, z) = (1/2, 1/2): u_x = 1 - (2 r)^2.
inline Vec3 analytic_profile(ScenarioKind kind, const Vec3& p) {
    switch (kind) {
    case ScenarioKind::plane_poiseuille: return {4.0 * p[1] * (1.0 - p[1]), 0, 0};
    case ScenarioKind::pipe_poiseuille: {
        const double dy = p[1] - 0.5, dz = p[2] - 0.5;
        return {1.0 - 4.0 * (dy * dy + dz * dz), 0, 0};
    }
    default: throw Error("analytic_velocity: scenario has no analytic solution");
    }
}

//! The analytic profile inside the fluid region; rejects points outside it.
inline Vec3 analytic_velocity(ScenarioKind kind, const Vec3& p) {
    if (kind == ScenarioKind::plane_poiseuille && (p[1] < 0 || p[1] > 1))
        throw Error("analytic_velocity: point outside the channel");
    if (kind == ScenarioKind::pipe_poiseuille) {
        const double dy = p[1] - 0.5, dz = p[2] - 0.5;
        if (dy * dy + dz * dz > 0.25) throw Error("analytic_velocity: point outside the pipe");
    }
    return analytic_profile(kind, p);
}

//! Everything needed to build a solver for one configuration.
struct Scenario {
    ScenarioConfig config;
    ForestGeometry geometry;
    GeometryFn cells;
    BlockPredicate refine;
    BlockPredicate exclude;
    int max_level = 0;
    RelaxationConfig relax;
    ForceConfig force;
    double diameter_cells = 0; //!< channel height or pipe diameter in level-0 cells
    double u_ref = 1;          //!< lattice velocity that normalizes to 1
    double area = 0;           //!< cross-section area used for the flow rate (0: none)
    double flow_rate_ref = 0;  //!< analytic normalized flow rate

    bool has_analytic() const {
        return config.scenario == ScenarioKind::plane_poiseuille || config.scenario == ScenarioKind::pipe_poiseuille;
    }
    //! Reference for a fluid cell. Fine cells next to a refinement interface take the fluid class of
    //! their coarse parent, so a few fluid cell centers lie just beyond the pipe wall; they are
    //! compared against the continued profile.
    Vec3 analytic(const Vec3& p) const { return analytic_profile(config.scenario, p); }
};

namespace detail {

constexpr double eps = 1e-12;

inline double axis_distance_min(const AABB& b) {
    // smallest distance of the box to the pipe axis (y, z) = (1/2, 1/2)
    double s = 0;
    for (int i = 1; i < 3; ++i) {
        const double d = std::max({b.lo[i] - 0.5, 0.5 - b.hi[i], 0.0});
        s += d * d;
    }
    return std::sqrt(s);
}

inline double axis_distance_max(const AABB& b) {
    double s = 0;
    for (int i = 1; i < 3; ++i) {
        const double d = std::max(std::abs(b.lo[i] - 0.5), std::abs(b.hi[i] - 0.5));
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace detail

inline Scenario make_scenario(const ScenarioConfig& c) {
    Scenario s;
    s.config = c;
    auto& g = s.geometry;
    g.root_dims = c.root_dims;
    g.cells_per_block = {c.cells_per_block, c.cells_per_block, c.cells_per_block};
    // cubic cells; the y extent is 1
    const double h = 1.0 / c.root_dims[1];
    g.domain = AABB{{0, 0, 0}, {c.root_dims[0] * h, 1.0, c.root_dims[2] * h}};
    s.max_level = c.region == RegionKind::none ? 0 : c.level;
    const int level = s.max_level;
    const double diameter = double(c.root_dims[1]) * c.cells_per_block;
    s.diameter_cells = diameter;

    auto global = [](const BlockInfo&) { return true; };

    switch (c.scenario) {
    case ScenarioKind::plane_poiseuille: {
        g.periodic = {true, false, true};
        s.cells = [](const Vec3& p) {
            return CellClass{(p[1] < 0 || p[1] > 1) ? CellType::noslip : CellType::fluid, {}};
        };
        const WallSide walls = c.walls;
        switch (c.region) {
        case RegionKind::none: break;
        case RegionKind::global: s.refine = global; break;
        case RegionKind::near_wall:
            s.refine = [walls](const BlockInfo& b) {
                const bool bottom = b.aabb.lo[1] <= detail::eps, top = b.aabb.hi[1] >= 1 - detail::eps;
                return (walls != WallSide::top && bottom) || (walls != WallSide::bottom && top);
            };
            break;
        case RegionKind::center:
            s.refine = [](const BlockInfo& b) { return b.aabb.lo[1] <= 0.5 + detail::eps && b.aabb.hi[1] >= 0.5 - detail::eps; };
            break;
        default: throw ConfigError("plane_poiseuille supports refinement regions none, near_wall, center, global");
        }
        const double nu = viscosity_of(c, diameter);
        s.relax = RelaxationConfig::from_viscosity(nu, c.collision, c.lambda_eo);
        // u_max = a H^2 / (8 nu)
        s.force.acceleration_0 = Vec3{8.0 * nu * c.u_max / (diameter * diameter), 0, 0};
        s.u_ref = c.u_max;
        s.area = 1.0;
        s.flow_rate_ref = 2.0 / 3.0;
        break;
    }
    case ScenarioKind::pipe_poiseuille: {
        if (c.root_dims[1] != c.root_dims[2]) throw ConfigError("pipe_poiseuille needs a square cross-section (root_dims y == z)");
        g.periodic = {true, false, false};
        s.cells = [](const Vec3& p) {
            const double dy = p[1] - 0.5, dz = p[2] - 0.5;
            return CellClass{dy * dy + dz * dz < 0.25 ? CellType::fluid : CellType::noslip, {}};
        };
        switch (c.region) {
        case RegionKind::none: break;
        case RegionKind::global: s.refine = global; break;
        case RegionKind::near_wall:
            s.refine = [](const BlockInfo& b) {
                return detail::axis_distance_min(b.aabb) <= 0.5 && detail::axis_distance_max(b.aabb) >= 0.5;
            };
            break;
        case RegionKind::center:
            s.refine = [](const BlockInfo& b) { return detail::axis_distance_max(b.aabb) < 0.5; };
            break;
        default: throw ConfigError("pipe_poiseuille supports refinement regions none, near_wall, center, global");
        }
        s.exclude = [](const BlockInfo& b) { return detail::axis_distance_min(b.aabb) >= 0.5; };
        const double nu = viscosity_of(c, diameter);
        s.relax = RelaxationConfig::from_viscosity(nu, c.collision, c.lambda_eo);
        // u_max = a R^2 / (4 nu)
        const double radius = diameter / 2;
        s.force.acceleration_0 = Vec3{4.0 * nu * c.u_max / (radius * radius), 0, 0};
        s.u_ref = c.u_max;
        s.area = std::numbers::pi / 4;
        s.flow_rate_ref = std::numbers::pi / 8;
        break;
    }
    case ScenarioKind::lid_cavity: {
        g.periodic = {false, false, false};
        const double ex = g.domain.hi[0], ey = g.domain.hi[1], ez = g.domain.hi[2];
        const Vec3 lid{c.lid_velocity, 0, 0};
        s.cells = [=](const Vec3& p) {
            const bool inside_xy = p[0] > 0 && p[0] < ex && p[1] > 0 && p[1] < ey;
            if (inside_xy && p[2] > 0 && p[2] < ez) return CellClass{CellType::fluid, {}};
            if (inside_xy && p[2] > ez) return CellClass{CellType::velocity, lid};
            return CellClass{CellType::noslip, {}};
        };
        switch (c.region) {
        case RegionKind::none: break;
        case RegionKind::global: s.refine = global; break;
        case RegionKind::lid_edges:
            // where the lid meets the walls x = 0 and x = 1
            s.refine = [=](const BlockInfo& b) {
                return b.aabb.hi[2] >= ez - detail::eps && (b.aabb.lo[0] <= detail::eps || b.aabb.hi[0] >= ex - detail::eps);
            };
            break;
        default: throw ConfigError("lid_cavity supports refinement regions none, lid_edges, global");
        }
        // Re refers to the lid speed and the cavity height
        const double nu = c.lid_velocity * double(c.root_dims[2]) * c.cells_per_block / c.reynolds;
        s.relax = RelaxationConfig::from_viscosity(nu, c.collision, c.lambda_eo);
        s.u_ref = c.lid_velocity;
        s.diameter_cells = double(c.root_dims[2]) * c.cells_per_block;
        break;
    }
    case ScenarioKind::custom: throw ConfigError("custom scenarios are built programmatically");
    }
    (void)level;
    return s;
}

//! Refined, balanced and partitioned block forest of a scenario.
inline SetupForest build_forest(const Scenario& s) {
    SetupForest forest = build_setup_forest(s.geometry, s.refine, s.exclude, s.max_level);
    if (s.max_level > 0 && forest.max_level() < s.max_level)
        throw ConfigError("refinement region selects no block");
    level_wise_balance(forest, s.config.ranks, s.config.curve).apply(forest);
    return forest;
}

} // namespace octoflow::harness
