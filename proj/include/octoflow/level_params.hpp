#pragma once

#include <cmath>
#include <vector>

#include "octoflow/lattice_model.hpp"

namespace octoflow {

//! Relaxation and forcing on one grid level, in that level's lattice units.
struct LevelParams {
    int level = 0;
    CollisionKind kind = CollisionKind::trt;
    double omega = 1.0;    //!< SRT rate
    double lambda_e = 1.0; //!< TRT even rate
    double lambda_o = 1.0; //!< TRT odd rate
    double rho0 = 1.0;
    Vec3 accel{0, 0, 0};
    Pdfs force{};
    bool has_force = false;
    double dt = 1.0; //!< 2^-L in level-0 units
    double dx = 1.0; //!< 2^-L in level-0 units
};

inline LevelParams make_level_params(const RelaxationConfig& relax, const ForceConfig& force, int level) {
    LevelParams p;
    p.level = level;
    p.kind = relax.collision_kind;
    p.omega = scale_omega(relax.omega_0, 0, level);
    p.lambda_e = p.omega;
    p.lambda_o = relax.collision_kind == CollisionKind::trt ? lambda_odd(p.lambda_e, relax.lambda_eo) : p.omega;
    p.rho0 = force.rho_0;
    p.accel = scale_acceleration(force.acceleration_0, 0, level);
    p.force = force_term(p.accel, force.rho_0);
    p.has_force = p.accel[0] != 0 || p.accel[1] != 0 || p.accel[2] != 0;
    p.dt = std::ldexp(1.0, -level);
    p.dx = p.dt;
    return p;
}

inline std::vector<LevelParams> make_all_level_params(const RelaxationConfig& relax, const ForceConfig& force,
                                                      int finest_level) {
    std::vector<LevelParams> v;
    for (int l = 0; l <= finest_level; ++l) v.push_back(make_level_params(relax, force, l));
    return v;
}

} // namespace octoflow
