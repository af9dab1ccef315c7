#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "octoflow/core.hpp"

namespace octoflow {

inline constexpr int Q = 19;

using Pdfs = std::array<double, Q>;

//! D3Q19 velocity set. Rest first, then the 6 axis directions, then the 12 edge diagonals.
//! Opposite directions sit next to each other.
struct D3Q19 {
    static constexpr std::array<std::array<int, 3>, Q> e = {{
        {0, 0, 0},
        {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1},
        {1, 1, 0}, {-1, -1, 0}, {1, -1, 0}, {-1, 1, 0},
        {1, 0, 1}, {-1, 0, -1}, {1, 0, -1}, {-1, 0, 1},
        {0, 1, 1}, {0, -1, -1}, {0, 1, -1}, {0, -1, 1},
    }};

    static constexpr std::array<double, Q> w = {
        1.0 / 3,
        1.0 / 18, 1.0 / 18, 1.0 / 18, 1.0 / 18, 1.0 / 18, 1.0 / 18,
        1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36,
        1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36,
    };

    static constexpr std::array<int, Q> inverse = {
        0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17,
    };

    static constexpr double cs2 = 1.0 / 3.0;

    static constexpr double edot(int a, const Vec3& u) {
        return e[a][0] * u[0] + e[a][1] * u[1] + e[a][2] * u[2];
    }
};

using VelocitySet = D3Q19;

//! Incompressible equilibrium with c = 1.
inline Pdfs equilibrium(double rho, const Vec3& u, double rho0 = 1.0) {
    Pdfs f;
    const double usq = dot(u, u);
    for (int a = 0; a < Q; ++a) {
        const double eu = D3Q19::edot(a, u);
        f[a] = D3Q19::w[a] * (rho + rho0 * (3.0 * eu + 4.5 * eu * eu - 1.5 * usq));
    }
    return f;
}

struct Moments {
    double rho;
    Vec3 u;
};

//! Density and velocity. With a force, adds dt*F/(2 rho0); use that only for reporting.
inline Moments macroscopic(const Pdfs& f, double rho0 = 1.0,
                           std::optional<Vec3> force = std::nullopt, double dt = 1.0) {
    double rho = 0;
    Vec3 j{0, 0, 0};
    for (int a = 0; a < Q; ++a) {
        rho += f[a];
        for (int i = 0; i < 3; ++i) j[i] += D3Q19::e[a][i] * f[a];
    }
    Vec3 u = j * (1.0 / rho0);
    if (force) u += *force * (dt / (2.0 * rho0));
    return {rho, u};
}

//! Discrete forcing term F_a = w_a rho0 (e_a . a) / cs^2.
inline Pdfs force_term(const Vec3& accel, double rho0 = 1.0) {
    Pdfs F;
    for (int a = 0; a < Q; ++a) F[a] = D3Q19::w[a] * rho0 * D3Q19::edot(a, accel) / D3Q19::cs2;
    return F;
}

inline Pdfs collide_srt(const Pdfs& f, double omega, const Pdfs* force = nullptr,
                        double dt = 1.0, double rho0 = 1.0) {
    const auto m = macroscopic(f, rho0);
    const auto feq = equilibrium(m.rho, m.u, rho0);
    Pdfs out;
    for (int a = 0; a < Q; ++a) {
        out[a] = f[a] - omega * (f[a] - feq[a]);
        if (force) out[a] += dt * (*force)[a];
    }
    return out;
}

//! Two-relaxation-time collision, evaluated pairwise on (a, inverse(a)).
inline Pdfs collide_trt(const Pdfs& f, double lambda_e, double lambda_o,
                        const Pdfs* force = nullptr, double dt = 1.0, double rho0 = 1.0) {
    double rho = 0, jx = 0, jy = 0, jz = 0;
    for (int a = 0; a < Q; ++a) {
        rho += f[a];
        jx += D3Q19::e[a][0] * f[a];
        jy += D3Q19::e[a][1] * f[a];
        jz += D3Q19::e[a][2] * f[a];
    }
    const double ux = jx / rho0, uy = jy / rho0, uz = jz / rho0;
    const double usq = 1.5 * (ux * ux + uy * uy + uz * uz);
    Pdfs out;
    out[0] = f[0] - lambda_e * (f[0] - D3Q19::w[0] * (rho - rho0 * usq));
    for (int a = 1; a < Q; a += 2) {
        const int b = a + 1;
        const double eu = D3Q19::e[a][0] * ux + D3Q19::e[a][1] * uy + D3Q19::e[a][2] * uz;
        const double eq_even = D3Q19::w[a] * (rho + rho0 * (4.5 * eu * eu - usq));
        const double eq_odd = D3Q19::w[a] * rho0 * 3.0 * eu;
        const double even = lambda_e * (0.5 * (f[a] + f[b]) - eq_even);
        const double odd = lambda_o * (0.5 * (f[a] - f[b]) - eq_odd);
        out[a] = f[a] - even - odd;
        out[b] = f[b] - even + odd;
    }
    if (force)
        for (int a = 0; a < Q; ++a) out[a] += dt * (*force)[a];
    return out;
}

inline void require_relaxation_range(double omega, const char* what) {
    if (!(omega > 0.0 && omega < 2.0))
        throw Error(std::string(what) + " = " + std::to_string(omega) + " is outside (0,2)");
}

//! omega = 2 c^2 dt / (6 nu + c^2 dt) with c = dx/dt.
inline double omega_from_viscosity(double nu, double dx = 1.0, double dt = 1.0) {
    if (!(nu > 0.0)) throw Error("viscosity must be positive");
    const double c2 = (dx / dt) * (dx / dt);
    const double omega = 2.0 * c2 * dt / (6.0 * nu + c2 * dt);
    require_relaxation_range(omega, "omega");
    return omega;
}

inline double viscosity_from_omega(double omega, double dx = 1.0, double dt = 1.0) {
    require_relaxation_range(omega, "omega");
    const double c2 = (dx / dt) * (dx / dt);
    return c2 * dt * (1.0 / omega - 0.5) / 3.0;
}

inline double scale_omega(double omega_k, int k, int l) {
    require_relaxation_range(omega_k, "omega");
    if (k == l) return omega_k;
    const double pk = std::ldexp(1.0, k);
    const double pl = std::ldexp(1.0, l);
    const double omega_l = 2.0 * pk * omega_k / (2.0 * pl + (pk - pl) * omega_k);
    require_relaxation_range(omega_l, "scaled omega");
    return omega_l;
}

inline double magic_parameter(double lambda_e, double lambda_o) {
    return (1.0 / lambda_e - 0.5) * (1.0 / lambda_o - 0.5);
}

inline double lambda_odd(double lambda_e, double lambda_eo) {
    require_relaxation_range(lambda_e, "lambda_e");
    const double den = 2.0 + (4.0 * lambda_eo - 1.0) * lambda_e;
    if (den == 0.0) throw Error("lambda_odd: vanishing denominator");
    const double lo = (4.0 - 2.0 * lambda_e) / den;
    require_relaxation_range(lo, "lambda_o");
    return lo;
}

inline Vec3 scale_acceleration(const Vec3& a_k, int k, int l) {
    return a_k * std::ldexp(1.0, k - l);
}

enum class CollisionKind { srt, trt };

struct RelaxationConfig {
    double nu = 1.0 / 6.0;
    double omega_0 = 1.0;
    double lambda_eo = 3.0 / 16.0;
    CollisionKind collision_kind = CollisionKind::trt;

    static RelaxationConfig from_viscosity(double nu, CollisionKind kind = CollisionKind::trt,
                                           double lambda_eo = 3.0 / 16.0) {
        return {nu, omega_from_viscosity(nu), lambda_eo, kind};
    }
};

struct ForceConfig {
    Vec3 acceleration_0{0, 0, 0};
    double rho_0 = 1.0;
};

} // namespace octoflow
