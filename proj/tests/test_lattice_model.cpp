#include <gtest/gtest.h>

#include <random>

#include "octoflow/lattice_model.hpp"

using namespace octoflow;

namespace {

Pdfs random_pdfs(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    Pdfs f;
    for (int a = 0; a < Q; ++a) f[a] = D3Q19::w[a] * (1.0 + jitter(rng) * 10);
    return f;
}

// Scalar textbook form, written independently of the library.
Pdfs srt_oracle(const Pdfs& f, double omega) {
    double rho = 0, u[3] = {0, 0, 0};
    for (int a = 0; a < Q; ++a) {
        rho += f[a];
        for (int i = 0; i < 3; ++i) u[i] += D3Q19::e[a][i] * f[a];
    }
    Pdfs out;
    for (int a = 0; a < Q; ++a) {
        double eu = 0, uu = 0;
        for (int i = 0; i < 3; ++i) {
            eu += D3Q19::e[a][i] * u[i];
            uu += u[i] * u[i];
        }
        const double feq = D3Q19::w[a] * (rho + 3 * eu + 4.5 * eu * eu - 1.5 * uu);
        out[a] = f[a] - omega * (f[a] - feq);
    }
    return out;
}

Pdfs trt_oracle(const Pdfs& f, double le, double lo) {
    double rho = 0, u[3] = {0, 0, 0};
    for (int a = 0; a < Q; ++a) {
        rho += f[a];
        for (int i = 0; i < 3; ++i) u[i] += D3Q19::e[a][i] * f[a];
    }
    Pdfs feq;
    for (int a = 0; a < Q; ++a) {
        double eu = 0, uu = 0;
        for (int i = 0; i < 3; ++i) {
            eu += D3Q19::e[a][i] * u[i];
            uu += u[i] * u[i];
        }
        feq[a] = D3Q19::w[a] * (rho + 3 * eu + 4.5 * eu * eu - 1.5 * uu);
    }
    Pdfs out;
    for (int a = 0; a < Q; ++a) {
        // inverse found by search rather than the table
        int b = 0;
        for (int k = 0; k < Q; ++k)
            if (D3Q19::e[k][0] == -D3Q19::e[a][0] && D3Q19::e[k][1] == -D3Q19::e[a][1] &&
                D3Q19::e[k][2] == -D3Q19::e[a][2])
                b = k;
        const double fp = 0.5 * (f[a] + f[b]), fm = 0.5 * (f[a] - f[b]);
        const double ep = 0.5 * (feq[a] + feq[b]), em = 0.5 * (feq[a] - feq[b]);
        out[a] = f[a] - le * (fp - ep) - lo * (fm - em);
    }
    return out;
}

} // namespace

TEST(VelocitySet, MomentConditions) {
    double s = 0, m[3] = {0, 0, 0}, t[3][3] = {};
    int rest = 0, axis = 0, diag = 0;
    for (int a = 0; a < Q; ++a) {
        s += D3Q19::w[a];
        int n2 = 0;
        for (int i = 0; i < 3; ++i) {
            m[i] += D3Q19::w[a] * D3Q19::e[a][i];
            n2 += D3Q19::e[a][i] * D3Q19::e[a][i];
            for (int j = 0; j < 3; ++j) t[i][j] += D3Q19::w[a] * D3Q19::e[a][i] * D3Q19::e[a][j];
        }
        rest += n2 == 0;
        axis += n2 == 1;
        diag += n2 == 2;
        EXPECT_EQ(D3Q19::inverse[D3Q19::inverse[a]], a);
        for (int i = 0; i < 3; ++i) EXPECT_EQ(D3Q19::e[D3Q19::inverse[a]][i], -D3Q19::e[a][i]);
    }
    EXPECT_EQ(rest, 1);
    EXPECT_EQ(axis, 6);
    EXPECT_EQ(diag, 12);
    EXPECT_NEAR(s, 1.0, 1e-15);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(m[i], 0.0, 1e-15);
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(t[i][j], i == j ? 1.0 / 3 : 0.0, 1e-15);
    }
}

TEST(VelocitySet, WeightsSolveTheMomentEquations) {
    // w0 + 6 w1 + 12 w2 = 1, 2 w1 + 8 w2 = 1/3 and isotropy sum w ex^4 = 3 sum w ex^2 ey^2 (2 w1 + 8 w2 = 12 w2)
    const double w2 = (1.0 / 3) / 12;
    const double w1 = (1.0 / 3 - 8 * w2) / 2;
    const double w0 = 1 - 6 * w1 - 12 * w2;
    EXPECT_NEAR(D3Q19::w[0], w0, 4e-16);
    for (int a = 1; a < 7; ++a) EXPECT_NEAR(D3Q19::w[a], w1, 1e-16);
    for (int a = 7; a < Q; ++a) EXPECT_NEAR(D3Q19::w[a], w2, 1e-16);
}

TEST(Equilibrium, RestStateEqualsWeights) {
    const auto f = equilibrium(1.0, {0, 0, 0});
    for (int a = 0; a < Q; ++a) EXPECT_DOUBLE_EQ(f[a], D3Q19::w[a]);
    const auto z = equilibrium(0.0, {0, 0, 0});
    for (int a = 0; a < Q; ++a) EXPECT_EQ(z[a], 0.0);
}

TEST(Equilibrium, HandEvaluatedValues) {
    const auto f = equilibrium(1.0, {0.1, 0, 0});
    EXPECT_NEAR(f[0], (1.0 / 3) * (1 - 1.5 * 0.01), 1e-16);
    EXPECT_NEAR(f[0], 0.32833333333333333, 1e-15);
    // east: (1/18)(1 + 0.3 + 0.045 - 0.015)
    EXPECT_NEAR(f[1], (1.0 / 18) * (1 + 0.3 + 4.5 * 0.01 - 0.015), 1e-16);
    EXPECT_NEAR(f[2], (1.0 / 18) * (1 - 0.3 + 4.5 * 0.01 - 0.015), 1e-16);
    // north: no e.u term
    EXPECT_NEAR(f[3], (1.0 / 18) * (1 - 0.015), 1e-16);
}

TEST(Equilibrium, MomentsRoundTrip) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-0.05, 0.05);
    for (int k = 0; k < 100; ++k) {
        const double rho = 1 + d(rng);
        const Vec3 u{d(rng), d(rng), d(rng)};
        const auto m = macroscopic(equilibrium(rho, u));
        EXPECT_NEAR(m.rho, rho, 1e-13);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(m.u[i], u[i], 1e-13);
    }
}

TEST(Macroscopic, Examples) {
    Pdfs w;
    for (int a = 0; a < Q; ++a) w[a] = D3Q19::w[a];
    auto m = macroscopic(w);
    EXPECT_NEAR(m.rho, 1.0, 1e-15);
    EXPECT_NEAR(norm(m.u), 0.0, 1e-16);
    m = macroscopic(w, 1.0, Vec3{2, 0, 0}, 1.0);
    EXPECT_NEAR(m.u[0], 1.0, 1e-15);

    Pdfs f = w;
    f[1] = 0.1;
    f[2] = 0.05;
    double rho = 0, jx = 0, jy = 0, jz = 0;
    for (int a = 0; a < Q; ++a) {
        rho += f[a];
        jx += D3Q19::e[a][0] * f[a];
        jy += D3Q19::e[a][1] * f[a];
        jz += D3Q19::e[a][2] * f[a];
    }
    m = macroscopic(f);
    EXPECT_DOUBLE_EQ(m.rho, rho);
    EXPECT_NEAR(m.u[0], jx, 1e-16);
    EXPECT_NEAR(m.u[0], 0.05, 1e-16);
    EXPECT_NEAR(m.u[1], jy, 1e-16);
    EXPECT_NEAR(m.u[2], jz, 1e-16);
}

TEST(Collision, EquilibriumIsFixedPoint) {
    const auto feq = equilibrium(1.0, {0.05, 0, 0});
    for (double omega : {0.3, 1.0, 1.7}) {
        const auto s = collide_srt(feq, omega);
        const auto t = collide_trt(feq, omega, 2 - omega);
        for (int a = 0; a < Q; ++a) {
            EXPECT_NEAR(s[a], feq[a], 4e-16);
            EXPECT_NEAR(t[a], feq[a], 4e-16);
        }
    }
}

TEST(Collision, FullRelaxationGivesEquilibrium) {
    std::mt19937_64 rng(5);
    const auto f = random_pdfs(rng);
    const auto m = macroscopic(f);
    const auto feq = equilibrium(m.rho, m.u);
    const auto out = collide_srt(f, 1.0);
    for (int a = 0; a < Q; ++a) EXPECT_NEAR(out[a], feq[a], 1e-16);
}

TEST(Collision, MatchesScalarOracles) {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 50; ++k) {
        const auto f = random_pdfs(rng);
        const auto s = collide_srt(f, 1.6);
        const auto so = srt_oracle(f, 1.6);
        const auto t = collide_trt(f, 1.2, 0.8);
        const auto to = trt_oracle(f, 1.2, 0.8);
        for (int a = 0; a < Q; ++a) {
            EXPECT_NEAR(s[a], so[a], 1e-15);
            EXPECT_NEAR(t[a], to[a], 1e-15);
        }
    }
}

TEST(Collision, TrtWithEqualRatesIsSrt) {
    std::mt19937_64 rng(11);
    const Pdfs F = force_term({1e-4, -2e-5, 3e-5});
    for (int k = 0; k < 50; ++k) {
        const auto f = random_pdfs(rng);
        for (double omega : {0.5, 1.0, 1.9}) {
            const auto s = collide_srt(f, omega, &F);
            const auto t = collide_trt(f, omega, omega, &F);
            for (int a = 0; a < Q; ++a) EXPECT_NEAR(s[a], t[a], 1e-14);
        }
    }
}

TEST(Collision, ConservesMassAndMomentum) {
    std::mt19937_64 rng(13);
    const Vec3 accel{1e-4, 2e-5, 0};
    const Pdfs F = force_term(accel);
    for (int k = 0; k < 50; ++k) {
        const auto f = random_pdfs(rng);
        const auto m = macroscopic(f);
        for (const auto& out : {collide_srt(f, 1.3), collide_trt(f, 1.3, 0.7)}) {
            const auto n = macroscopic(out);
            EXPECT_NEAR(n.rho, m.rho, 1e-13);
            for (int i = 0; i < 3; ++i) EXPECT_NEAR(n.u[i], m.u[i], 1e-13);
        }
        const auto forced = collide_trt(f, 1.3, 0.7, &F);
        const auto n = macroscopic(forced);
        EXPECT_NEAR(n.rho, m.rho, 1e-13);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(n.u[i], m.u[i] + accel[i], 1e-13);
    }
}

TEST(ForceTerm, Examples) {
    const auto zero = force_term({0, 0, 0});
    for (double v : zero) EXPECT_EQ(v, 0.0);
    const auto F = force_term({1e-4, 0, 0});
    EXPECT_NEAR(F[1], (1.0 / 18) * 3 * 1e-4, 1e-20);
    EXPECT_NEAR(F[1], 1.6666666666666667e-5, 1e-19);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int k = 0; k < 20; ++k) {
        const auto G = force_term({d(rng), d(rng), d(rng)});
        double s = 0;
        for (double v : G) s += v;
        EXPECT_NEAR(s, 0.0, 1e-15);
    }
}

TEST(Viscosity, Examples) {
    EXPECT_NEAR(omega_from_viscosity(1.0 / 6), 1.0, 1e-15);
    EXPECT_THROW(omega_from_viscosity(0.0), Error);
    EXPECT_THROW(viscosity_from_omega(2.0), Error);
    EXPECT_NEAR(omega_from_viscosity(viscosity_from_omega(1.91)), 1.91, 1e-14);
}

TEST(ScaleOmega, Examples) {
    EXPECT_EQ(scale_omega(1.3, 2, 2), 1.3);
    EXPECT_NEAR(scale_omega(1.8, 0, 1), 2 * 1.8 / (4 - 1.8), 1e-15);
    EXPECT_NEAR(scale_omega(1.8, 0, 1), 1.6363636363636365, 1e-15);
    for (double w : {0.4, 1.0, 1.5, 1.95}) {
        EXPECT_NEAR(scale_omega(w, 0, 2), scale_omega(scale_omega(w, 0, 1), 1, 2), 1e-14);
        EXPECT_NEAR(scale_omega(scale_omega(w, 0, 3), 3, 0), w, 1e-14);
    }
    // the viscosity in level-0 units stays fixed: nu_L = (1/omega_L - 1/2)/3 * dx_L^2/dt_L
    const double w0 = 1.7;
    for (int l = 0; l < 4; ++l) {
        const double dx = std::ldexp(1.0, -l);
        EXPECT_NEAR(viscosity_from_omega(scale_omega(w0, 0, l), dx, dx), viscosity_from_omega(w0), 1e-13);
    }
}

TEST(LambdaOdd, Examples) {
    // (4 - 2) / (2 + (3/4 - 1)) = 2 / 1.75
    EXPECT_NEAR(lambda_odd(1.0, 3.0 / 16), 8.0 / 7.0, 1e-15);
    EXPECT_NEAR(lambda_odd(1.0, 0.25), 1.0, 1e-15);
    for (double le : {0.2, 0.9, 1.4, 1.8}) EXPECT_NEAR(magic_parameter(le, lambda_odd(le, 3.0 / 16)), 3.0 / 16, 1e-12);
}

TEST(ScaleAcceleration, Examples) {
    const Vec3 a{1e-4, 0, 0};
    EXPECT_EQ(scale_acceleration(a, 1, 1)[0], 1e-4);
    EXPECT_NEAR(scale_acceleration(a, 0, 2)[0], 2.5e-5, 1e-20);
    EXPECT_EQ(scale_acceleration(scale_acceleration(a, 0, 3), 3, 0)[0], a[0]);
}
