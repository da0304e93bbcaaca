#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include <ampsim/gaussian_channel.hpp>
#include <ampsim/rng.hpp>
#include <ampsim/sde.hpp>

using namespace ampsim;

TEST_CASE("amplitude gain follows the exponential drift law") {
    REQUIRE(gain_of({0.5, 0.0, 2.0}) == Catch::Approx(std::exp(-1.0)).margin(1e-15));
    REQUIRE(gain_of({-0.3, 0.0, 1.0}) == Catch::Approx(std::exp(0.3)).margin(1e-15));
    REQUIRE(gain_of({1.0, 0.0, 0.0}) == 1.0);
    REQUIRE_THROWS_AS(gain_of({1.0, 0.0, -1.0}), std::invalid_argument);
}

TEST_CASE("two-dimensional propagator relaxes to the stationary variance") {
    GaussianState g{{2.0, 1.0}, 0.1, 2, 0.0};
    const LinearChannelParams p{0.8, 0.2, 50.0};
    auto out = fpe_propagate(g, p);
    REQUIRE(std::abs(out.mean) < 1e-12);
    REQUIRE(out.variance == Catch::Approx(p.diffusion / p.drift_q).epsilon(1e-12));
}

TEST_CASE("propagators obey the semigroup property") {
    GaussianState g{{1.0, -0.5}, 0.4, 2, 0.0};
    const double q = 0.6, d = 0.15;
    auto direct = fpe_propagate(g, {q, d, 0.9});
    auto stepped = fpe_propagate(fpe_propagate(g, {q, d, 0.4}), {q, d, 0.5});
    REQUIRE(stepped.mean.real() == Catch::Approx(direct.mean.real()).margin(1e-13));
    REQUIRE(stepped.mean.imag() == Catch::Approx(direct.mean.imag()).margin(1e-13));
    REQUIRE(stepped.variance == Catch::Approx(direct.variance).margin(1e-13));

    GaussianState g1{{1.0, 0.0}, 0.2, 1, 0.0};
    auto d1 = ou_propagate(g1, {q, d, 0.9});
    auto s1 = ou_propagate(ou_propagate(g1, {q, d, 0.4}), {q, d, 0.5});
    REQUIRE(s1.variance == Catch::Approx(d1.variance).margin(1e-13));
}

TEST_CASE("zero-drift propagation is pure diffusion") {
    GaussianState g{{1.0, 1.0}, 0.3, 2, 0.0};
    auto out = fpe_propagate(g, {0.0, 0.25, 2.0});
    REQUIRE(out.mean == g.mean);
    REQUIRE(out.variance == Catch::Approx(0.3 + 2.0 * 0.25 * 2.0).margin(1e-15));
    GaussianState g1{{1.0, 0.0}, 0.3, 1, 0.0};
    auto o1 = ou_propagate(g1, {0.0, 0.25, 2.0});
    REQUIRE(o1.variance == Catch::Approx(0.3 + 0.25 * 2.0).margin(1e-15));
    // The Q -> 0 closed forms continue the generic branch smoothly.
    auto near0 = fpe_propagate(g, {1e-14, 0.25, 2.0});
    REQUIRE(near0.variance == Catch::Approx(out.variance).margin(1e-9));
}

TEST_CASE("dimensionality of the state is enforced") {
    GaussianState g2{{0.0, 0.0}, 0.1, 2, 0.0};
    GaussianState g1{{0.0, 0.0}, 0.1, 1, 0.0};
    REQUIRE_THROWS_AS(ou_propagate(g2, {1.0, 0.1, 1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(fpe_propagate(g1, {1.0, 0.1, 1.0}), std::invalid_argument);
}

TEST_CASE("diffusion matrix eigenstructure and factorization") {
    const Sym2 iso{0.3, 0.0, 0.3};
    auto e = eigenvalues(iso);
    REQUIRE(e.lo == Catch::Approx(0.3));
    REQUIRE(e.hi == Catch::Approx(0.3));
    auto b = noise_factor(iso, {0.0, 0.0});
    // B B^T must equal twice the diffusion matrix.
    REQUIRE(b.xx * b.xx + b.xy * b.xy == Catch::Approx(0.6).margin(1e-12));
    REQUIRE(b.xy * (b.xx + b.yy) == Catch::Approx(0.0).margin(1e-12));

    const Sym2 tilted{0.5, 0.2, 0.3};
    auto bt = noise_factor(tilted, {0.0, 0.0});
    REQUIRE(bt.xx * bt.xx + bt.xy * bt.xy == Catch::Approx(2.0 * tilted.xx).margin(1e-12));
    REQUIRE(bt.xy * bt.xx + bt.yy * bt.xy == Catch::Approx(2.0 * tilted.xy).margin(1e-12));
    REQUIRE(bt.xy * bt.xy + bt.yy * bt.yy == Catch::Approx(2.0 * tilted.yy).margin(1e-12));
}

TEST_CASE("leaving the diffusive region is a hard error") {
    const Sym2 indefinite{0.1, 0.3, 0.1};
    REQUIRE_THROWS_AS(noise_factor(indefinite, {1.0, 2.0}), NonDiffusiveRegion);
    try {
        noise_factor(indefinite, {1.0, 2.0});
    } catch (const NonDiffusiveRegion& e) {
        REQUIRE(e.where() == std::complex<double>(1.0, 2.0));
        REQUIRE(e.eigenvalues().lo < 0.0);
    }
    // Tiny negative eigenvalues are rounding, not physics.
    const Sym2 rounding{1e-13, 0.0, -0.5e-13};
    REQUIRE_NOTHROW(noise_factor(rounding, {0.0, 0.0}));
}

TEST_CASE("single deterministic step reproduces the drift by hand") {
    const ConstantCoefficients field{0.7, 0.05};
    const std::complex<double> u0{1.0, -2.0};
    const double dt = 1e-3;
    auto u1 = em_step_with(u0, field, dt, {0.0, 0.0});
    const auto expect = u0 - u0 * 0.7 * dt;
    REQUIRE(u1.real() == Catch::Approx(expect.real()).margin(1e-15));
    REQUIRE(u1.imag() == Catch::Approx(expect.imag()).margin(1e-15));
}

TEST_CASE("noise injection carries the documented variance rate") {
    // For phase-insensitive diffusion d_s the per-quadrature increment
    // variance over one step must be d_s dt.
    const double d_s = 0.35, dt = 0.01;
    const ConstantCoefficients field{0.0, d_s};
    RngStream rng(814, 0);
    const int m = 200000;
    KahanSum sx, sxx, sy, syy;
    for (int i = 0; i < m; ++i) {
        auto u = em_step_with({0.0, 0.0}, field, dt, rng.normal_pair());
        sx.add(u.real());
        sxx.add(u.real() * u.real());
        sy.add(u.imag());
        syy.add(u.imag() * u.imag());
    }
    const double vx = sxx.value() / m - std::pow(sx.value() / m, 2);
    const double vy = syy.value() / m - std::pow(sy.value() / m, 2);
    const double expect = d_s * dt;
    const double se = expect * std::sqrt(2.0 / m);
    REQUIRE(std::abs(vx - expect) < 5.0 * se);
    REQUIRE(std::abs(vy - expect) < 5.0 * se);
}

TEST_CASE("phase-sensitive diffusion squeezes one quadrature") {
    // d_uu real and negative removes noise from x and adds it to y.
    struct Field {
        DriftDiffusion coefficients(std::complex<double>) const {
            return {{0.0, 0.0}, {-0.2, 0.0}, 0.3};
        }
    } field;
    RngStream rng(815, 0);
    const double dt = 0.01;
    const int m = 200000;
    KahanSum sxx, syy;
    for (int i = 0; i < m; ++i) {
        auto u = em_step_with({0.0, 0.0}, field, dt, rng.normal_pair());
        sxx.add(u.real() * u.real());
        syy.add(u.imag() * u.imag());
    }
    const double vx = sxx.value() / m;
    const double vy = syy.value() / m;
    // Per-quadrature rates (d_s + Re d_uu) and (d_s - Re d_uu).
    REQUIRE(vx == Catch::Approx(0.1 * dt).epsilon(0.05));
    REQUIRE(vy == Catch::Approx(0.5 * dt).epsilon(0.05));
}

TEST_CASE("stochastic engine tracks the closed-form propagator") {
    const LinearChannelParams decay{1.0, 0.05, 1.0};
    auto r = sde_oracle_check(decay, 50000, 90210, 1e-3, 2);
    INFO("worst sigma " << r.worst_sigma() << ", halving shift " << r.halving_shift_sigma);
    REQUIRE(r.worst_sigma() < 5.0);
    REQUIRE(r.halving_shift_sigma < 1.0);

    const LinearChannelParams gain{-0.4, 0.2, 0.8};
    auto rg = sde_oracle_check(gain, 50000, 90211, 1e-3, 2);
    INFO("worst sigma " << rg.worst_sigma() << ", halving shift " << rg.halving_shift_sigma);
    REQUIRE(rg.worst_sigma() < 5.0);
    REQUIRE(rg.halving_shift_sigma < 1.0);
}

TEST_CASE("oracle verdict is thread-count invariant") {
    const LinearChannelParams p{0.6, 0.1, 0.5};
    auto a = sde_oracle_check(p, 20000, 77, 1e-3, 1);
    auto b = sde_oracle_check(p, 20000, 77, 1e-3, 4);
    REQUIRE(a.emp_mean_re == b.emp_mean_re);
    REQUIRE(a.emp_mean_im == b.emp_mean_im);
    REQUIRE(a.emp_var2d == b.emp_var2d);
    REQUIRE(a.emp_var_x == b.emp_var_x);
}
