#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include <ampsim/phase_space.hpp>
#include <ampsim/photon_dist.hpp>

using namespace ampsim;

TEST_CASE("coherent number statistics are Poissonian") {
    const double alpha_sq = 6.25;
    auto d = coherent_number_dist(alpha_sq, 60);
    REQUIRE(d.total() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(d.mean() == Catch::Approx(alpha_sq).margin(1e-9));
    REQUIRE(d.variance() == Catch::Approx(alpha_sq).margin(1e-8));
    REQUIRE_FALSE(d.truncation_warning);
    for (int n = 0; n < 20; ++n) {
        const double ratio = d.probs[std::size_t(n) + 1] / d.probs[std::size_t(n)];
        REQUIRE(ratio == Catch::Approx(alpha_sq / (n + 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("thermal number statistics are geometric") {
    const double nbar = 3.5;
    auto d = thermal_number_dist(nbar, 200);
    REQUIRE(d.total() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(d.mean() == Catch::Approx(nbar).margin(1e-9));
    REQUIRE(d.variance() == Catch::Approx(nbar * (nbar + 1.0)).margin(1e-7));
    const double ratio = nbar / (1.0 + nbar);
    for (int n = 0; n < 30; ++n)
        REQUIRE(d.probs[std::size_t(n) + 1] / d.probs[std::size_t(n)] ==
                Catch::Approx(ratio).epsilon(1e-12));
    REQUIRE(d.probs[0] == Catch::Approx(1.0 / (1.0 + nbar)).epsilon(1e-12));
}

TEST_CASE("zero-width limits collapse to delta distributions") {
    auto vac = thermal_number_dist(0.0, 5);
    REQUIRE(vac.probs[0] == 1.0);
    REQUIRE(vac.mean() == 0.0);
    auto coh0 = coherent_number_dist(0.0, 5);
    REQUIRE(coh0.probs[0] == 1.0);
}

namespace {

// Direct finite-sum evaluation of the displaced thermal law for small n:
// P(n) = e^{-c/(1+t)} t^n (1+t)^{-(n+1)} L_n(-x), x = c/(t(1+t)),
// with the Laguerre polynomial expanded as L_n(-x) = sum_k C(n,k) x^k / k!.
double displaced_thermal_direct(int n, double c, double t) {
    const double x = c / (t * (1.0 + t));
    double lag = 0.0;
    double binom = 1.0;
    double xk = 1.0;
    double kfact = 1.0;
    for (int k = 0; k <= n; ++k) {
        if (k > 0) {
            binom *= double(n - k + 1) / double(k);
            xk *= x;
            kfact *= double(k);
        }
        lag += binom * xk / kfact;
    }
    return std::exp(-c / (1.0 + t)) * std::pow(t, n) * std::pow(1.0 + t, -(n + 1.0)) * lag;
}

}  // namespace

TEST_CASE("displaced thermal distribution matches the direct expansion") {
    const double c = 4.0, t = 1.5;
    auto d = displaced_thermal_dist(c, t, 80);
    for (int n = 0; n <= 8; ++n)
        REQUIRE(d.probs[std::size_t(n)] ==
                Catch::Approx(displaced_thermal_direct(n, c, t)).epsilon(1e-11));
    REQUIRE(d.total() == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(d.mean() == Catch::Approx(c + t).margin(1e-8));
    REQUIRE(d.variance() == Catch::Approx(t * (t + 1.0) + c * (2.0 * t + 1.0)).margin(1e-6));
}

TEST_CASE("displaced thermal limits recover the pure families") {
    auto th = displaced_thermal_dist(0.0, 2.0, 60);
    auto th_ref = thermal_number_dist(2.0, 60);
    for (std::size_t n = 0; n < th.probs.size(); ++n)
        REQUIRE(th.probs[n] == Catch::Approx(th_ref.probs[n]).margin(1e-13));
    auto coh = displaced_thermal_dist(3.0, 0.0, 60);
    auto coh_ref = coherent_number_dist(3.0, 60);
    for (std::size_t n = 0; n < coh.probs.size(); ++n)
        REQUIRE(coh.probs[n] == Catch::Approx(coh_ref.probs[n]).margin(1e-13));
}

TEST_CASE("truncation bookkeeping flags lost mass") {
    auto d = thermal_number_dist(50.0, 10);
    REQUIRE(d.truncation_warning);
    REQUIRE(d.tail_mass > 0.5);
    REQUIRE(d.total() + d.tail_mass == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("automatic cutoff sits ten deviations past the mean") {
    REQUIRE(default_n_max(1.0, 1.0) == 11);
    REQUIRE(default_n_max(9.0, 9.0) == 39);
    REQUIRE(default_n_max(35.0, 230.0) == int(std::ceil(35.0 + 10.0 * std::sqrt(230.0))));
    // Light-tailed (Poissonian) families are truncated far below the warning
    // level at that cutoff.
    for (double m : {1.0, 35.0, 1000.0}) {
        auto d = coherent_number_dist(m, default_n_max(m, m));
        REQUIRE(d.tail_mass < truncation_warn_level);
        REQUIRE_FALSE(d.truncation_warning);
    }
}

TEST_CASE("padding extends support without moving mass") {
    auto d = coherent_number_dist(2.0, 12);
    auto p = padded_to(d, 20);
    REQUIRE(p.probs.size() == 21);
    REQUIRE(p.n_max() == 20);
    for (int n = 0; n <= 12; ++n) REQUIRE(p.probs[std::size_t(n)] == d.probs[std::size_t(n)]);
    for (int n = 13; n <= 20; ++n) REQUIRE(p.probs[std::size_t(n)] == 0.0);
    REQUIRE(p.tail_mass == d.tail_mass);
    REQUIRE(padded_to(d, 12).probs == d.probs);
    REQUIRE_THROWS_AS(padded_to(d, 11), std::invalid_argument);
}

TEST_CASE("total variation distance reference values") {
    auto a = coherent_number_dist(4.0, 40);
    REQUIRE(total_variation(a, a) == 0.0);
    PhotonDistribution d0, d1;
    d0.probs = {1.0, 0.0};
    d1.probs = {0.0, 1.0};
    REQUIRE(total_variation(d0, d1) == Catch::Approx(1.0).margin(1e-15));
    PhotonDistribution h0, h1;
    h0.probs = {0.5, 0.5, 0.0};
    h1.probs = {0.5, 0.0, 0.5};
    REQUIRE(total_variation(h0, h1) == Catch::Approx(0.5).margin(1e-15));
    // Different lengths are compared on the common zero-padded support.
    PhotonDistribution s1;
    s1.probs = {0.5, 0.5};
    REQUIRE(total_variation(h1, s1) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("tail mass counts toward total variation") {
    auto wide = thermal_number_dist(5.0, 400);
    auto cut = thermal_number_dist(5.0, 3);
    const double tv = total_variation(wide, cut);
    REQUIRE(tv == Catch::Approx(cut.tail_mass).margin(1e-9));
}

TEST_CASE("phase-space sampling reproduces coherent-state moments") {
    const std::complex<double> alpha{3.0, -1.0};
    const double n_s = 15.0;
    auto e = wigner_sample_coherent(alpha, n_s, 400000, 77);
    REQUIRE(e.samples.size() == 400000);
    REQUIRE(e.n_s == n_s);
    auto m = moments_from_ensemble(e);
    const double nbar = std::norm(alpha);
    // <u> carries the 1/sqrt(n_s) rescaling.
    REQUIRE(std::abs(m.mean_amplitude - alpha / std::sqrt(n_s)) < 5.0 * 1e-2 / std::sqrt(n_s));
    REQUIRE(m.mean_photons == Catch::Approx(nbar).margin(5.0 * std::sqrt(nbar + 0.5) / 600.0));
    REQUIRE(m.photon_variance == Catch::Approx(nbar).epsilon(0.02));
    REQUIRE(m.fano == Catch::Approx(1.0).epsilon(0.02));
    REQUIRE_FALSE(m.negative_mean_flag);
}

TEST_CASE("phase-space sampling of the vacuum") {
    auto e = wigner_sample_coherent(0.0, 10.0, 200000, 5);
    auto m = moments_from_ensemble(e);
    // The symmetric-ordering correction removes the half-photon floor.
    REQUIRE(std::abs(m.mean_photons) < 0.01);
    REQUIRE(std::abs(m.photon_variance) < 0.01);
}

TEST_CASE("phase-space sampling is deterministic and thread-invariant") {
    auto a = wigner_sample_coherent({2.0, 0.5}, 8.0, 5000, 123, 1);
    auto b = wigner_sample_coherent({2.0, 0.5}, 8.0, 5000, 123, 4);
    REQUIRE(a.samples == b.samples);
    auto c = wigner_sample_coherent({2.0, 0.5}, 8.0, 5000, 124, 1);
    REQUIRE(a.samples != c.samples);
}

TEST_CASE("number histogram from samples approximates the Poisson law") {
    const double alpha_sq = 9.0;
    auto e = wigner_sample_coherent(3.0, 12.0, 300000, 31);
    auto h = number_hist_from_ensemble(e, 40);
    REQUIRE(h.total() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(h.mean() == Catch::Approx(alpha_sq).margin(0.05));
    auto exact = coherent_number_dist(alpha_sq, 40);
    // Semiclassical binning broadens the histogram slightly; only closeness
    // in total variation is expected.
    REQUIRE(total_variation(h, exact) < 0.08);
    REQUIRE_FALSE(h.truncation_warning);
}

TEST_CASE("number histogram flags heavy clamping") {
    auto e = wigner_sample_coherent(3.0, 12.0, 20000, 31);
    auto h = number_hist_from_ensemble(e, 4);
    REQUIRE(h.truncation_warning);
}

TEST_CASE("homodyne marginal of the vacuum has quarter-unit variance") {
    auto e = wigner_sample_coherent(0.0, 20.0, 300000, 9);
    auto q = homodyne_marginal(e, 80);
    REQUIRE(q.n_samples == 300000);
    REQUIRE(std::abs(q.mean) < 0.005);
    REQUIRE(q.variance == Catch::Approx(0.25).epsilon(0.02));
}
