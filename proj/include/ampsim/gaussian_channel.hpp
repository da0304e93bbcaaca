#pragma once

// Closed-form propagators for constant-coefficient Fokker-Planck and
// Ornstein-Uhlenbeck evolution of Gaussian states, plus the stochastic-engine
// oracle that pins the Euler-Maruyama integrator to these formulas.
//
// 2-D states track the complex amplitude; "variance" is the total complex
// spread <|u - <u>|^2> (both quadratures summed). 1-D states track one
// quadrature. Amplitude gain is G = exp(-Q t) for both.

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "parallel.hpp"
#include "rng.hpp"
#include "sde.hpp"

namespace ampsim {

struct GaussianState {
    std::complex<double> mean;  // imaginary part unused for 1-D states
    double variance = 0.0;
    int dimensionality = 2;  // 1 or 2
    double ordering_s = 0.0;
};

struct LinearChannelParams {
    double drift_q = 0.0;   // rate
    double diffusion = 0.0; // D_s
    double time = 0.0;
};

inline void validate(const LinearChannelParams& p) {
    if (p.time < 0.0) throw std::invalid_argument("LinearChannelParams: negative time");
}

inline double gain_of(const LinearChannelParams& p) {
    validate(p);
    return std::exp(-p.drift_q * p.time);
}

// mean -> mean e^{-Qt}; variance -> (D_s/Q)(1 - e^{-2Qt}) + variance e^{-2Qt}.
// Q = 0 is an explicit limit (variance + 2 D_s t), not a small-Q division.
inline GaussianState fpe_propagate(const GaussianState& g, const LinearChannelParams& p) {
    validate(p);
    if (g.dimensionality != 2) throw std::invalid_argument("fpe_propagate: state must be 2-D");
    GaussianState out = g;
    const double decay = std::exp(-p.drift_q * p.time);
    out.mean = g.mean * decay;
    if (p.drift_q == 0.0) {
        out.variance = g.variance + 2.0 * p.diffusion * p.time;
    } else {
        const double relax = -std::expm1(-2.0 * p.drift_q * p.time);  // 1 - e^{-2Qt}
        out.variance = (p.diffusion / p.drift_q) * relax + g.variance * (1.0 - relax);
    }
    return out;
}

// Single-quadrature version: stationary variance D_s/(2Q); Q = 0 limit
// variance + D_s t.
inline GaussianState ou_propagate(const GaussianState& g, const LinearChannelParams& p) {
    validate(p);
    if (g.dimensionality != 1) throw std::invalid_argument("ou_propagate: state must be 1-D");
    GaussianState out = g;
    const double decay = std::exp(-p.drift_q * p.time);
    out.mean = g.mean * decay;
    if (p.drift_q == 0.0) {
        out.variance = g.variance + p.diffusion * p.time;
    } else {
        const double relax = -std::expm1(-2.0 * p.drift_q * p.time);
        out.variance = (p.diffusion / (2.0 * p.drift_q)) * relax + g.variance * (1.0 - relax);
    }
    return out;
}

// Validation record for the stochastic engine against the analytic
// propagators: errors are reported in units of one ensemble standard error,
// and the dt-halving shift uses common random numbers (coarse increments are
// the rescaled sums of the fine ones) so it isolates discretization error.
struct SdeOracleResult {
    double dt = 0.0;
    std::size_t ensemble_size = 0;
    // empirical minus analytic, in standard errors
    double mean_re_sigma = 0.0;
    double mean_im_sigma = 0.0;
    double var2d_sigma = 0.0;
    double mean_x_sigma = 0.0;
    double var_x_sigma = 0.0;
    // largest dt-halving shift across those observables, in standard errors
    double halving_shift_sigma = 0.0;
    // raw values for reports
    double emp_mean_re = 0.0, emp_mean_im = 0.0, emp_var2d = 0.0, emp_var_x = 0.0;
    double ana_mean_re = 0.0, ana_mean_im = 0.0, ana_var2d = 0.0, ana_var_x = 0.0;

    double worst_sigma() const {
        double w = std::abs(mean_re_sigma);
        w = std::max(w, std::abs(mean_im_sigma));
        w = std::max(w, std::abs(var2d_sigma));
        w = std::max(w, std::abs(mean_x_sigma));
        w = std::max(w, std::abs(var_x_sigma));
        return w;
    }
};

// Runs the Euler-Maruyama engine with constant coefficients from a fixed
// Gaussian initial state and scores it against fpe_propagate/ou_propagate.
inline SdeOracleResult sde_oracle_check(const LinearChannelParams& p, std::size_t ensemble_size,
                                        std::uint64_t seed, double dt = 1e-3,
                                        unsigned n_threads = 1) {
    validate(p);
    if (ensemble_size < 2) throw std::invalid_argument("sde_oracle_check: ensemble too small");
    if (!(dt > 0.0)) throw std::invalid_argument("sde_oracle_check: dt must be positive");

    // Fixed, nontrivial initial Gaussian: mean off-axis, finite spread.
    const std::complex<double> mean0{1.2, -0.7};
    const double var0 = 0.3;  // total complex variance
    const double sigma0 = std::sqrt(var0 / 2.0);

    const std::size_t n_steps = static_cast<std::size_t>(std::llround(p.time / dt));
    const double dt_eff = n_steps > 0 ? p.time / static_cast<double>(n_steps) : 0.0;
    const ConstantCoefficients field{p.drift_q, p.diffusion};
    const double inv_root2 = 1.0 / std::sqrt(2.0);

    const std::size_t m = ensemble_size;
    std::vector<double> cre(m), cim(m), fre(m), fim(m);  // coarse and fine endpoints
    for_each_chunk(m, default_chunk, n_threads,
                   [&](std::size_t, std::size_t first, std::size_t last) {
                       for (std::size_t i = first; i < last; ++i) {
                           RngStream rng(seed, i);
                           auto [gx, gy] = rng.normal_pair();
                           const std::complex<double> u0 =
                               mean0 + std::complex<double>(sigma0 * gx, sigma0 * gy);
                           std::complex<double> uc = u0, uf = u0;
                           for (std::size_t k = 0; k < n_steps; ++k) {
                               auto n1 = rng.normal_pair();
                               auto n2 = rng.normal_pair();
                               uf = em_step_with(uf, field, 0.5 * dt_eff, n1);
                               uf = em_step_with(uf, field, 0.5 * dt_eff, n2);
                               uc = em_step_with(uc, field, dt_eff,
                                                 {(n1.first + n2.first) * inv_root2,
                                                  (n1.second + n2.second) * inv_root2});
                           }
                           cre[i] = uc.real();
                           cim[i] = uc.imag();
                           fre[i] = uf.real();
                           fim[i] = uf.imag();
                       }
                   });

    auto mean_of = [m](const std::vector<double>& v) {
        KahanSum s;
        for (double x : v) s.add(x);
        return s.value() / static_cast<double>(m);
    };
    auto var_of = [m](const std::vector<double>& v, double mu) {
        KahanSum s;
        for (double x : v) {
            const double d = x - mu;
            s.add(d * d);
        }
        return s.value() / static_cast<double>(m - 1);
    };

    const double mre = mean_of(cre), mim = mean_of(cim);
    const double vx = var_of(cre, mre), vy = var_of(cim, mim);
    const double fm_re = mean_of(fre), fm_im = mean_of(fim);
    const double fvx = var_of(fre, fm_re), fvy = var_of(fim, fm_im);

    GaussianState in2{mean0, var0, 2, 0.0};
    GaussianState out2 = fpe_propagate(in2, {p.drift_q, p.diffusion, p.time});
    GaussianState in1{{mean0.real(), 0.0}, var0 / 2.0, 1, 0.0};
    GaussianState out1 = ou_propagate(in1, {p.drift_q, p.diffusion, p.time});

    const double md = static_cast<double>(m);
    const double se_mean_x = std::sqrt(vx / md);
    const double se_mean_y = std::sqrt(vy / md);
    const double se_var2d = std::sqrt(2.0 / (md - 1.0) * (vx * vx + vy * vy));
    const double se_var_x = vx * std::sqrt(2.0 / (md - 1.0));

    SdeOracleResult r;
    r.dt = dt_eff;
    r.ensemble_size = m;
    r.emp_mean_re = mre;
    r.emp_mean_im = mim;
    r.emp_var2d = vx + vy;
    r.emp_var_x = vx;
    r.ana_mean_re = out2.mean.real();
    r.ana_mean_im = out2.mean.imag();
    r.ana_var2d = out2.variance;
    r.ana_var_x = out1.variance;
    r.mean_re_sigma = (mre - out2.mean.real()) / se_mean_x;
    r.mean_im_sigma = (mim - out2.mean.imag()) / se_mean_y;
    r.var2d_sigma = (vx + vy - out2.variance) / se_var2d;
    r.mean_x_sigma = (mre - out1.mean.real()) / se_mean_x;
    r.var_x_sigma = (vx - out1.variance) / se_var_x;

    double shift = std::abs(fm_re - mre) / se_mean_x;
    shift = std::max(shift, std::abs(fm_im - mim) / se_mean_y);
    shift = std::max(shift, std::abs((fvx + fvy) - (vx + vy)) / se_var2d);
    shift = std::max(shift, std::abs(fvx - vx) / se_var_x);
    r.halving_shift_sigma = shift;
    return r;
}

}  // namespace ampsim
