#pragma once

// Saturable laser amplifier in the scaled Wigner amplitude u = alpha/sqrt(n_s):
// drift and diffusion fields of the single-mode laser Fokker-Planck generator,
// the validity conditions of that description, stochastic ensemble evolution,
// and the linear-regime reduction to a phase-insensitive amplifier.
//
// The generator is parametrized by six numbers: cooperation parameter C,
// unsaturated inversion sigma0, atom number N, cavity decay rate gamma,
// atomic decay ratio f = gamma_par/(2 gamma_perp), and saturation photon
// number n_s. The microscopic rates are reconstructible as
//   gamma_par = 4 C gamma n_s / N,  gamma_perp = 2 C gamma n_s / (f N),
//   g = sqrt(C gamma gamma_perp / N).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

#include "parallel.hpp"
#include "phase_space.hpp"
#include "pia.hpp"
#include "rng.hpp"
#include "sde.hpp"

namespace ampsim {

struct LaserParams {
    double C = 1.0;       // cooperation parameter
    double sigma0 = 0.0;  // unsaturated population inversion, in [-1, 1]
    int N = 1;            // number of lasing atoms
    double gamma = 1.0;   // cavity decay rate
    double f = 1.0;       // gamma_par / (2 gamma_perp)
    double n_s = 1.0;     // saturation photon number
};

inline void validate(const LaserParams& p) {
    if (!(p.C > 0.0)) throw std::invalid_argument("LaserParams: C must be positive");
    if (!(std::abs(p.sigma0) <= 1.0))
        throw std::invalid_argument("LaserParams: sigma0 must lie in [-1, 1]");
    if (p.N < 1) throw std::invalid_argument("LaserParams: N must be >= 1");
    if (!(p.gamma > 0.0)) throw std::invalid_argument("LaserParams: gamma must be positive");
    if (!(p.f > 0.0)) throw std::invalid_argument("LaserParams: f must be positive");
    if (!(p.n_s > 0.0)) throw std::invalid_argument("LaserParams: n_s must be positive");
}

// All generator coefficients at one point, sharing the powers of 1 + |u|^2.
inline DriftDiffusion laser_coefficients(std::complex<double> u, const LaserParams& p) {
    const double w = std::norm(u);
    const double s0 = p.sigma0;
    const double s1 = 1.0 + w;
    const double s2 = s1 * s1;
    const double s3 = s2 * s1;
    const double s4 = s3 * s1;
    const double atoms = static_cast<double>(p.N);

    double q = 1.0 - 2.0 * s0 * p.C / s1;
    q += s0 * atoms * ((1.0 + p.f) * w - p.f) / (2.0 * p.n_s * s3);
    q += s0 * s0 * p.C * p.f * (atoms * (1.0 - w) - 2.0 * w) / (p.n_s * s4);
    q += p.C * (-2.0 * s0 * s0 * atoms * w + s0 * s0 * (1.0 - w) + (3.0 + w) * s2) /
         (2.0 * p.n_s * s4);

    DriftDiffusion dd;
    dd.q_u = {0.5 * p.gamma * q, 0.0};
    dd.d_uu = -(p.C * p.gamma * (s0 * s0 * (1.0 + 2.0 * p.f) + s2) / (4.0 * p.n_s * s3)) * u * u;
    dd.d_uustar =
        0.25 * p.gamma *
        (1.0 / p.n_s + p.C * (s2 * (2.0 + w) - w * s0 * s0 * (1.0 + 2.0 * p.f)) / (p.n_s * s3));
    return dd;
}

inline std::complex<double> drift_at(std::complex<double> u, const LaserParams& p) {
    return laser_coefficients(u, p).q_u;
}

inline DriftDiffusion diffusion_at(std::complex<double> u, const LaserParams& p) {
    return laser_coefficients(u, p);
}

struct LaserField {
    LaserParams p;
    DriftDiffusion coefficients(std::complex<double> u) const { return laser_coefficients(u, p); }
};

inline std::complex<double> em_step(std::complex<double> u, const LaserParams& p, double dt,
                                    std::pair<double, double> noise) {
    if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be positive");
    return em_step_with(u, LaserField{p}, dt, noise);
}

// The semiclassical laser theory holds when the atoms are fast compared to the
// cavity (adiabatic elimination), the observation time exceeds the atomic
// memory, and the saturation photon number is large. Each condition is an
// order-of-magnitude inequality; a margin passes when it exceeds the
// strictness factor.
struct ValidityReport {
    bool adiabatic_ok = false;
    bool trace_time_ok = false;
    bool saturation_ok = false;
    double adiabatic_margin = 0.0;    // min(gamma_par, gamma_perp) / gamma
    double trace_time_margin = 0.0;   // t * min(gamma_par, gamma_perp)
    double saturation_margin = 0.0;   // n_s / (1/4)
    double strictness = 0.0;

    bool all_ok() const { return adiabatic_ok && trace_time_ok && saturation_ok; }
};

inline constexpr double default_strictness = 10.0;

inline ValidityReport validity_check(const LaserParams& p, double t,
                                     double strictness = default_strictness) {
    validate(p);
    if (!(t > 0.0)) throw std::invalid_argument("validity_check: t must be positive");
    const double atoms = static_cast<double>(p.N);
    const double par_rate = 4.0 * p.C * p.n_s / atoms;          // gamma_par / gamma
    const double perp_rate = 2.0 * p.C * p.n_s / (p.f * atoms); // gamma_perp / gamma
    ValidityReport r;
    r.strictness = strictness;
    r.adiabatic_margin = std::min(par_rate, perp_rate);
    r.trace_time_margin = p.gamma * t * std::min(par_rate, perp_rate);
    r.saturation_margin = 4.0 * p.n_s;
    r.adiabatic_ok = r.adiabatic_margin > strictness;
    r.trace_time_ok = r.trace_time_margin > strictness;
    r.saturation_ok = r.saturation_margin > strictness;
    return r;
}

class ValidityError : public std::runtime_error {
public:
    explicit ValidityError(const ValidityReport& r)
        : std::runtime_error("laser parameters outside the validity region (margins: adiabatic " +
                             std::to_string(r.adiabatic_margin) + ", trace time " +
                             std::to_string(r.trace_time_margin) + ", saturation " +
                             std::to_string(r.saturation_margin) + " vs strictness " +
                             std::to_string(r.strictness) + "); pass the override to proceed"),
          report_(r) {}

    const ValidityReport& report() const { return report_; }

private:
    ValidityReport report_;
};

inline bool above_threshold(const LaserParams& p) {
    validate(p);
    return p.sigma0 > 1.0 / (2.0 * p.C);
}

// Deterministic small-signal probe: runs the discrete drift flow (the
// stochastic engine fed with zero noise) from an amplitude far below
// saturation and reports the photon-number gain |u(t)|^2 / |u(0)|^2.
inline double small_signal_gain(const LaserParams& p, double t, double dt = 0.0) {
    validate(p);
    if (!(t > 0.0)) throw std::invalid_argument("small_signal_gain: t must be positive");
    if (dt <= 0.0) dt = 1e-3 / p.gamma;
    const long n_steps = std::max(1L, std::lround(t / dt));
    const double h = t / static_cast<double>(n_steps);
    constexpr double probe = 1e-6;
    std::complex<double> u(probe, 0.0);
    for (long k = 0; k < n_steps; ++k) u = em_step(u, p, h, {0.0, 0.0});
    return std::norm(u) / (probe * probe);
}

// Linear-regime equivalence: far below saturation the laser acts as a
// phase-insensitive amplifier whose idler carries
//   n_b = min{C(1+sigma0), C(1-sigma0)+1} / |2 C sigma0 - 1|
// thermal photons. The gain is measured with the small-signal probe rather
// than taken from a closed form, so it is consistent with the integrator by
// construction. Below threshold (sigma0 <= 1/(2C)) the returned gain is
// below one and describes a lossy channel rather than an amplifier.
inline PiaParams linear_equivalent_pia(const LaserParams& p, double t) {
    validate(p);
    if (!(t > 0.0)) throw std::invalid_argument("linear_equivalent_pia: t must be positive");
    const double denom = std::abs(2.0 * p.C * p.sigma0 - 1.0);
    if (denom < 1e-9)
        throw std::domain_error("linear_equivalent_pia: parameters sit on the threshold "
                                "singularity |2 C sigma0 - 1| = 0");
    PiaParams out;
    out.idler_photons =
        std::min(p.C * (1.0 + p.sigma0), p.C * (1.0 - p.sigma0) + 1.0) / denom;
    out.gain_n = small_signal_gain(p, t);
    return out;
}

struct EvolveOptions {
    bool override_validity = false;  // proceed outside the validity region
    unsigned n_threads = 1;
    double strictness = default_strictness;
    bool auto_dt = true;             // pilot-driven step halving
    int max_halvings = 6;
    std::size_t pilot_size = 2000;
};

struct EvolveInfo {
    double dt_used = 0.0;
    long n_steps = 0;
    int halvings = 0;
    ValidityReport validity;
    bool validity_overridden = false;
};

namespace detail {

inline std::complex<double> integrate_trajectory(std::complex<double> u, const LaserField& field,
                                                 double h, long n_steps, RngStream& rng,
                                                 std::size_t index) {
    long k = 0;
    try {
        for (; k < n_steps; ++k) u = em_step_with(u, field, h, rng.normal_pair());
    } catch (const NonDiffusiveRegion& e) {
        throw NonDiffusiveRegion(e.where(), e.eigenvalues(),
                                 "trajectory " + std::to_string(index) + ", t = " +
                                     std::to_string(static_cast<double>(k) * h));
    }
    return u;
}

// Compares one ensemble step size against its half under common random
// numbers: the fine path takes two half steps whose increments sum to the
// coarse increment. Returns true when the means moved by less than one
// standard error of the fine ensemble mean, for both the complex mean and
// the mean photon number.
inline bool step_size_converged(const PhaseSpaceEnsemble& e, const LaserField& field, double t,
                                double h, std::uint64_t seed, std::size_t pilot_size) {
    const std::size_t m = std::min(pilot_size, e.samples.size());
    const long n_steps = std::max(1L, std::lround(t / h));
    const double hc = t / static_cast<double>(n_steps);
    const double hf = 0.5 * hc;
    const double inv_root2 = 1.0 / std::sqrt(2.0);
    KahanSum fx, fy, fw, fx2, fy2, fw2, dx, dy, dw;
    for (std::size_t i = 0; i < m; ++i) {
        RngStream rng(seed, i);
        std::complex<double> uc = e.samples[i];
        std::complex<double> uf = e.samples[i];
        for (long k = 0; k < n_steps; ++k) {
            const auto n1 = rng.normal_pair();
            const auto n2 = rng.normal_pair();
            uf = em_step_with(uf, field, hf, n1);
            uf = em_step_with(uf, field, hf, n2);
            uc = em_step_with(uc, field, hc,
                              {(n1.first + n2.first) * inv_root2,
                               (n1.second + n2.second) * inv_root2});
        }
        const double wf = std::norm(uf);
        fx.add(uf.real());
        fy.add(uf.imag());
        fw.add(wf);
        fx2.add(uf.real() * uf.real());
        fy2.add(uf.imag() * uf.imag());
        fw2.add(wf * wf);
        dx.add(uf.real() - uc.real());
        dy.add(uf.imag() - uc.imag());
        dw.add(wf - std::norm(uc));
    }
    const double inv = 1.0 / static_cast<double>(m);
    const double var_x = fx2.value() * inv - fx.value() * inv * fx.value() * inv;
    const double var_y = fy2.value() * inv - fy.value() * inv * fy.value() * inv;
    const double var_w = fw2.value() * inv - fw.value() * inv * fw.value() * inv;
    const double se_mean = std::sqrt(std::max(var_x + var_y, 0.0) * inv);
    const double se_w = std::sqrt(std::max(var_w, 0.0) * inv);
    const double shift_mean = std::hypot(dx.value() * inv, dy.value() * inv);
    const double shift_w = std::abs(dw.value() * inv);
    return shift_mean < se_mean && shift_w < se_w;
}

}  // namespace detail

// Evolves every sample of the ensemble independently for t_total. Each
// trajectory draws from its own (seed, index) stream, so the result is
// bit-identical for any thread count. With auto_dt enabled, a pilot subset
// is integrated at dt and dt/2 under common random numbers and the step is
// halved until the ensemble means stop moving at the one-standard-error
// level (or max_halvings is reached).
inline PhaseSpaceEnsemble evolve_ensemble(const PhaseSpaceEnsemble& e, const LaserParams& p,
                                          double t_total, double dt, std::uint64_t seed,
                                          const EvolveOptions& opts = {},
                                          EvolveInfo* info = nullptr) {
    validate(e);
    validate(p);
    if (t_total < 0.0) throw std::invalid_argument("evolve_ensemble: negative t_total");
    if (!(dt > 0.0)) throw std::invalid_argument("evolve_ensemble: dt must be positive");
    PhaseSpaceEnsemble out = e;
    if (info) *info = {};
    if (t_total == 0.0) return out;

    const ValidityReport validity = validity_check(p, t_total, opts.strictness);
    if (info) {
        info->validity = validity;
        info->validity_overridden = !validity.all_ok() && opts.override_validity;
    }
    if (!validity.all_ok() && !opts.override_validity) throw ValidityError(validity);

    const LaserField field{p};
    double h = dt;
    int halvings = 0;
    if (opts.auto_dt) {
        while (halvings < opts.max_halvings &&
               !detail::step_size_converged(e, field, t_total, h, seed, opts.pilot_size)) {
            h *= 0.5;
            ++halvings;
        }
    }
    const long n_steps = std::max(1L, std::lround(t_total / h));
    const double step = t_total / static_cast<double>(n_steps);
    if (info) {
        info->dt_used = step;
        info->n_steps = n_steps;
        info->halvings = halvings;
    }

    std::exception_ptr failure = nullptr;
    std::mutex failure_mutex;
    for_each_chunk(out.samples.size(), default_chunk, opts.n_threads,
                   [&](std::size_t, std::size_t first, std::size_t last) {
                       try {
                           for (std::size_t i = first; i < last; ++i) {
                               RngStream rng(seed, i);
                               out.samples[i] = detail::integrate_trajectory(
                                   out.samples[i], field, step, n_steps, rng, i);
                           }
                       } catch (...) {
                           std::lock_guard<std::mutex> lock(failure_mutex);
                           if (!failure) failure = std::current_exception();
                       }
                   });
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace ampsim
