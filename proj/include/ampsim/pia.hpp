#pragma once

// Phase-insensitive amplifier channel, solved exactly at the level of photon
// statistics, plus the ideal photon-number amplifier (PNA) reference channel.
//
// The photon-number gain G is the primary parameter (input-output relation
// a_out = sqrt(G) a_in + sqrt(G-1) b_in^dagger with idler mode b). Output
// distributions are evaluated in log space with a Laguerre ratio recurrence,
// which keeps 10^4..10^5 bins exact to rounding in O(n_max) time.

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include "phase_space.hpp"
#include "photon_dist.hpp"

namespace ampsim {

struct PiaParams {
    double gain_n = 1.0;         // photon-number gain, >= 1
    double idler_photons = 0.0;  // thermal idler occupancy, 0 for the ideal device
};

inline void validate(const PiaParams& p) {
    if (!(p.gain_n >= 1.0)) throw std::invalid_argument("PiaParams: gain must be >= 1");
    if (!(p.idler_photons >= 0.0))
        throw std::invalid_argument("PiaParams: idler occupancy must be >= 0");
}

inline void require_vacuum_idler(const PiaParams& p, const char* what) {
    validate(p);
    if (p.idler_photons != 0.0)
        throw std::invalid_argument(std::string(what) + ": closed form requires a vacuum idler");
}

// Output distribution for input Fock state |m>, vacuum idler:
// P(n) = (G-1)^(n-m) G^-(n+1) binom(n, m) for n >= m.
inline PhotonDistribution pia_fock_output(int m, const PiaParams& params, int n_max) {
    require_vacuum_idler(params, "pia_fock_output");
    if (m < 0) throw std::invalid_argument("pia_fock_output: negative photon number");
    if (n_max < m) throw std::invalid_argument("pia_fock_output: cutoff below input");
    const double g = params.gain_n;
    PhotonDistribution d;
    d.probs.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
    if (g == 1.0) {
        d.probs[static_cast<std::size_t>(m)] = 1.0;
        return d;
    }
    const double log_gm1 = std::log(g - 1.0);
    const double log_g = std::log(g);
    const double log_mfact = std::lgamma(m + 1.0);
    for (int n = m; n <= n_max; ++n) {
        const double log_binom = std::lgamma(n + 1.0) - log_mfact - std::lgamma(n - m + 1.0);
        d.probs[static_cast<std::size_t>(n)] =
            std::exp((n - m) * log_gm1 - (n + 1.0) * log_g + log_binom);
    }
    finalize_truncation(d);
    return d;
}

// Output distribution for an input coherent state of mean alpha_sq photons.
// The output is displaced thermal: coherent part G |a|^2 on top of the
// amplified spontaneous-emission background (G-1)(n_b+1). With a vacuum
// idler this reduces to P(n) = e^{-|a|^2} (G-1)^n G^{-(n+1)} L_n(-|a|^2/(G-1)).
inline PhotonDistribution pia_coherent_output(double alpha_sq, const PiaParams& params,
                                              int n_max) {
    validate(params);
    if (alpha_sq < 0.0) throw std::domain_error("pia_coherent_output: negative mean");
    if (n_max < 0) throw std::invalid_argument("pia_coherent_output: negative n_max");
    const double g = params.gain_n;
    return displaced_thermal_dist(g * alpha_sq, (g - 1.0) * (params.idler_photons + 1.0), n_max);
}

// <n>_out = G n_in + (G-1)(n_b + 1); the last term is spontaneous emission.
inline double pia_mean_photons(double n_in, const PiaParams& params) {
    validate(params);
    return params.gain_n * n_in + (params.gain_n - 1.0) * (params.idler_photons + 1.0);
}

// The binary-channel output noise with bit "0" on the vacuum, split into its
// seven standard contributions:
//   (1) quantum fluctuations of the amplified signal
//   (2) amplified parametric spontaneous emission
//   (3) beat between amplified signal and spontaneous emission
//   (4) self-beat of the spontaneous emission
//   (5) excess noise of the signal
//   (6) excess noise of the idler
//   (7) coherent terms
struct PiaNoiseBreakdown {
    double term[7] = {0, 0, 0, 0, 0, 0, 0};
    double total = 0.0;
};

inline PiaNoiseBreakdown pia_output_noise(const MomentSet& signal,
                                          std::complex<double> a_squared,
                                          const PiaParams& params, const MomentSet& idler,
                                          std::complex<double> b_squared) {
    validate(params);
    if (signal.photon_variance < 0.0 || idler.photon_variance < 0.0)
        throw std::invalid_argument("pia_output_noise: negative variance in moment set");
    const double g = params.gain_n;
    const double na = signal.mean_photons;
    const double nb = idler.mean_photons;
    PiaNoiseBreakdown r;
    r.term[0] = g * na;
    r.term[1] = 2.0 * (g - 1.0) * (nb + 1.0);
    r.term[2] = 2.0 * g * (g - 1.0) * (nb + 1.0) * na;
    r.term[3] = 2.0 * (g - 1.0) * (g - 1.0) * (2.0 * nb + 1.0);
    r.term[4] = g * g * (signal.photon_variance - na);
    r.term[5] = 2.0 * (g - 1.0) * (g - 1.0) * (idler.photon_variance - nb);
    r.term[6] = 2.0 * g * (g - 1.0) * 2.0 * (a_squared * b_squared).real();
    double sum = 0.0;
    for (double t : r.term) sum += t;
    r.total = 0.5 * sum;
    return r;
}

inline MomentSet thermal_idler_moments(const PiaParams& params) {
    MomentSet m;
    m.mean_photons = params.idler_photons;
    m.photon_variance = params.idler_photons * (params.idler_photons + 1.0);
    m.fano = 1.0 + params.idler_photons;
    return m;
}

struct NoiseFigure {
    double linear = 0.0;
    double db = 0.0;
};

// R = SNR_in / SNR_out with signal S the vacuum-referenced photon-number
// expectation and noise the two-bit average variance. A noiseless input
// (Fock state) makes SNR_in infinite; R is then reported as +infinity.
inline NoiseFigure pia_noise_figure(const MomentSet& signal_in, std::complex<double> a_squared,
                                    const PiaParams& params) {
    validate(params);
    const double na = signal_in.mean_photons;
    if (na <= 0.0) throw std::domain_error("pia_noise_figure: zero input signal");
    const double n_in = 0.5 * signal_in.photon_variance;  // vacuum bit contributes nothing
    const double g = params.gain_n;
    const auto breakdown =
        pia_output_noise(signal_in, a_squared, params, thermal_idler_moments(params), 0.0);
    NoiseFigure r;
    if (n_in == 0.0) {
        r.linear = std::numeric_limits<double>::infinity();
        r.db = r.linear;
        return r;
    }
    const double snr_in = na * na / n_in;
    const double s_out = g * na;
    const double snr_out = s_out * s_out / breakdown.total;
    r.linear = snr_in / snr_out;
    r.db = 10.0 * std::log10(r.linear);
    return r;
}

// Ideal photon-number amplifier: exact spectrum rescaling n -> G n. Only
// integer gain is meaningful for a discrete spectrum.
inline PhotonDistribution pna_output(const PhotonDistribution& dist, double gain_n) {
    if (!(gain_n >= 1.0) || gain_n != std::floor(gain_n))
        throw std::invalid_argument("pna_output: gain must be a positive integer");
    const auto g = static_cast<std::size_t>(gain_n);
    PhotonDistribution out;
    out.probs.assign((dist.probs.size() - 1) * g + 1, 0.0);
    for (std::size_t n = 0; n < dist.probs.size(); ++n) out.probs[n * g] = dist.probs[n];
    out.tail_mass = dist.tail_mass;
    out.truncation_warning = dist.truncation_warning;
    return out;
}

}  // namespace ampsim
