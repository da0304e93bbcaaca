#pragma once

// Phase-space representation of field states: symmetric-ordering Wigner
// samples in the rescaled amplitude u = alpha / sqrt(n_s), moment extraction,
// and conversion to photon-count histograms.
//
// Quadrature convention: a = x + iy with vacuum variance 1/4 per quadrature
// at symmetric ordering, i.e. <|u|^2> over the vacuum ensemble is 1/(2 n_s).
// Moment identities then carry no stray integer factors:
//   <n>       = n_s <|u|^2> - 1/2
//   <dn^2>    = n_s^2 (<|u|^4> - <|u|^2>^2) - 1/4

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "parallel.hpp"
#include "photon_dist.hpp"
#include "rng.hpp"

namespace ampsim {

struct PhaseSpaceEnsemble {
    std::vector<std::complex<double>> samples;  // rescaled amplitudes u
    double n_s = 1.0;                           // saturation photon number
    double ordering_s = 0.0;                    // always symmetric ordering here
};

struct MomentSet {
    std::complex<double> mean_amplitude;  // <u>
    double mean_photons = 0.0;
    double photon_variance = 0.0;
    double fano = 0.0;
    bool negative_mean_flag = false;  // mean below zero past statistical tolerance
};

inline void validate(const PhaseSpaceEnsemble& e) {
    if (e.samples.empty()) throw std::invalid_argument("PhaseSpaceEnsemble: no samples");
    if (!(e.n_s > 0.0)) throw std::invalid_argument("PhaseSpaceEnsemble: n_s must be positive");
}

// Samples the symmetric-ordering quasi-distribution of a coherent state
// |alpha>: a complex Gaussian centered at alpha/sqrt(n_s) with total
// complex variance 1/(2 n_s). alpha = 0 gives the vacuum.
inline PhaseSpaceEnsemble wigner_sample_coherent(std::complex<double> alpha, double n_s,
                                                 std::size_t count, std::uint64_t rng_seed,
                                                 unsigned n_threads = 1) {
    if (count < 1) throw std::invalid_argument("wigner_sample_coherent: count must be >= 1");
    if (!(n_s > 0.0)) throw std::invalid_argument("wigner_sample_coherent: n_s must be positive");
    PhaseSpaceEnsemble e;
    e.n_s = n_s;
    e.samples.resize(count);
    const std::complex<double> center = alpha / std::sqrt(n_s);
    const double sigma = std::sqrt(1.0 / (4.0 * n_s));  // per quadrature
    for_each_chunk(count, default_chunk, n_threads,
                   [&](std::size_t, std::size_t first, std::size_t last) {
                       for (std::size_t i = first; i < last; ++i) {
                           RngStream rng(rng_seed, i);
                           auto [gx, gy] = rng.normal_pair();
                           e.samples[i] = center + std::complex<double>(sigma * gx, sigma * gy);
                       }
                   });
    return e;
}

// Symmetric-to-normal ordering conversion at first and second order.
inline MomentSet moments_from_ensemble(const PhaseSpaceEnsemble& e) {
    validate(e);
    KahanSum su_re, su_im, sw, sw2;
    for (const auto& u : e.samples) {
        const double w = std::norm(u);
        su_re.add(u.real());
        su_im.add(u.imag());
        sw.add(w);
        sw2.add(w * w);
    }
    const double inv = 1.0 / static_cast<double>(e.samples.size());
    const double mw = sw.value() * inv;
    const double mw2 = sw2.value() * inv;
    MomentSet m;
    m.mean_amplitude = {su_re.value() * inv, su_im.value() * inv};
    m.mean_photons = e.n_s * mw - 0.5;
    m.photon_variance = e.n_s * e.n_s * (mw2 - mw * mw) - 0.25;
    m.fano = m.mean_photons > 0.0 ? m.photon_variance / m.mean_photons : 0.0;
    // Statistical tolerance for a legitimate vacuum ensemble: a few standard
    // errors of the |u|^2 estimator. Anything far below zero means the
    // ensemble does not represent a physical state at this ordering.
    const double var_w = mw2 - mw * mw;
    const double se = e.n_s * std::sqrt(var_w > 0.0 ? var_w * inv : 0.0);
    m.negative_mean_flag = m.mean_photons < -(5.0 * se + 1e-12);
    return m;
}

// Semiclassical binning of Wigner samples into photon counts:
// n = round(n_s |u|^2 - 1/2), clamped to [0, n_max]. Exact photon statistics
// would need quasi-probability deconvolution, which is ill-posed sample-wise;
// the rounding rule is asymptotically correct for n >> 1 and its bias is
// covered by regression tests.
inline PhotonDistribution number_hist_from_ensemble(const PhaseSpaceEnsemble& e, int n_max) {
    validate(e);
    if (n_max < 0) throw std::invalid_argument("number_hist_from_ensemble: negative n_max");
    PhotonDistribution d;
    std::vector<double> counts(static_cast<std::size_t>(n_max) + 1, 0.0);
    std::size_t clamped = 0;
    for (const auto& u : e.samples) {
        double nr = std::round(e.n_s * std::norm(u) - 0.5);
        if (nr < 0.0) nr = 0.0;
        int n = static_cast<int>(nr);
        if (n > n_max) {
            n = n_max;
            ++clamped;
        }
        counts[static_cast<std::size_t>(n)] += 1.0;  // exact integer arithmetic in double
    }
    const double inv = 1.0 / static_cast<double>(e.samples.size());
    d.probs.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) d.probs[i] = counts[i] * inv;
    d.tail_mass = 0.0;
    d.truncation_warning = clamped > e.samples.size() / 100;
    return d;
}

struct QuadratureHistogram {
    std::vector<double> counts;
    double lo = 0.0;
    double bin_width = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    std::size_t n_samples = 0;
};

// Empirical marginal of the symmetric-ordering distribution along the real
// quadrature, x = Re(u) * sqrt(n_s); vacuum variance is 1/4.
inline QuadratureHistogram homodyne_marginal(const PhaseSpaceEnsemble& e, int bins) {
    validate(e);
    if (bins < 1) throw std::invalid_argument("homodyne_marginal: bins must be >= 1");
    const double root = std::sqrt(e.n_s);
    double lo = e.samples.front().real() * root;
    double hi = lo;
    KahanSum sx, sx2;
    for (const auto& u : e.samples) {
        const double x = u.real() * root;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        sx.add(x);
        sx2.add(x * x);
    }
    QuadratureHistogram h;
    h.n_samples = e.samples.size();
    const double inv = 1.0 / static_cast<double>(h.n_samples);
    h.mean = sx.value() * inv;
    h.variance = sx2.value() * inv - h.mean * h.mean;
    h.lo = lo;
    h.bin_width = (hi > lo) ? (hi - lo) / bins : 1.0;
    h.counts.assign(static_cast<std::size_t>(bins), 0.0);
    for (const auto& u : e.samples) {
        const double x = u.real() * root;
        int b = static_cast<int>((x - lo) / h.bin_width);
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;
        h.counts[static_cast<std::size_t>(b)] += 1.0;
    }
    return h;
}

}  // namespace ampsim
