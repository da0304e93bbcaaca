#pragma once

// Photon-number distributions over n = 0..n_max, the common currency of the
// direct-detection channel. Analytic constructors work in log space so that
// heavily amplified distributions (n_max in the tens of thousands) stay exact
// to rounding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "parallel.hpp"

namespace ampsim {

struct PhotonDistribution {
    std::vector<double> probs;     // index n = 0..n_max
    double tail_mass = 0.0;        // probability mass beyond the cutoff
    bool truncation_warning = false;

    int n_max() const { return static_cast<int>(probs.size()) - 1; }

    double mean() const {
        KahanSum s;
        for (std::size_t n = 0; n < probs.size(); ++n) s.add(static_cast<double>(n) * probs[n]);
        return s.value();
    }

    double variance() const {
        const double m = mean();
        KahanSum s;
        for (std::size_t n = 0; n < probs.size(); ++n) {
            const double d = static_cast<double>(n) - m;
            s.add(d * d * probs[n]);
        }
        return s.value();
    }

    double total() const {
        KahanSum s;
        for (double p : probs) s.add(p);
        return s.value();
    }
};

inline constexpr double truncation_warn_level = 1e-6;

inline void finalize_truncation(PhotonDistribution& d) {
    d.tail_mass = 1.0 - d.total();
    if (d.tail_mass < 0.0) d.tail_mass = 0.0;
    d.truncation_warning = d.tail_mass > truncation_warn_level;
}

// Poisson statistics of a coherent state with mean photon number alpha_sq.
inline PhotonDistribution coherent_number_dist(double alpha_sq, int n_max) {
    if (alpha_sq < 0.0) throw std::domain_error("coherent_number_dist: negative mean");
    if (n_max < 0) throw std::invalid_argument("coherent_number_dist: negative n_max");
    PhotonDistribution d;
    d.probs.resize(static_cast<std::size_t>(n_max) + 1, 0.0);
    if (alpha_sq == 0.0) {
        d.probs[0] = 1.0;
        return d;
    }
    const double log_mean = std::log(alpha_sq);
    for (int n = 0; n <= n_max; ++n)
        d.probs[n] = std::exp(n * log_mean - alpha_sq - std::lgamma(n + 1.0));
    finalize_truncation(d);
    return d;
}

// Geometric (thermal) distribution P(n) = mean^n / (1+mean)^(n+1).
inline PhotonDistribution thermal_number_dist(double mean, int n_max) {
    if (mean < 0.0) throw std::domain_error("thermal_number_dist: negative mean");
    if (n_max < 0) throw std::invalid_argument("thermal_number_dist: negative n_max");
    PhotonDistribution d;
    d.probs.resize(static_cast<std::size_t>(n_max) + 1, 0.0);
    if (mean == 0.0) {
        d.probs[0] = 1.0;
        return d;
    }
    const double log_mean = std::log(mean);
    const double log_mean1 = std::log(1.0 + mean);
    for (int n = 0; n <= n_max; ++n)
        d.probs[n] = std::exp(n * log_mean - (n + 1.0) * log_mean1);
    finalize_truncation(d);
    return d;
}

// Photon statistics of a displaced thermal field: coherent mean c on top of
// thermal mean t,
//   P(n) = e^{-c/(1+t)} t^n (1+t)^{-(n+1)} L_n(-c/(t(1+t))),
// with mean c + t and variance t(t+1) + c(2t+1). L_n(-x) is positive and
// growing in n, so running the three-term Laguerre recurrence on the ratio
// L_{n+1}/L_n is forward-stable; together with log-space accumulation every
// bin is exact to rounding in a single O(n_max) pass.
inline PhotonDistribution displaced_thermal_dist(double coherent_mean, double thermal_mean,
                                                 int n_max) {
    if (coherent_mean < 0.0 || thermal_mean < 0.0)
        throw std::domain_error("displaced_thermal_dist: negative mean");
    if (n_max < 0) throw std::invalid_argument("displaced_thermal_dist: negative n_max");
    if (thermal_mean == 0.0) return coherent_number_dist(coherent_mean, n_max);
    if (coherent_mean == 0.0) return thermal_number_dist(thermal_mean, n_max);
    const double x = coherent_mean / (thermal_mean * (1.0 + thermal_mean));
    const double log_t = std::log(thermal_mean);
    const double log_t1 = std::log(1.0 + thermal_mean);
    const double base = -coherent_mean / (1.0 + thermal_mean);
    PhotonDistribution d;
    d.probs.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
    d.probs[0] = std::exp(base - log_t1);
    double log_laguerre = 0.0;   // ln L_n(-x), n = 0
    double ratio = 1.0 + x;      // L_1 / L_0
    for (int n = 1; n <= n_max; ++n) {
        log_laguerre += std::log(ratio);
        d.probs[static_cast<std::size_t>(n)] =
            std::exp(base + n * log_t - (n + 1.0) * log_t1 + log_laguerre);
        ratio = ((2.0 * n + 1.0 + x) - n / ratio) / (n + 1.0);
    }
    finalize_truncation(d);
    return d;
}

// Default cutoff rule: generous Gaussian-tail headroom above the most
// energetic state of the experiment.
inline int default_n_max(double mean, double variance) {
    const double v = variance > 0.0 ? variance : 0.0;
    return static_cast<int>(std::ceil(mean + 10.0 * std::sqrt(v)));
}

// Copy extended with zero bins up to the requested cutoff; mass, tail and
// warning flags are unchanged. Shrinking is refused so mass never vanishes
// silently.
inline PhotonDistribution padded_to(const PhotonDistribution& d, int n_max) {
    if (n_max < d.n_max()) throw std::invalid_argument("padded_to: would truncate");
    PhotonDistribution out = d;
    out.probs.resize(static_cast<std::size_t>(n_max) + 1, 0.0);
    return out;
}

// Half the L1 distance between two distributions, including their truncated
// tail masses; distributions of different length are zero-padded.
inline double total_variation(const PhotonDistribution& a, const PhotonDistribution& b) {
    const std::size_t n = std::max(a.probs.size(), b.probs.size());
    KahanSum s;
    for (std::size_t i = 0; i < n; ++i) {
        const double pa = i < a.probs.size() ? a.probs[i] : 0.0;
        const double pb = i < b.probs.size() ? b.probs[i] : 0.0;
        s.add(std::abs(pa - pb));
    }
    s.add(std::abs(a.tail_mass - b.tail_mass));
    return 0.5 * s.value();
}

}  // namespace ampsim
