#pragma once

// Entropies, mutual information, bit error rate, and optimal threshold
// decoding for the two-hypothesis direct-detection channel.
//
// Conventions: logarithms are base 2 and 0*log(0) = 0. The binary channel
// carries equal priors. The decision rule is "0" iff n <= theta, with BER
// ties broken toward the smallest threshold so reports are deterministic.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "photon_dist.hpp"

namespace ampsim {

struct BinaryErrorPair {
    double q01 = 0.0;  // P(detect "0" | sent "1")
    double q10 = 0.0;  // P(detect "1" | sent "0")
};

struct DiscreteChannel {
    std::vector<double> priors;                    // p_j
    std::vector<std::vector<double>> conditionals; // Q_{k|j}, row j = input symbol
};

struct ThresholdDecision {
    int threshold = 0;
    double ber = 0.0;
    BinaryErrorPair errors;
};

inline void validate(const BinaryErrorPair& e) {
    if (!(e.q01 >= 0.0 && e.q01 <= 1.0 && e.q10 >= 0.0 && e.q10 <= 1.0))
        throw std::invalid_argument("BinaryErrorPair: probabilities must lie in [0,1]");
}

inline void validate(const DiscreteChannel& ch) {
    constexpr double tol = 1e-12;
    if (ch.priors.empty() || ch.conditionals.size() != ch.priors.size())
        throw std::invalid_argument("DiscreteChannel: shape mismatch");
    double psum = 0.0;
    for (double p : ch.priors) {
        if (p < 0.0) throw std::invalid_argument("DiscreteChannel: negative prior");
        psum += p;
    }
    if (std::abs(psum - 1.0) > tol)
        throw std::invalid_argument("DiscreteChannel: priors do not sum to 1");
    const std::size_t k = ch.conditionals.front().size();
    for (const auto& row : ch.conditionals) {
        if (row.size() != k) throw std::invalid_argument("DiscreteChannel: ragged matrix");
        double rsum = 0.0;
        for (double q : row) {
            if (q < 0.0) throw std::invalid_argument("DiscreteChannel: negative entry");
            rsum += q;
        }
        if (std::abs(rsum - 1.0) > tol)
            throw std::invalid_argument("DiscreteChannel: row does not sum to 1");
    }
}

namespace detail {
inline double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }
}

// Binary entropy in bits.
inline double binary_entropy(double p) {
    return -detail::xlog2x(p) - detail::xlog2x(1.0 - p);
}

// I(X;Y) = sum_jk p_j Q_kj log2(Q_kj / q_k) with q_k the output marginal.
inline double discrete_mutual_information(const DiscreteChannel& ch) {
    validate(ch);
    const std::size_t nk = ch.conditionals.front().size();
    std::vector<double> marginal(nk, 0.0);
    for (std::size_t j = 0; j < ch.priors.size(); ++j)
        for (std::size_t k = 0; k < nk; ++k)
            marginal[k] += ch.priors[j] * ch.conditionals[j][k];
    double info = 0.0;
    for (std::size_t j = 0; j < ch.priors.size(); ++j)
        for (std::size_t k = 0; k < nk; ++k) {
            const double joint = ch.priors[j] * ch.conditionals[j][k];
            if (joint > 0.0) info += joint * std::log2(ch.conditionals[j][k] / marginal[k]);
        }
    return info;
}

// Equal-prior binary channel: I = H(Y) - H(Y|X).
inline double binary_mutual_information(const BinaryErrorPair& e) {
    validate(e);
    const double detect1 = 0.5 * (e.q10 + 1.0 - e.q01);
    return binary_entropy(detect1) - 0.5 * (binary_entropy(e.q10) + binary_entropy(e.q01));
}

inline double ber(const BinaryErrorPair& e) {
    validate(e);
    return 0.5 * (e.q01 + e.q10);
}

// Residual of the small-error identity I ~= 1 - B; shrinks with the errors.
inline double small_error_expansion_check(const BinaryErrorPair& e) {
    return std::abs(binary_mutual_information(e) - (1.0 - ber(e)));
}

// Scans every integer cut point; "0" iff n <= theta. Deterministic: the
// smallest minimizing threshold is returned.
inline ThresholdDecision optimal_threshold(const PhotonDistribution& p0,
                                           const PhotonDistribution& p1) {
    if (p0.probs.size() != p1.probs.size())
        throw std::invalid_argument("optimal_threshold: distributions must share n_max");
    if (p0.probs.empty())
        throw std::invalid_argument("optimal_threshold: empty distribution");
    const int n_max = p0.n_max();
    ThresholdDecision best;
    best.ber = std::numeric_limits<double>::infinity();
    double cum0 = 0.0;  // sum_{n<=theta} p0
    double cum1 = 0.0;  // sum_{n<=theta} p1
    for (int theta = 0; theta <= n_max; ++theta) {
        cum0 += p0.probs[theta];
        cum1 += p1.probs[theta];
        const double q01 = cum1;
        const double q10 = 1.0 - cum0;
        const double b = 0.5 * (q01 + q10);
        if (b < best.ber) {
            best.ber = b;
            best.threshold = theta;
            best.errors = {q01, q10};
        }
    }
    return best;
}

// I = (1/2) log2(1 + delta^2/Delta^2) for the Gaussian channel.
inline double gaussian_mutual_information(double signal_var, double noise_var) {
    if (noise_var <= 0.0)
        throw std::domain_error("gaussian_mutual_information: noise variance must be positive");
    if (signal_var < 0.0)
        throw std::domain_error("gaussian_mutual_information: negative signal variance");
    return 0.5 * std::log2(1.0 + signal_var / noise_var);
}

// B = 1 - Phi(sqrt(snr/8)) with Phi the standard normal CDF, so snr = 0
// gives B = 1/2. Implemented through erfc for full double accuracy.
inline double gaussian_ber(double snr) {
    if (snr < 0.0) throw std::domain_error("gaussian_ber: negative snr");
    return 0.5 * std::erfc(std::sqrt(snr / 8.0) / std::sqrt(2.0));
}

}  // namespace ampsim
