#pragma once

// Monte Carlo wave-function integration of the one-atom laser master equation,
// used as an independent oracle for the saturable-laser channel. The joint
// atom-field state lives on a truncated Fock ladder; the Lindblad channels are
// atomic pumping, atomic decay, pure dephasing, and cavity decay, plus the
// Jaynes-Cummings style exchange Hamiltonian H = i g (sigma+ a - a^dag sigma-).
//
// The no-jump propagator exp(-i H_eff dt) is block-diagonal over the pairs
// {|e,n>, |g,n+1>} (plus two decoupled corner states), so it is precomputed
// once as exact 2x2 exponentials and each step is a single sweep over the
// ladder. Jumps are resolved to first order per step: the jump probability is
// the norm loss of the no-jump step, the channel is chosen proportionally to
// its rate-weighted population in the pre-step state, and the collapse acts on
// the pre-step state.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "parallel.hpp"
#include "laser.hpp"
#include "photon_dist.hpp"
#include "rng.hpp"

namespace ampsim {

struct JointStateVector {
    std::vector<std::complex<double>> amplitudes;  // [atom*(n_max+1) + n], atom 0 = excited
    int n_max = 0;

    std::size_t dim() const { return amplitudes.size(); }
    std::size_t fock_dim() const { return static_cast<std::size_t>(n_max) + 1; }

    std::complex<double>& excited(int n) { return amplitudes[static_cast<std::size_t>(n)]; }
    std::complex<double>& ground(int n) { return amplitudes[fock_dim() + n]; }
    std::complex<double> excited(int n) const { return amplitudes[static_cast<std::size_t>(n)]; }
    std::complex<double> ground(int n) const { return amplitudes[fock_dim() + n]; }

    double norm_sq() const {
        KahanSum s;
        for (const auto& a : amplitudes) s.add(std::norm(a));
        return s.value();
    }

    void normalize() {
        const double n2 = norm_sq();
        if (!(n2 > 0.0)) throw std::runtime_error("JointStateVector: cannot normalize zero state");
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& a : amplitudes) a *= inv;
    }
};

inline JointStateVector joint_basis_state(int n_max, bool atom_excited, int n) {
    if (n_max < 0 || n < 0 || n > n_max)
        throw std::invalid_argument("joint_basis_state: photon index outside cutoff");
    JointStateVector psi;
    psi.n_max = n_max;
    psi.amplitudes.assign(2 * (static_cast<std::size_t>(n_max) + 1), 0.0);
    (atom_excited ? psi.excited(n) : psi.ground(n)) = 1.0;
    return psi;
}

// Marginal photon-number distribution of the field, tracing out the atom.
inline PhotonDistribution field_distribution(const JointStateVector& psi) {
    PhotonDistribution d;
    d.probs.resize(psi.fock_dim());
    for (int n = 0; n <= psi.n_max; ++n)
        d.probs[static_cast<std::size_t>(n)] = std::norm(psi.excited(n)) + std::norm(psi.ground(n));
    return d;
}

inline double mean_photons(const JointStateVector& psi) {
    KahanSum s;
    for (int n = 1; n <= psi.n_max; ++n)
        s.add(n * (std::norm(psi.excited(n)) + std::norm(psi.ground(n))));
    return s.value();
}

enum class ChannelKind { pump_up, pump_down, dephase, cavity };

struct JumpChannel {
    ChannelKind kind;
    double rate;
    const char* label;
};

struct JumpOperatorSet {
    int n_max = 0;
    double coupling = 0.0;     // g
    double rate_up = 0.0;      // gamma_par (1 + sigma0) / 2, collapse sigma+
    double rate_down = 0.0;    // gamma_par (1 - sigma0) / 2, collapse sigma-
    double rate_z = 0.0;       // (gamma_perp - gamma_par/2) / 2, collapse sigma_z
    double rate_cavity = 0.0;  // gamma, collapse a
    std::vector<JumpChannel> channels;  // the nonzero-rate channels only
};

// Total decay rate of basis state i under the anti-Hermitian part of the
// effective generator; A_k^dag A_k is diagonal for every channel here.
inline double decay_rate(const JumpOperatorSet& ops, bool atom_excited, int n) {
    return (atom_excited ? ops.rate_down : ops.rate_up) + ops.rate_z + ops.rate_cavity * n;
}

// Upper bound on the one-step jump probability per unit time.
inline double max_jump_rate(const JumpOperatorSet& ops) {
    return std::max(ops.rate_up, ops.rate_down) + ops.rate_z + ops.rate_cavity * ops.n_max;
}

namespace detail {

// Applies one collapse operator (without its rate weight) to src.
inline void apply_channel(const JointStateVector& src, ChannelKind kind, JointStateVector& dst) {
    const int top = src.n_max;
    switch (kind) {
        case ChannelKind::pump_up:  // sigma+: |g,n> -> |e,n>
            for (int n = 0; n <= top; ++n) {
                dst.excited(n) = src.ground(n);
                dst.ground(n) = 0.0;
            }
            break;
        case ChannelKind::pump_down:  // sigma-: |e,n> -> |g,n>
            for (int n = 0; n <= top; ++n) {
                dst.ground(n) = src.excited(n);
                dst.excited(n) = 0.0;
            }
            break;
        case ChannelKind::dephase:  // sigma_z
            for (int n = 0; n <= top; ++n) {
                dst.excited(n) = src.excited(n);
                dst.ground(n) = -src.ground(n);
            }
            break;
        case ChannelKind::cavity:  // a: |a,n+1> -> sqrt(n+1) |a,n>
            for (int n = 0; n < top; ++n) {
                const double r = std::sqrt(n + 1.0);
                dst.excited(n) = r * src.excited(n + 1);
                dst.ground(n) = r * src.ground(n + 1);
            }
            dst.excited(top) = 0.0;
            dst.ground(top) = 0.0;
            break;
    }
}

// Rate-weighted population of the channel's A^dag A in psi.
inline double channel_weight(const JointStateVector& psi, const JumpChannel& ch) {
    KahanSum s;
    switch (ch.kind) {
        case ChannelKind::pump_up:
            for (int n = 0; n <= psi.n_max; ++n) s.add(std::norm(psi.ground(n)));
            break;
        case ChannelKind::pump_down:
            for (int n = 0; n <= psi.n_max; ++n) s.add(std::norm(psi.excited(n)));
            break;
        case ChannelKind::dephase:
            return ch.rate * psi.norm_sq();
        case ChannelKind::cavity:
            return ch.rate * mean_photons(psi);
    }
    return ch.rate * s.value();
}

}  // namespace detail

inline void verify_generator_consistency(const JumpOperatorSet& ops) {
    JointStateVector probe = joint_basis_state(ops.n_max, false, 0);
    JointStateVector image = probe;
    for (int a = 0; a < 2; ++a) {
        for (int n = 0; n <= ops.n_max; ++n) {
            std::fill(probe.amplitudes.begin(), probe.amplitudes.end(), 0.0);
            (a == 0 ? probe.excited(n) : probe.ground(n)) = 1.0;
            double from_channels = 0.0;
            for (const auto& ch : ops.channels) {
                detail::apply_channel(probe, ch.kind, image);
                from_channels += ch.rate * image.norm_sq();
            }
            const double from_generator = decay_rate(ops, a == 0, n);
            const double scale = std::max(1.0, std::abs(from_generator));
            if (std::abs(from_channels - from_generator) > 1e-12 * scale)
                throw std::logic_error("JumpOperatorSet: channel sum disagrees with the "
                                       "effective generator at basis state (" +
                                       std::to_string(a) + ", " + std::to_string(n) + ")");
        }
    }
}

// Builds the operator set from explicit microscopic rates.
inline JumpOperatorSet build_generators_rates(double gamma_par, double gamma_perp, double g,
                                              double gamma, double sigma0, int n_max) {
    if (gamma_par < 0.0 || g < 0.0)
        throw std::invalid_argument("build_generators: negative rate");
    if (!(gamma > 0.0)) throw std::invalid_argument("build_generators: gamma must be positive");
    if (!(std::abs(sigma0) <= 1.0))
        throw std::invalid_argument("build_generators: sigma0 must lie in [-1, 1]");
    if (n_max < 1) throw std::invalid_argument("build_generators: n_max must be >= 1");
    if (gamma_perp < 0.5 * gamma_par)
        throw std::invalid_argument("build_generators: gamma_perp < gamma_par/2 gives a "
                                    "negative dephasing rate");
    JumpOperatorSet ops;
    ops.n_max = n_max;
    ops.coupling = g;
    ops.rate_up = 0.5 * gamma_par * (1.0 + sigma0);
    ops.rate_down = 0.5 * gamma_par * (1.0 - sigma0);
    ops.rate_z = 0.5 * (gamma_perp - 0.5 * gamma_par);
    ops.rate_cavity = gamma;
    if (ops.rate_up > 0.0) ops.channels.push_back({ChannelKind::pump_up, ops.rate_up, "pump up"});
    if (ops.rate_down > 0.0)
        ops.channels.push_back({ChannelKind::pump_down, ops.rate_down, "pump down"});
    if (ops.rate_z > 0.0) ops.channels.push_back({ChannelKind::dephase, ops.rate_z, "dephasing"});
    ops.channels.push_back({ChannelKind::cavity, ops.rate_cavity, "cavity decay"});
    verify_generator_consistency(ops);
    return ops;
}

// Reconstructs gamma_par = 4 C gamma n_s / N, gamma_perp = 2 C gamma n_s /
// (f N), g = sqrt(C gamma gamma_perp / N) from the macroscopic parameters.
// Only the one-atom ladder is implemented.
inline JumpOperatorSet build_generators(const LaserParams& p, int n_max) {
    validate(p);
    if (p.N != 1)
        throw std::invalid_argument("build_generators: only the one-atom ladder is supported");
    const double gamma_par = 4.0 * p.C * p.gamma * p.n_s / p.N;
    const double gamma_perp = 2.0 * p.C * p.gamma * p.n_s / (p.f * p.N);
    const double g = std::sqrt(p.C * p.gamma * gamma_perp / p.N);
    return build_generators_rates(gamma_par, gamma_perp, g, p.gamma, p.sigma0, n_max);
}

class CutoffError : public std::runtime_error {
public:
    CutoffError(int n_max, double top_population, int suggested)
        : std::runtime_error("field cutoff saturated: population " +
                             std::to_string(top_population) + " at n_max = " +
                             std::to_string(n_max) + "; retry with n_max >= " +
                             std::to_string(suggested)),
          suggested_n_max(suggested) {}

    int suggested_n_max;
};

inline constexpr double cutoff_population_limit = 1e-6;

inline void check_cutoff(const JointStateVector& psi) {
    const double top = std::norm(psi.excited(psi.n_max)) + std::norm(psi.ground(psi.n_max));
    if (top > cutoff_population_limit)
        throw CutoffError(psi.n_max, top, psi.n_max + psi.n_max / 2 + 1);
}

class QjEngine {
public:
    QjEngine(JumpOperatorSet ops, double dt) : ops_(std::move(ops)), dt_(dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("QjEngine: dt must be positive");
        if (max_jump_rate(ops_) * dt >= 0.1)
            throw std::invalid_argument("QjEngine: dt too large, one-step jump probability "
                                        "bound is " +
                                        std::to_string(max_jump_rate(ops_) * dt) +
                                        " but must stay below 0.1");
        build_blocks();
    }

    double dt() const { return dt_; }
    const JumpOperatorSet& ops() const { return ops_; }

    void advance(JointStateVector& psi, RngStream& rng, long n_steps) const {
        advance(psi, rng, n_steps, 0, [](const JointStateVector&, long) {});
    }

    // Runs n_steps; after every `stride` steps (stride > 0) the hook is called
    // with the current normalized state and the 1-based step index.
    template <class Hook>
    void advance(JointStateVector& psi, RngStream& rng, long n_steps, long stride,
                 Hook&& hook) const {
        if (psi.n_max != ops_.n_max)
            throw std::invalid_argument("QjEngine: state cutoff does not match operator set");
        JointStateVector next = psi;
        for (long k = 1; k <= n_steps; ++k) {
            step(psi, next, rng);
            psi.amplitudes.swap(next.amplitudes);
            if (stride > 0 && k % stride == 0) hook(psi, k);
        }
    }

private:
    struct Block {
        double p11, p12, p21, p22;
    };

    // exp(dt M) for the real 2x2 generator M of the pair {|e,n>, |g,n+1>}.
    static Block exp_block(double m11, double m12, double m21, double m22) {
        const double mu = 0.5 * (m11 + m22);
        const double d = 0.5 * (m11 - m22);
        const double s2 = d * d + m12 * m21;
        double ch, shs;  // cosh(s), sinh(s)/s continued through s^2 < 0
        if (std::abs(s2) < 1e-12) {
            ch = 1.0 + 0.5 * s2 + s2 * s2 / 24.0;
            shs = 1.0 + s2 / 6.0 + s2 * s2 / 120.0;
        } else if (s2 > 0.0) {
            const double s = std::sqrt(s2);
            ch = std::cosh(s);
            shs = std::sinh(s) / s;
        } else {
            const double s = std::sqrt(-s2);
            ch = std::cos(s);
            shs = std::sin(s) / s;
        }
        const double e = std::exp(mu);
        return {e * (ch + shs * d), e * shs * m12, e * shs * m21, e * (ch - shs * d)};
    }

    void build_blocks() {
        const int top = ops_.n_max;
        blocks_.resize(static_cast<std::size_t>(top));
        for (int n = 0; n < top; ++n) {
            const double off = ops_.coupling * std::sqrt(n + 1.0) * dt_;
            blocks_[static_cast<std::size_t>(n)] =
                exp_block(-0.5 * decay_rate(ops_, true, n) * dt_, off, -off,
                          -0.5 * decay_rate(ops_, false, n + 1) * dt_);
        }
        ground0_ = std::exp(-0.5 * decay_rate(ops_, false, 0) * dt_);
        excited_top_ = std::exp(-0.5 * decay_rate(ops_, true, top) * dt_);
    }

    // No-jump half of the step: dst = exp(-i H_eff dt) src. Returns the
    // surviving norm squared.
    double no_jump(const JointStateVector& src, JointStateVector& dst) const {
        const int top = ops_.n_max;
        double surviving = std::norm(src.ground(0)) * ground0_ * ground0_ +
                           std::norm(src.excited(top)) * excited_top_ * excited_top_;
        dst.ground(0) = ground0_ * src.ground(0);
        dst.excited(top) = excited_top_ * src.excited(top);
        for (int n = 0; n < top; ++n) {
            const Block& b = blocks_[static_cast<std::size_t>(n)];
            const std::complex<double> e = src.excited(n);
            const std::complex<double> g = src.ground(n + 1);
            const std::complex<double> e2 = b.p11 * e + b.p12 * g;
            const std::complex<double> g2 = b.p21 * e + b.p22 * g;
            dst.excited(n) = e2;
            dst.ground(n + 1) = g2;
            surviving += std::norm(e2) + std::norm(g2);
        }
        return surviving;
    }

    void step(const JointStateVector& cur, JointStateVector& next, RngStream& rng) const {
        const double surviving = no_jump(cur, next);
        const double p_jump = 1.0 - surviving;
        if (rng.uniform01() < p_jump) {
            double total = 0.0;
            double weights[4];
            for (std::size_t c = 0; c < ops_.channels.size(); ++c) {
                weights[c] = detail::channel_weight(cur, ops_.channels[c]);
                total += weights[c];
            }
            double pick = rng.uniform01() * total;
            std::size_t chosen = 0;
            for (; chosen + 1 < ops_.channels.size(); ++chosen) {
                pick -= weights[chosen];
                if (pick <= 0.0) break;
            }
            detail::apply_channel(cur, ops_.channels[chosen].kind, next);
            next.normalize();
        } else {
            const double inv = 1.0 / std::sqrt(surviving);
            for (auto& a : next.amplitudes) a *= inv;
        }
    }

    JumpOperatorSet ops_;
    double dt_;
    std::vector<Block> blocks_;
    double ground0_ = 1.0, excited_top_ = 1.0;
};

struct QjTimeSeries {
    std::vector<double> times;
    std::vector<double> mean_photons;
    std::vector<PhotonDistribution> snapshots;
};

// Single stochastic trajectory with periodic field snapshots. The initial
// state is recorded as the first snapshot.
inline QjTimeSeries qj_trajectory(const JointStateVector& initial, const JumpOperatorSet& ops,
                                  double dt, double t_total, std::uint64_t seed,
                                  long snapshot_stride = 0) {
    if (!(t_total > 0.0)) throw std::invalid_argument("qj_trajectory: t_total must be positive");
    const long n_steps = std::max(1L, std::lround(t_total / dt));
    const double h = t_total / static_cast<double>(n_steps);
    if (snapshot_stride <= 0) snapshot_stride = std::max(1L, n_steps / 1000);
    QjEngine engine(ops, h);
    JointStateVector psi = initial;
    psi.normalize();
    RngStream rng(seed, 0);
    QjTimeSeries out;
    out.times.push_back(0.0);
    out.mean_photons.push_back(mean_photons(psi));
    out.snapshots.push_back(field_distribution(psi));
    engine.advance(psi, rng, n_steps, snapshot_stride, [&](const JointStateVector& s, long k) {
        check_cutoff(s);
        out.times.push_back(static_cast<double>(k) * h);
        out.mean_photons.push_back(mean_photons(s));
        out.snapshots.push_back(field_distribution(s));
    });
    return out;
}

// Photon distribution with Monte Carlo uncertainty attached.
struct SampledDistribution {
    PhotonDistribution dist;
    std::vector<double> std_error;  // per bin
    double n_effective = 0.0;       // autocorrelation-corrected sample count
    double tau_int = 0.0;           // integrated autocorrelation time (time units)
};

namespace detail {

// Integrated autocorrelation time of a series, in sample units (>= 1/2).
// Truncated at the first lag whose autocorrelation falls below 0.05, a
// standard bias-variance compromise for smooth laser intensity records.
inline double integrated_autocorr(const std::vector<double>& x) {
    const std::size_t k = x.size();
    if (k < 4) return 0.5;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    if (!(var > 0.0)) return 0.5;
    double tau = 0.5;
    for (std::size_t lag = 1; lag <= k / 4; ++lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < k; ++i) c += (x[i] - mean) * (x[i + lag] - mean);
        const double rho = c / var;
        if (rho < 0.05) break;
        tau += rho;
    }
    return tau;
}

}  // namespace detail

// Time-and-ensemble average of the stationary photon distribution. Every
// trajectory starts from vacuum and ground, burns in, then contributes
// regularly spaced snapshots. Error bars come from the spread between
// trajectory means (no within-trajectory independence is assumed); the
// effective sample count is reported from the measured autocorrelation of
// the photon-number record.
inline SampledDistribution stationary_number_dist(const LaserParams& p, int n_max, double burn_in,
                                                  double t_avg, std::size_t n_traj,
                                                  std::uint64_t seed, double dt = 0.0,
                                                  double snapshot_every = 0.0,
                                                  unsigned n_threads = 1) {
    const JumpOperatorSet ops = build_generators(p, n_max);
    const double gamma_par = ops.rate_up + ops.rate_down;
    const double gamma_perp = 2.0 * ops.rate_z + 0.5 * gamma_par;
    const double slowest = std::min({gamma_par, gamma_perp, p.gamma});
    if (burn_in * slowest < 10.0)
        throw std::invalid_argument("stationary_number_dist: burn_in must cover at least "
                                    "10 lifetimes of the slowest decay channel");
    if (n_traj < 2) throw std::invalid_argument("stationary_number_dist: need >= 2 trajectories");
    if (dt <= 0.0) dt = 0.05 / max_jump_rate(ops);
    if (snapshot_every <= 0.0) snapshot_every = 0.5 / p.gamma;
    const QjEngine engine(ops, dt);
    const long stride = std::max(1L, std::lround(snapshot_every / dt));
    const long n_burn = std::lround(burn_in / dt);
    const long n_snapshots = std::max(1L, std::lround(t_avg / dt) / stride);

    const std::size_t bins = static_cast<std::size_t>(n_max) + 1;
    std::vector<std::vector<double>> traj_dist(n_traj, std::vector<double>(bins, 0.0));
    std::vector<std::vector<double>> traj_series(n_traj);
    std::exception_ptr failure = nullptr;
    std::mutex failure_mutex;
    for_each_chunk(n_traj, 1, n_threads, [&](std::size_t, std::size_t first, std::size_t last) {
        try {
            for (std::size_t i = first; i < last; ++i) {
                RngStream rng(seed, i);
                JointStateVector psi = joint_basis_state(n_max, false, 0);
                engine.advance(psi, rng, n_burn);
                check_cutoff(psi);
                auto& dist = traj_dist[i];
                auto& series = traj_series[i];
                series.reserve(static_cast<std::size_t>(n_snapshots));
                engine.advance(psi, rng, n_snapshots * stride, stride,
                               [&](const JointStateVector& s, long) {
                                   check_cutoff(s);
                                   KahanSum mn;
                                   for (int n = 0; n <= s.n_max; ++n) {
                                       const double pr =
                                           std::norm(s.excited(n)) + std::norm(s.ground(n));
                                       dist[static_cast<std::size_t>(n)] += pr;
                                       mn.add(n * pr);
                                   }
                                   series.push_back(mn.value());
                               });
                const double inv = 1.0 / static_cast<double>(n_snapshots);
                for (double& v : dist) v *= inv;
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);

    SampledDistribution out;
    out.dist.probs.assign(bins, 0.0);
    out.std_error.assign(bins, 0.0);
    for (std::size_t b = 0; b < bins; ++b) {
        KahanSum s;
        for (std::size_t i = 0; i < n_traj; ++i) s.add(traj_dist[i][b]);
        out.dist.probs[b] = s.value() / static_cast<double>(n_traj);
    }
    for (std::size_t b = 0; b < bins; ++b) {
        KahanSum s;
        for (std::size_t i = 0; i < n_traj; ++i) {
            const double d = traj_dist[i][b] - out.dist.probs[b];
            s.add(d * d);
        }
        out.std_error[b] =
            std::sqrt(s.value() / static_cast<double>(n_traj * (n_traj - 1)));
    }
    finalize_truncation(out.dist);
    double n_eff = 0.0, tau_mean = 0.0;
    for (const auto& series : traj_series) {
        const double tau = detail::integrated_autocorr(series);
        n_eff += static_cast<double>(series.size()) / (2.0 * tau);
        tau_mean += tau;
    }
    out.tau_int = tau_mean / static_cast<double>(n_traj) * snapshot_every;
    out.n_effective = n_eff;
    return out;
}

struct DmOracleResult {
    PhotonDistribution field_dist;
    double max_trace_drift = 0.0;
    double max_herm_drift = 0.0;
};

namespace detail {

using Dense = std::vector<std::complex<double>>;

inline Dense dense_zero(std::size_t d) { return Dense(d * d, 0.0); }

inline Dense mat_mul(const Dense& a, const Dense& b, std::size_t d) {
    Dense c = dense_zero(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            const std::complex<double> aik = a[i * d + k];
            if (aik == std::complex<double>(0.0)) continue;
            for (std::size_t j = 0; j < d; ++j) c[i * d + j] += aik * b[k * d + j];
        }
    return c;
}

inline Dense dagger(const Dense& a, std::size_t d) {
    Dense c = dense_zero(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) c[j * d + i] = std::conj(a[i * d + j]);
    return c;
}

struct DenseLiouvillian {
    std::size_t d = 0;
    Dense hamiltonian;
    std::vector<Dense> collapse;       // sqrt(rate) A_k
    std::vector<Dense> collapse_dag;   // their adjoints
    std::vector<Dense> collapse_sq;    // rate A_k^dag A_k

    Dense apply(const Dense& r) const {
        const std::complex<double> mi(0.0, -1.0);
        Dense out = dense_zero(d);
        const Dense hr = mat_mul(hamiltonian, r, d);
        const Dense rh = mat_mul(r, hamiltonian, d);
        for (std::size_t i = 0; i < d * d; ++i) out[i] = mi * (hr[i] - rh[i]);
        for (std::size_t k = 0; k < collapse.size(); ++k) {
            const Dense ar = mat_mul(collapse[k], r, d);
            const Dense ara = mat_mul(ar, collapse_dag[k], d);
            const Dense sq_r = mat_mul(collapse_sq[k], r, d);
            const Dense r_sq = mat_mul(r, collapse_sq[k], d);
            for (std::size_t i = 0; i < d * d; ++i)
                out[i] += ara[i] - 0.5 * (sq_r[i] + r_sq[i]);
        }
        return out;
    }
};

inline DenseLiouvillian dense_liouvillian(const JumpOperatorSet& ops) {
    const std::size_t f = static_cast<std::size_t>(ops.n_max) + 1;
    const std::size_t d = 2 * f;
    const auto e_idx = [&](int n) { return static_cast<std::size_t>(n); };
    const auto g_idx = [&](int n) { return f + static_cast<std::size_t>(n); };
    DenseLiouvillian lv;
    lv.d = d;
    lv.hamiltonian = dense_zero(d);
    const std::complex<double> ig(0.0, ops.coupling);
    for (int n = 0; n < ops.n_max; ++n) {
        const double r = std::sqrt(n + 1.0);
        lv.hamiltonian[e_idx(n) * d + g_idx(n + 1)] = ig * r;   // i g sigma+ a
        lv.hamiltonian[g_idx(n + 1) * d + e_idx(n)] = -ig * r;  // -i g a^dag sigma-
    }
    for (const auto& ch : ops.channels) {
        Dense a = dense_zero(d);
        const double w = std::sqrt(ch.rate);
        switch (ch.kind) {
            case ChannelKind::pump_up:
                for (int n = 0; n <= ops.n_max; ++n) a[e_idx(n) * d + g_idx(n)] = w;
                break;
            case ChannelKind::pump_down:
                for (int n = 0; n <= ops.n_max; ++n) a[g_idx(n) * d + e_idx(n)] = w;
                break;
            case ChannelKind::dephase:
                for (int n = 0; n <= ops.n_max; ++n) {
                    a[e_idx(n) * d + e_idx(n)] = w;
                    a[g_idx(n) * d + g_idx(n)] = -w;
                }
                break;
            case ChannelKind::cavity:
                for (int n = 0; n < ops.n_max; ++n) {
                    const double r = w * std::sqrt(n + 1.0);
                    a[e_idx(n) * d + e_idx(n + 1)] = r;
                    a[g_idx(n) * d + g_idx(n + 1)] = r;
                }
                break;
        }
        lv.collapse.push_back(a);
        lv.collapse_dag.push_back(dagger(a, d));
        lv.collapse_sq.push_back(mat_mul(lv.collapse_dag.back(), a, d));
    }
    return lv;
}

}  // namespace detail

// Brute-force reference: fixed-step fourth-order integration of the full
// master equation on the dense joint density matrix, then a partial trace
// over the atom. Practical only at tiny cutoffs; that is its entire purpose.
inline DmOracleResult dm_integrate_oracle(const JumpOperatorSet& ops,
                                          const JointStateVector& initial, double t,
                                          double dt = 0.0) {
    if (ops.n_max > 6)
        throw std::invalid_argument("dm_integrate_oracle: dense integration is restricted "
                                    "to n_max <= 6");
    if (initial.n_max != ops.n_max)
        throw std::invalid_argument("dm_integrate_oracle: state cutoff mismatch");
    if (!(t > 0.0)) throw std::invalid_argument("dm_integrate_oracle: t must be positive");
    const double rate_scale = max_jump_rate(ops) + 2.0 * ops.coupling * std::sqrt(ops.n_max + 1.0);
    if (dt <= 0.0) dt = 0.02 / rate_scale;
    const long n_steps = std::max(1L, std::lround(t / dt));
    const double h = t / static_cast<double>(n_steps);

    const detail::DenseLiouvillian lv = detail::dense_liouvillian(ops);
    const std::size_t d = lv.d;
    JointStateVector psi = initial;
    psi.normalize();
    detail::Dense r = detail::dense_zero(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            r[i * d + j] = psi.amplitudes[i] * std::conj(psi.amplitudes[j]);

    DmOracleResult out;
    const std::size_t f = static_cast<std::size_t>(ops.n_max) + 1;
    const auto check_state = [&]() {
        KahanSum tr;
        for (std::size_t i = 0; i < d; ++i) tr.add(r[i * d + i].real());
        const double drift = std::abs(tr.value() - 1.0);
        out.max_trace_drift = std::max(out.max_trace_drift, drift);
        if (drift > 1e-8)
            throw std::runtime_error("dm_integrate_oracle: trace drift " +
                                     std::to_string(drift) + " signals an unstable step; "
                                     "reduce dt");
        for (std::size_t n = 0; n < f; ++n)
            for (std::size_t m = 0; m < f; ++m) {
                const std::complex<double> fnm = r[n * d + m] + r[(f + n) * d + (f + m)];
                const std::complex<double> fmn = r[m * d + n] + r[(f + m) * d + (f + n)];
                out.max_herm_drift =
                    std::max(out.max_herm_drift, std::abs(fnm - std::conj(fmn)));
            }
    };
    for (long k = 0; k < n_steps; ++k) {
        const detail::Dense k1 = lv.apply(r);
        detail::Dense tmp(d * d);
        for (std::size_t i = 0; i < d * d; ++i) tmp[i] = r[i] + 0.5 * h * k1[i];
        const detail::Dense k2 = lv.apply(tmp);
        for (std::size_t i = 0; i < d * d; ++i) tmp[i] = r[i] + 0.5 * h * k2[i];
        const detail::Dense k3 = lv.apply(tmp);
        for (std::size_t i = 0; i < d * d; ++i) tmp[i] = r[i] + h * k3[i];
        const detail::Dense k4 = lv.apply(tmp);
        for (std::size_t i = 0; i < d * d; ++i)
            r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        check_state();
    }

    out.field_dist.probs.resize(f);
    for (std::size_t n = 0; n < f; ++n)
        out.field_dist.probs[n] = r[n * d + n].real() + r[(f + n) * d + (f + n)].real();
    finalize_truncation(out.field_dist);
    return out;
}

inline PhotonDistribution dm_integrate_oracle(const LaserParams& p, int n_max, double t) {
    const JumpOperatorSet ops = build_generators(p, n_max);
    return dm_integrate_oracle(ops, joint_basis_state(n_max, false, 0), t).field_dist;
}

}  // namespace ampsim
