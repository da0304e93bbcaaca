#pragma once

// Euler-Maruyama engine for phase-space Langevin dynamics in the complex
// amplitude u. The generator is written in the Fokker-Planck normal form
//
//   dW/dt = d_u(u Q_u W) + d_u*(u* Q_u* W)
//         + d2_uu(D_uu W) + d2_u*u*(D_uu* W) + 2 d2_uu*(D_uustar W)
//
// which in real coordinates u = x + iy maps to the diffusion matrix
//   D_xx = (D_uustar + Re D_uu)/2,  D_yy = (D_uustar - Re D_uu)/2,
//   D_xy = Im(D_uu)/2,
// and to the Ito update
//   u' = u - u Q_u dt + B xi sqrt(dt),   B B^T = 2 D.
// The factor 2 comes from the chain rule: 2 d2_uu* = (d2_xx + d2_yy)/2, so the
// per-quadrature Fokker-Planck coefficient is D_uustar/2, i.e. a noise
// variance rate of 2 D_xx per quadrature. Constant-coefficient runs then
// reproduce the closed-form propagators exactly (see gaussian_channel.hpp and
// the oracle tests).
//
// B is the symmetric square root from the eigendecomposition of 2D, not a
// Cholesky factor, so the update inherits the reflection symmetry of the
// generator exactly when D_xy = 0. Diffusion is evaluated at the step's start
// point (Ito convention). A negative diffusion eigenvalue beyond rounding is
// a hard error: it flags leaving the diffusive (Wigner-positive) region and
// must not be clamped silently.

#include <cmath>
#include <complex>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace ampsim {

struct DriftDiffusion {
    std::complex<double> q_u;    // drift coefficient, field is u * q_u
    std::complex<double> d_uu;   // phase-sensitive diffusion component
    double d_uustar = 0.0;       // phase-insensitive diffusion component
};

struct Sym2 {
    double xx = 0.0, xy = 0.0, yy = 0.0;
};

struct Eig2 {
    double lo = 0.0, hi = 0.0;
};

class NonDiffusiveRegion : public std::runtime_error {
public:
    NonDiffusiveRegion(std::complex<double> u, Eig2 eigs, std::string context = {})
        : std::runtime_error(format(u, eigs, context)), u_(u), eigs_(eigs) {}

    std::complex<double> where() const { return u_; }
    Eig2 eigenvalues() const { return eigs_; }

private:
    static std::string format(std::complex<double> u, Eig2 e, const std::string& ctx) {
        std::ostringstream os;
        os << "diffusion matrix not positive semidefinite at u = (" << u.real() << ", "
           << u.imag() << "), eigenvalues " << e.lo << ", " << e.hi;
        if (!ctx.empty()) os << " [" << ctx << "]";
        return os.str();
    }

    std::complex<double> u_;
    Eig2 eigs_;
};

inline Sym2 real_diffusion_matrix(const DriftDiffusion& dd) {
    return {0.5 * (dd.d_uustar + dd.d_uu.real()),
            0.5 * dd.d_uu.imag(),
            0.5 * (dd.d_uustar - dd.d_uu.real())};
}

inline Eig2 eigenvalues(const Sym2& m) {
    const double half_tr = 0.5 * (m.xx + m.yy);
    const double disc = std::hypot(0.5 * (m.xx - m.yy), m.xy);
    return {half_tr - disc, half_tr + disc};
}

// Symmetric factor B with B B^T = 2 m. Eigenvalues in [-1e-12, 0) are treated
// as rounding and clamped; anything lower throws.
inline Sym2 noise_factor(const Sym2& m, std::complex<double> u_context) {
    Eig2 e = eigenvalues(m);
    if (e.lo < -1e-12) throw NonDiffusiveRegion(u_context, e);
    const double lo = e.lo > 0.0 ? e.lo : 0.0;
    const double slo = std::sqrt(2.0 * lo);
    const double shi = std::sqrt(2.0 * e.hi);
    // Eigenvector angle of the larger eigenvalue.
    const double a = m.xx - m.yy;
    if (a == 0.0 && m.xy == 0.0) {
        const double s = std::sqrt(2.0 * (m.xx > 0.0 ? m.xx : 0.0));
        return {s, 0.0, s};
    }
    const double theta = 0.5 * std::atan2(2.0 * m.xy, a);
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * c * shi + s * s * slo,
            c * s * (shi - slo),
            s * s * shi + c * c * slo};
}

// One Ito step. noise is a pair of independent standard normal draws.
template <typename Field>
std::complex<double> em_step_with(std::complex<double> u, const Field& field, double dt,
                                  std::pair<double, double> noise) {
    const DriftDiffusion dd = field.coefficients(u);
    const Sym2 b = noise_factor(real_diffusion_matrix(dd), u);
    const double root_dt = std::sqrt(dt);
    const std::complex<double> drift = -u * dd.q_u * dt;
    const double nx = (b.xx * noise.first + b.xy * noise.second) * root_dt;
    const double ny = (b.xy * noise.first + b.yy * noise.second) * root_dt;
    return u + drift + std::complex<double>(nx, ny);
}

// Constant drift and diffusion; the bridge between the stochastic engine and
// the closed-form Gaussian propagators.
struct ConstantCoefficients {
    double q = 0.0;    // drift rate
    double d_s = 0.0;  // phase-insensitive diffusion
    DriftDiffusion coefficients(std::complex<double>) const { return {{q, 0.0}, {0.0, 0.0}, d_s}; }
};

}  // namespace ampsim
