// Core equations of the three-variable social-feedback model
//
//   dT/dt = sigma * (I - T)
//   dI/dt = T * (r0 - M) - I
//   dM/dt = T * I - beta * M
//
// T is social transmission intensity, I is perceived infection, M is social
// memory. All closed forms in this header (equilibria, characteristic
// coefficients, thresholds, the absorbing ball) follow from these equations.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace timdyn {

using Vec3 = std::array<double, 3>;

/// 3x3 real matrix, row-major storage.
struct Mat3 {
    std::array<double, 9> m{};

    double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
    double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

    double trace() const { return m[0] + m[4] + m[8]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
                m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
                m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
    }
};

/// Model parameters (sigma, r0, beta). Construction rejects non-positive or
/// non-finite values; everything downstream may assume a valid triple.
class ParamSet {
  public:
    ParamSet(double sigma, double r0, double beta)
        : sigma_(sigma), r0_(r0), beta_(beta) {
        if (!(std::isfinite(sigma) && sigma > 0.0))
            throw std::invalid_argument("ParamSet: sigma must be positive and finite");
        if (!(std::isfinite(r0) && r0 > 0.0))
            throw std::invalid_argument("ParamSet: r0 must be positive and finite");
        if (!(std::isfinite(beta) && beta > 0.0))
            throw std::invalid_argument("ParamSet: beta must be positive and finite");
    }

    double sigma() const { return sigma_; }
    double r0() const { return r0_; }
    double beta() const { return beta_; }

    ParamSet with_r0(double r0) const { return ParamSet(sigma_, r0, beta_); }

  private:
    double sigma_, r0_, beta_;
};

/// A point (T, I, M) in phase space. Components must be finite.
class State {
  public:
    State(double transmission, double perception, double memory)
        : v_{transmission, perception, memory} {
        if (!(std::isfinite(transmission) && std::isfinite(perception) && std::isfinite(memory)))
            throw std::invalid_argument("State: components must be finite");
    }

    explicit State(const Vec3& v) : State(v[0], v[1], v[2]) {}

    double transmission() const { return v_[0]; }
    double perception() const { return v_[1]; }
    double memory() const { return v_[2]; }

    const Vec3& vec() const { return v_; }

  private:
    Vec3 v_;
};

enum class Branch { P0, PePlus, PeMinus };

inline const char* branch_name(Branch b) {
    switch (b) {
        case Branch::P0: return "P0";
        case Branch::PePlus: return "PePlus";
        case Branch::PeMinus: return "PeMinus";
    }
    return "?";
}

/// A located fixed point together with its branch identity.
struct Equilibrium {
    Branch branch;
    State point;
};

/// Coefficients of a monic cubic  x^3 + a1 x^2 + a2 x + a3.
struct CubicCoeffs {
    double a1, a2, a3;
};

/// The ball {V <= radius_sq} around (0, 0, center_m) that every trajectory
/// eventually enters and never leaves.  V decays at least at rate decay_m
/// outside it:  dV/dt <= -decay_m * V + offset_c.
struct AbsorbingBall {
    double center_m;   // a = sigma + r0
    double radius_sq;  // c / m
    double decay_m;    // m = min{2 sigma, 2, beta}
    double offset_c;   // c = beta * a^2
};

// --- vector field and Jacobian ---------------------------------------------

inline Vec3 vector_field(const ParamSet& p, const Vec3& x) {
    const double T = x[0], I = x[1], M = x[2];
    return {p.sigma() * (I - T), T * (p.r0() - M) - I, T * I - p.beta() * M};
}

inline Vec3 vector_field(const ParamSet& p, const State& x) {
    return vector_field(p, x.vec());
}

inline Mat3 jacobian(const ParamSet& p, const Vec3& x) {
    const double T = x[0], I = x[1], M = x[2];
    Mat3 j;
    j(0, 0) = -p.sigma(); j(0, 1) = p.sigma(); j(0, 2) = 0.0;
    j(1, 0) = p.r0() - M; j(1, 1) = -1.0;      j(1, 2) = -T;
    j(2, 0) = I;          j(2, 1) = T;         j(2, 2) = -p.beta();
    return j;
}

inline Mat3 jacobian(const ParamSet& p, const State& x) {
    return jacobian(p, x.vec());
}

// --- equilibria -------------------------------------------------------------

/// Pitchfork amplitude alpha(r0) = sqrt(beta * (r0 - 1)); requires r0 >= 1.
inline double pitchfork_amplitude(const ParamSet& p) {
    if (p.r0() < 1.0)
        throw std::domain_error("pitchfork_amplitude: defined only for r0 >= 1");
    return std::sqrt(p.beta() * (p.r0() - 1.0));
}

/// All equilibria, ordered [P0, PePlus, PeMinus].  The symmetric pair exists
/// only for r0 > 1; at r0 = 1 exactly only P0 is returned (the three branches
/// coincide there).
inline std::vector<Equilibrium> equilibria(const ParamSet& p) {
    std::vector<Equilibrium> out;
    out.push_back({Branch::P0, State(0.0, 0.0, 0.0)});
    if (p.r0() > 1.0) {
        const double alpha = pitchfork_amplitude(p);
        const double m = p.r0() - 1.0;
        out.push_back({Branch::PePlus, State(alpha, alpha, m)});
        out.push_back({Branch::PeMinus, State(-alpha, -alpha, m)});
    }
    return out;
}

// --- characteristic polynomial coefficients ---------------------------------

/// Characteristic coefficients of the Jacobian at the symmetric equilibria:
/// a1 = sigma + beta + 1, a2 = beta (sigma + r0), a3 = 2 beta sigma (r0 - 1).
/// Only meaningful where the branch exists, i.e. r0 > 1.
inline CubicCoeffs char_coeffs_nontrivial(const ParamSet& p) {
    if (!(p.r0() > 1.0))
        throw std::domain_error("char_coeffs_nontrivial: branch does not exist for r0 <= 1");
    return {p.sigma() + p.beta() + 1.0,
            p.beta() * (p.sigma() + p.r0()),
            2.0 * p.beta() * p.sigma() * (p.r0() - 1.0)};
}

/// Characteristic coefficients of the Jacobian at P0, from the block product
/// (x + beta) (x^2 + (sigma+1) x + sigma (1 - r0)).
inline CubicCoeffs char_coeffs_p0(const ParamSet& p) {
    const double s = p.sigma(), b = p.beta(), c = p.sigma() * (1.0 - p.r0());
    return {s + 1.0 + b, c + b * (s + 1.0), b * c};
}

// --- thresholds --------------------------------------------------------------

/// Oscillatory-instability threshold r_H = sigma (sigma + beta + 3) / (sigma - beta - 1).
/// Defined only when sigma > beta + 1; otherwise the symmetric branch never
/// destabilises and the result is empty.
inline std::optional<double> hopf_threshold(const ParamSet& p) {
    const double den = p.sigma() - p.beta() - 1.0;
    if (!(den > 0.0)) return std::nullopt;
    return p.sigma() * (p.sigma() + p.beta() + 3.0) / den;
}

// --- dissipativity certificate ----------------------------------------------

/// V(T, I, M) = T^2 + I^2 + (M - a)^2 with a = sigma + r0.
inline double lyapunov_v(const ParamSet& p, const Vec3& x) {
    const double a = p.sigma() + p.r0();
    const double dm = x[2] - a;
    return x[0] * x[0] + x[1] * x[1] + dm * dm;
}

inline double lyapunov_v(const ParamSet& p, const State& x) { return lyapunov_v(p, x.vec()); }

/// Time derivative of V along trajectories:
/// dV/dt = -2 sigma T^2 - 2 I^2 - 2 beta M (M - a).
inline double lyapunov_v_dot(const ParamSet& p, const Vec3& x) {
    const double a = p.sigma() + p.r0();
    return -2.0 * p.sigma() * x[0] * x[0] - 2.0 * x[1] * x[1] -
           2.0 * p.beta() * x[2] * (x[2] - a);
}

inline double lyapunov_v_dot(const ParamSet& p, const State& x) {
    return lyapunov_v_dot(p, x.vec());
}

inline AbsorbingBall absorbing_ball(const ParamSet& p) {
    const double a = p.sigma() + p.r0();
    const double m = std::min({2.0 * p.sigma(), 2.0, p.beta()});
    const double c = p.beta() * a * a;
    return {a, c / m, m, c};
}

// --- symmetry ----------------------------------------------------------------

/// The Z2 symmetry (T, I, M) -> (-T, -I, M); the vector field commutes with it.
inline Vec3 symmetry_map(const Vec3& x) { return {-x[0], -x[1], x[2]}; }

inline State symmetry_map(const State& x) {
    return State(-x.transmission(), -x.perception(), x.memory());
}

}  // namespace timdyn
