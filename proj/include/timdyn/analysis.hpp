// Higher-level studies on top of the model: regime scans over r0, Hopf
// diagnostics, Benettin Lyapunov spectra, dissipativity auditing, and basin
// sampling in the bistable window.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>

#include "timdyn/integrate.hpp"
#include "timdyn/model.hpp"
#include "timdyn/parallel.hpp"
#include "timdyn/stability.hpp"

namespace timdyn {

/// Routh-Hurwitz margin of the nontrivial branch, Delta(r0) = a1*a2 - a3.
/// Affine and strictly decreasing in r0 when sigma > beta + 1; its root is the
/// Hopf threshold. Requires r0_query > 1 (the branch must exist).
inline double delta_rh(const ParamSet& p, double r0_query) {
    if (!(r0_query > 1.0)) throw std::domain_error("delta_rh: requires r0 > 1");
    const CubicCoeffs c = char_coeffs_nontrivial(p.with_r0(r0_query));
    return c.a1 * c.a2 - c.a3;
}

struct HopfReport {
    double r_h;             // critical infection potential
    double omega;           // frequency at onset, sqrt(beta * (sigma + r_h))
    double transversality;  // d(Delta)/dr0 = beta * (beta + 1 - sigma), < 0
};

/// Hopf data for the nontrivial branch; absent when sigma <= beta + 1 (the
/// branch then stays stable for every r0 > 1).
inline std::optional<HopfReport> hopf_report(const ParamSet& p) {
    const auto r_h = hopf_threshold(p);
    if (!r_h) return std::nullopt;
    HopfReport rep;
    rep.r_h = *r_h;
    rep.omega = std::sqrt(p.beta() * (p.sigma() + *r_h));
    rep.transversality = p.beta() * (p.beta() + 1.0 - p.sigma());
    if (!(rep.transversality < 0.0))
        throw std::logic_error("hopf_report: transversality must be negative when r_h exists");
    return rep;
}

enum class Regime {
    InactiveStable,  // r0 < 1: only P0, a sink
    Bistable,        // 1 < r0 < r_H: mirror equilibria, both stable
    PostHopf,        // r0 > r_H: nontrivial branch unstable
    PitchforkPoint,  // r0 == 1
    HopfPoint,       // r0 == r_H
    NoHopfBranch,    // r0 > 1 but sigma <= beta + 1: no Hopf threshold exists
};

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::InactiveStable: return "InactiveStable";
        case Regime::Bistable: return "Bistable";
        case Regime::PostHopf: return "PostHopf";
        case Regime::PitchforkPoint: return "PitchforkPoint";
        case Regime::HopfPoint: return "HopfPoint";
        case Regime::NoHopfBranch: return "NoHopfBranch";
    }
    return "?";
}

struct RegimeRecord {
    double r0 = 0.0;
    int equilibria_count = 0;
    StabilityLabel p0_label = StabilityLabel::Marginal;
    std::optional<StabilityLabel> pe_label;  // absent for r0 <= 1
    double delta_rh = std::numeric_limits<double>::quiet_NaN();  // NaN for r0 <= 1
    double alpha = std::numeric_limits<double>::quiet_NaN();     // NaN for r0 < 1
    Regime regime = Regime::InactiveStable;
};

namespace detail {

inline RegimeRecord regime_record(const ParamSet& base, double r0) {
    const ParamSet p = base.with_r0(r0);
    const auto eqs = equilibria(p);
    RegimeRecord rec;
    rec.r0 = r0;
    rec.equilibria_count = static_cast<int>(eqs.size());
    rec.p0_label = classify_equilibrium(p, eqs[0]).label;
    if (eqs.size() == 3) rec.pe_label = classify_equilibrium(p, eqs[1]).label;
    if (r0 > 1.0) rec.delta_rh = delta_rh(p, r0);
    if (r0 >= 1.0) rec.alpha = pitchfork_amplitude(p);

    const auto r_h = hopf_threshold(p);
    if (r0 < 1.0)
        rec.regime = Regime::InactiveStable;
    else if (r0 == 1.0)
        rec.regime = Regime::PitchforkPoint;
    else if (!r_h)
        rec.regime = Regime::NoHopfBranch;
    else if (r0 == *r_h)
        rec.regime = Regime::HopfPoint;
    else
        rec.regime = r0 < *r_h ? Regime::Bistable : Regime::PostHopf;
    return rec;
}

}  // namespace detail

/// One record per grid point, from the closed-form stability tests (no
/// simulation). Synthetic records are inserted at the pitchfork (r0 = 1) and
/// Hopf (r0 = r_H) points when those fall strictly inside the grid span and
/// no grid point already sits on them.
inline std::vector<RegimeRecord> bifurcation_scan(const ParamSet& p_base,
                                                  const std::vector<double>& r0_grid,
                                                  std::size_t threads = 1) {
    if (r0_grid.empty()) throw std::invalid_argument("bifurcation_scan: empty grid");
    for (std::size_t i = 0; i < r0_grid.size(); ++i) {
        if (!(r0_grid[i] > 0.0) || !std::isfinite(r0_grid[i]))
            throw std::invalid_argument("bifurcation_scan: grid values must be positive");
        if (i > 0 && !(r0_grid[i] > r0_grid[i - 1]))
            throw std::invalid_argument("bifurcation_scan: grid must be strictly increasing");
    }

    std::vector<double> points = r0_grid;
    auto insert_if_inside = [&points](double r) {
        if (r <= points.front() || r >= points.back()) return;
        auto it = std::lower_bound(points.begin(), points.end(), r);
        if (it != points.end() && *it == r) return;  // grid already hits it
        points.insert(it, r);
    };
    insert_if_inside(1.0);
    if (const auto r_h = hopf_threshold(p_base)) insert_if_inside(*r_h);

    std::vector<RegimeRecord> out(points.size());
    parallel_for(points.size(), threads,
                 [&](std::size_t i) { out[i] = detail::regime_record(p_base, points[i]); });
    return out;
}

struct LyapunovResult {
    std::array<double, 3> exponents{};  // sorted descending
    double sum = 0.0;
    double horizon = 0.0;
    double renorm_interval = 0.0;
    double transient_discarded = 0.0;
    bool drift_warning = false;  // last-quarter estimate drift above 5%
};

namespace detail {

// 12-dimensional augmented system: the state plus three tangent columns
// evolving under the variational equation Q' = J(x) Q.
struct AugState {
    Vec3 x;
    Mat3 q;
};

inline AugState aug_rhs(const ParamSet& p, const AugState& s) {
    AugState d;
    d.x = vector_field(p, s.x);
    const Mat3 j = jacobian(p, s.x);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            d.q(r, c) = j(r, 0) * s.q(0, c) + j(r, 1) * s.q(1, c) + j(r, 2) * s.q(2, c);
    return d;
}

inline AugState aug_axpy(const AugState& s, double a, const AugState& d) {
    AugState out;
    for (std::size_t i = 0; i < 3; ++i) out.x[i] = s.x[i] + a * d.x[i];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.q(r, c) = s.q(r, c) + a * d.q(r, c);
    return out;
}

inline AugState aug_rk4(const ParamSet& p, const AugState& s, double h) {
    const AugState k1 = aug_rhs(p, s);
    const AugState k2 = aug_rhs(p, aug_axpy(s, 0.5 * h, k1));
    const AugState k3 = aug_rhs(p, aug_axpy(s, 0.5 * h, k2));
    const AugState k4 = aug_rhs(p, aug_axpy(s, h, k3));
    AugState out = s;
    for (std::size_t i = 0; i < 3; ++i)
        out.x[i] += (h / 6.0) * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out.q(r, c) +=
                (h / 6.0) * (k1.q(r, c) + 2.0 * k2.q(r, c) + 2.0 * k3.q(r, c) + k4.q(r, c));
    return out;
}

// Modified Gram-Schmidt on the columns of q; returns the diagonal stretch
// factors r_ii (the column norms after projection).
inline std::array<double, 3> orthonormalize(Mat3& q) {
    std::array<double, 3> r{};
    for (int c = 0; c < 3; ++c) {
        for (int prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += q(k, prev) * q(k, c);
            for (int k = 0; k < 3; ++k) q(k, c) -= dot * q(k, prev);
        }
        double norm = 0.0;
        for (int k = 0; k < 3; ++k) norm += q(k, c) * q(k, c);
        norm = std::sqrt(norm);
        r[static_cast<std::size_t>(c)] = norm;
        if (!(norm > 0.0)) throw std::runtime_error("orthonormalize: degenerate tangent frame");
        for (int k = 0; k < 3; ++k) q(k, c) /= norm;
    }
    return r;
}

// Advance the plain state by `duration` using RK4 substeps of about 0.01.
inline Vec3 advance_state(const ParamSet& p, Vec3 y, double duration, double t0) {
    if (duration <= 0.0) return y;
    const auto n = static_cast<std::uint64_t>(std::ceil(duration / 0.01 - 1e-9));
    const double h = duration / static_cast<double>(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        y = rk4_kernel(p, y, h);
        if (!finite(y))
            throw IntegrationError("lyapunov: non-finite state in transient",
                                   t0 + static_cast<double>(i) * h);
    }
    return y;
}

}  // namespace detail

/// Benettin tangent-space estimate of the full Lyapunov spectrum: the state is
/// integrated jointly with an orthonormal tangent frame, re-orthonormalized
/// every renorm_dt, and exponents are the time-averaged log stretch factors
/// after a discarded transient.
inline LyapunovResult lyapunov_spectrum(const ParamSet& p, const State& x0, double horizon,
                                        double renorm_dt, double transient) {
    if (!(renorm_dt > 0.0) || !std::isfinite(renorm_dt))
        throw std::invalid_argument("lyapunov_spectrum: renorm_dt must be positive");
    if (!(horizon >= 100.0 * renorm_dt))
        throw std::invalid_argument("lyapunov_spectrum: horizon must be >= 100 * renorm_dt");
    if (!(transient >= 0.0) || !std::isfinite(transient))
        throw std::invalid_argument("lyapunov_spectrum: transient must be >= 0");

    detail::AugState s;
    s.x = detail::advance_state(p, x0.vec(), transient, 0.0);
    s.q = Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}};

    const auto intervals =
        static_cast<std::uint64_t>(std::floor(horizon / renorm_dt + 1e-9));
    const auto substeps = static_cast<std::uint64_t>(std::ceil(renorm_dt / 0.01 - 1e-9));
    const double h = renorm_dt / static_cast<double>(substeps);

    std::array<double, 3> log_sum{};
    std::array<double, 3> log_sum_q3{};  // snapshot at three quarters, for drift
    const std::uint64_t k_q3 = intervals - intervals / 4;
    for (std::uint64_t k = 1; k <= intervals; ++k) {
        for (std::uint64_t i = 0; i < substeps; ++i) s = detail::aug_rk4(p, s, h);
        if (!detail::finite(s.x))
            throw IntegrationError("lyapunov: non-finite state encountered",
                                   transient + static_cast<double>(k - 1) * renorm_dt);
        const auto stretch = detail::orthonormalize(s.q);
        for (std::size_t i = 0; i < 3; ++i) log_sum[i] += std::log(stretch[i]);
        if (k == k_q3) log_sum_q3 = log_sum;
    }

    const double t_total = static_cast<double>(intervals) * renorm_dt;
    const double t_q3 = static_cast<double>(k_q3) * renorm_dt;
    LyapunovResult res;
    for (std::size_t i = 0; i < 3; ++i) res.exponents[i] = log_sum[i] / t_total;
    std::sort(res.exponents.begin(), res.exponents.end(), std::greater<>());
    res.sum = res.exponents[0] + res.exponents[1] + res.exponents[2];
    res.horizon = t_total;
    res.renorm_interval = renorm_dt;
    res.transient_discarded = transient;
    // Drift check: how much each estimate moved over the last quarter,
    // relative to a unit floor so the near-zero exponent is judged on an
    // absolute scale.
    for (std::size_t i = 0; i < 3; ++i) {
        const double at_q3 = log_sum_q3[i] / t_q3;
        const double at_end = log_sum[i] / t_total;
        if (std::abs(at_end - at_q3) > 0.05 * std::max(1.0, std::abs(at_end)))
            res.drift_warning = true;
    }
    return res;
}

/// Independent largest-exponent estimate from the log separation rate of two
/// nearby trajectories, renormalized to the initial offset every renorm_dt.
inline double lyapunov_max_two_trajectory(const ParamSet& p, const State& x0, double horizon,
                                          double renorm_dt, double transient,
                                          double d0 = 1e-8) {
    if (!(renorm_dt > 0.0) || !(horizon >= 100.0 * renorm_dt) || !(transient >= 0.0) ||
        !(d0 > 0.0))
        throw std::invalid_argument("lyapunov_max_two_trajectory: bad arguments");

    Vec3 a = detail::advance_state(p, x0.vec(), transient, 0.0);
    Vec3 b = {a[0] + d0, a[1], a[2]};

    const auto intervals = static_cast<std::uint64_t>(std::floor(horizon / renorm_dt + 1e-9));
    const auto substeps = static_cast<std::uint64_t>(std::ceil(renorm_dt / 0.01 - 1e-9));
    const double h = renorm_dt / static_cast<double>(substeps);

    double log_sum = 0.0;
    for (std::uint64_t k = 1; k <= intervals; ++k) {
        for (std::uint64_t i = 0; i < substeps; ++i) {
            a = detail::rk4_kernel(p, a, h);
            b = detail::rk4_kernel(p, b, h);
        }
        if (!detail::finite(a) || !detail::finite(b))
            throw IntegrationError("lyapunov: non-finite state encountered",
                                   transient + static_cast<double>(k - 1) * renorm_dt);
        const Vec3 d = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
        const double dist = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if (!(dist > 0.0))
            throw std::runtime_error("lyapunov_max_two_trajectory: trajectories coincide");
        log_sum += std::log(dist / d0);
        const double rescale = d0 / dist;
        for (std::size_t i = 0; i < 3; ++i) b[i] = a[i] + d[i] * rescale;
    }
    return log_sum / (static_cast<double>(intervals) * renorm_dt);
}

struct AuditReport {
    std::uint64_t n_samples = 0;
    std::uint64_t seed = 0;
    std::uint64_t violations = 0;
    double max_slack = -std::numeric_limits<double>::infinity();  // max of Vdot + mV - c
    double tolerance = 1e-9;
    bool passed = false;
};

namespace detail {

// Deterministic uniform double in [0, 1) from the raw 64-bit stream; avoids
// std::uniform_real_distribution, whose output is implementation-defined.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Samples states uniformly from the box of half-width 2R centred on the
/// absorbing ball's centre and checks the dissipation inequality
/// Vdot <= -mV + c at each. The inequality is proved for every state, so any
/// violation flags an implementation bug, not a model property.
inline AuditReport dissipativity_audit(const ParamSet& p, std::uint64_t n_samples,
                                       std::uint64_t seed) {
    if (n_samples == 0) throw std::invalid_argument("dissipativity_audit: n_samples must be >= 1");
    const AbsorbingBall ball = absorbing_ball(p);
    const double r = std::sqrt(ball.radius_sq);
    const Vec3 center = {0.0, 0.0, ball.center_m};

    AuditReport rep;
    rep.n_samples = n_samples;
    rep.seed = seed;
    std::mt19937_64 rng(seed);
    for (std::uint64_t s = 0; s < n_samples; ++s) {
        Vec3 x;
        for (std::size_t i = 0; i < 3; ++i)
            x[i] = center[i] + (2.0 * detail::uniform01(rng) - 1.0) * 2.0 * r;
        const double v = lyapunov_v(p, x);
        const double vdot = lyapunov_v_dot(p, x);
        const double slack = vdot + ball.decay_m * v - ball.offset_c;
        rep.max_slack = std::max(rep.max_slack, slack);
        if (slack > rep.tolerance) ++rep.violations;
    }
    rep.passed = rep.violations == 0;
    return rep;
}

enum class BasinLabel { PePlus, PeMinus, Unresolved };

inline const char* basin_label_name(BasinLabel l) {
    switch (l) {
        case BasinLabel::PePlus: return "PePlus";
        case BasinLabel::PeMinus: return "PeMinus";
        case BasinLabel::Unresolved: return "Unresolved";
    }
    return "?";
}

struct BasinGrid {
    double t_min = -10.0, t_max = 10.0;
    int n_t = 21;
    double i_min = -10.0, i_max = 10.0;
    int n_i = 21;
    double m0 = 0.0;
};

struct BasinResult {
    BasinGrid grid;
    std::vector<BasinLabel> labels;  // row-major: index = it * grid.n_i + ii

    BasinLabel at(int it, int ii) const {
        return labels[static_cast<std::size_t>(it) * static_cast<std::size_t>(grid.n_i) +
                      static_cast<std::size_t>(ii)];
    }
};

/// Integrates each grid IC to t_end and labels it by the mirror equilibrium
/// (if any) within 1e-3 of the final state. Requires the bistable window
/// 1 < r0 < r_H; when no Hopf threshold exists the branch is stable for every
/// r0 > 1 and any r0 > 1 is accepted.
inline BasinResult basin_sample(const ParamSet& p, const BasinGrid& grid, double t_end,
                                std::size_t threads = 1) {
    if (!(p.r0() > 1.0))
        throw std::invalid_argument("basin_sample: requires the bistable regime (r0 > 1)");
    if (const auto r_h = hopf_threshold(p); r_h && !(p.r0() < *r_h))
        throw std::invalid_argument("basin_sample: requires the bistable regime (r0 < r_H)");
    if (grid.n_t < 1 || grid.n_i < 1) throw std::invalid_argument("basin_sample: empty grid");
    if (!(t_end > 0.0)) throw std::invalid_argument("basin_sample: t_end must be positive");

    const auto eqs = equilibria(p);
    const Vec3 plus = eqs[1].point.vec();
    const Vec3 minus = eqs[2].point.vec();
    constexpr double kTol = 1e-3;

    auto coord = [](double lo, double hi, int n, int i) {
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    };

    BasinResult res;
    res.grid = grid;
    const std::size_t total =
        static_cast<std::size_t>(grid.n_t) * static_cast<std::size_t>(grid.n_i);
    res.labels.assign(total, BasinLabel::Unresolved);

    IntegratorOptions opts;
    opts.method = Method::FixedRK4;
    opts.h_init = 0.01;
    opts.t_end = t_end;
    opts.record_stride = std::numeric_limits<std::uint64_t>::max();  // endpoints only

    parallel_for(total, threads, [&](std::size_t idx) {
        const int it = static_cast<int>(idx) / grid.n_i;
        const int ii = static_cast<int>(idx) % grid.n_i;
        const Vec3 x0 = {coord(grid.t_min, grid.t_max, grid.n_t, it),
                         coord(grid.i_min, grid.i_max, grid.n_i, ii), grid.m0};
        Vec3 xf;
        try {
            xf = integrate(p, State(x0), opts).samples.back().x.vec();
        } catch (const IntegrationError&) {
            return;  // leave Unresolved
        }
        auto dist = [](const Vec3& a, const Vec3& b) {
            const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
            return std::sqrt(dx * dx + dy * dy + dz * dz);
        };
        if (dist(xf, plus) < kTol)
            res.labels[idx] = BasinLabel::PePlus;
        else if (dist(xf, minus) < kTol)
            res.labels[idx] = BasinLabel::PeMinus;
    });
    return res;
}

}  // namespace timdyn
