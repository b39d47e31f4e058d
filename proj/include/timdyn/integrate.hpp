// Trajectory integration: classical fixed-step RK4 for bit-reproducible runs
// and an embedded Dormand-Prince 5(4) pair with step-size control.

#pragma once

#include <cstdint>
#include <string>

#include "timdyn/model.hpp"

namespace timdyn {

enum class Method { FixedRK4, Adaptive54 };

inline const char* method_name(Method m) {
    return m == Method::FixedRK4 ? "FixedRK4" : "Adaptive54";
}

struct IntegratorOptions {
    Method method = Method::FixedRK4;
    double h_init = 0.01;
    double abs_tol = 1e-9;  // adaptive only
    double rel_tol = 1e-9;  // adaptive only
    double t_end = 0.0;
    std::uint64_t max_steps = 10'000'000;
    std::uint64_t record_stride = 1;
};

struct Sample {
    double t;
    State x;
};

struct TrajectoryMeta {
    Method method = Method::FixedRK4;
    std::uint64_t accepted_steps = 0;
    std::uint64_t rejected_steps = 0;
};

struct Trajectory {
    ParamSet params;
    std::vector<Sample> samples;
    TrajectoryMeta meta;
};

/// Numerical failure during integration (blow-up, step underflow, step budget
/// exhausted). Carries the last time at which the state was still good.
class IntegrationError : public std::runtime_error {
  public:
    IntegrationError(const std::string& msg, double last_good_time)
        : std::runtime_error(msg + " (last good t = " + std::to_string(last_good_time) + ")"),
          last_good_time_(last_good_time) {}

    double last_good_time() const { return last_good_time_; }

  private:
    double last_good_time_;
};

namespace detail {

inline Vec3 axpy(const Vec3& x, double a, const Vec3& y) {
    return {x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2]};
}

inline bool finite(const Vec3& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

inline Vec3 rk4_kernel(const ParamSet& p, const Vec3& y, double h) {
    const Vec3 k1 = vector_field(p, y);
    const Vec3 k2 = vector_field(p, axpy(y, 0.5 * h, k1));
    const Vec3 k3 = vector_field(p, axpy(y, 0.5 * h, k2));
    const Vec3 k4 = vector_field(p, axpy(y, h, k3));
    Vec3 out;
    for (int i = 0; i < 3; ++i)
        out[static_cast<std::size_t>(i)] =
            y[static_cast<std::size_t>(i)] +
            (h / 6.0) * (k1[static_cast<std::size_t>(i)] + 2.0 * k2[static_cast<std::size_t>(i)] +
                         2.0 * k3[static_cast<std::size_t>(i)] + k4[static_cast<std::size_t>(i)]);
    return out;
}

// Dormand-Prince 5(4) tableau.
inline constexpr double dp_a21 = 1.0 / 5.0;
inline constexpr double dp_a31 = 3.0 / 40.0, dp_a32 = 9.0 / 40.0;
inline constexpr double dp_a41 = 44.0 / 45.0, dp_a42 = -56.0 / 15.0, dp_a43 = 32.0 / 9.0;
inline constexpr double dp_a51 = 19372.0 / 6561.0, dp_a52 = -25360.0 / 2187.0,
                        dp_a53 = 64448.0 / 6561.0, dp_a54 = -212.0 / 729.0;
inline constexpr double dp_a61 = 9017.0 / 3168.0, dp_a62 = -355.0 / 33.0,
                        dp_a63 = 46732.0 / 5247.0, dp_a64 = 49.0 / 176.0,
                        dp_a65 = -5103.0 / 18656.0;
inline constexpr double dp_b1 = 35.0 / 384.0, dp_b3 = 500.0 / 1113.0, dp_b4 = 125.0 / 192.0,
                        dp_b5 = -2187.0 / 6784.0, dp_b6 = 11.0 / 84.0;
inline constexpr double dp_e1 = 71.0 / 57600.0, dp_e3 = -71.0 / 16695.0, dp_e4 = 71.0 / 1920.0,
                        dp_e5 = -17253.0 / 339200.0, dp_e6 = 22.0 / 525.0, dp_e7 = -1.0 / 40.0;

// One embedded step: fills the 5th-order candidate and the raw 5th-4th
// difference (not yet scaled by tolerances).
inline void dopri54_kernel(const ParamSet& p, const Vec3& y, double h, Vec3& y5, Vec3& diff) {
    const Vec3 k1 = vector_field(p, y);
    const Vec3 k2 = vector_field(p, axpy(y, h * dp_a21, k1));
    Vec3 t;
    for (std::size_t i = 0; i < 3; ++i) t[i] = y[i] + h * (dp_a31 * k1[i] + dp_a32 * k2[i]);
    const Vec3 k3 = vector_field(p, t);
    for (std::size_t i = 0; i < 3; ++i)
        t[i] = y[i] + h * (dp_a41 * k1[i] + dp_a42 * k2[i] + dp_a43 * k3[i]);
    const Vec3 k4 = vector_field(p, t);
    for (std::size_t i = 0; i < 3; ++i)
        t[i] = y[i] + h * (dp_a51 * k1[i] + dp_a52 * k2[i] + dp_a53 * k3[i] + dp_a54 * k4[i]);
    const Vec3 k5 = vector_field(p, t);
    for (std::size_t i = 0; i < 3; ++i)
        t[i] = y[i] + h * (dp_a61 * k1[i] + dp_a62 * k2[i] + dp_a63 * k3[i] + dp_a64 * k4[i] +
                           dp_a65 * k5[i]);
    const Vec3 k6 = vector_field(p, t);
    for (std::size_t i = 0; i < 3; ++i)
        y5[i] = y[i] + h * (dp_b1 * k1[i] + dp_b3 * k3[i] + dp_b4 * k4[i] + dp_b5 * k5[i] +
                            dp_b6 * k6[i]);
    const Vec3 k7 = vector_field(p, y5);
    for (std::size_t i = 0; i < 3; ++i)
        diff[i] = h * (dp_e1 * k1[i] + dp_e3 * k3[i] + dp_e4 * k4[i] + dp_e5 * k5[i] +
                       dp_e6 * k6[i] + dp_e7 * k7[i]);
}

}  // namespace detail

/// One classical RK4 step of size h from x.
inline State rk4_step(const ParamSet& p, const State& x, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("rk4_step: h must be positive");
    return State(detail::rk4_kernel(p, x.vec(), h));
}

struct AdaptiveStepResult {
    Vec3 y;            // 5th-order candidate
    double error;      // normalized error estimate (accept iff <= 1)
    double h_next;     // controller's suggestion for the next step
    bool accepted;
};

/// One embedded 5(4) step with the standard controller
/// h_next = h * clamp(0.9 * error^(-1/5), 0.2, 5.0).
inline AdaptiveStepResult adaptive_step(const ParamSet& p, const State& x, double h,
                                        double abs_tol, double rel_tol) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("adaptive_step: h must be positive");
    Vec3 y5, diff;
    detail::dopri54_kernel(p, x.vec(), h, y5, diff);
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double scale = abs_tol + rel_tol * std::abs(x.vec()[i]);
        const double e = diff[i] / scale;
        sum_sq += e * e;
    }
    const double err = std::sqrt(sum_sq / 3.0);
    double factor = 5.0;
    if (err > 0.0)
        factor = std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    else if (!(err == 0.0))
        factor = 0.2;  // err is NaN: shrink and let the caller's finiteness check decide
    return {y5, err, h * factor, err <= 1.0};
}

namespace detail {

inline void validate(const IntegratorOptions& o) {
    if (!(std::isfinite(o.t_end) && o.t_end > 0.0))
        throw std::invalid_argument("IntegratorOptions: t_end must be positive");
    if (!(std::isfinite(o.h_init) && o.h_init > 0.0))
        throw std::invalid_argument("IntegratorOptions: h_init must be positive");
    if (o.h_init > o.t_end)
        throw std::invalid_argument("IntegratorOptions: h_init must not exceed t_end");
    if (o.method == Method::Adaptive54 && (!(o.abs_tol >= 1e-14) || !(o.rel_tol >= 1e-14)))
        throw std::invalid_argument("IntegratorOptions: tolerances must be >= 1e-14");
    if (o.max_steps == 0) throw std::invalid_argument("IntegratorOptions: max_steps must be >= 1");
    if (o.record_stride == 0)
        throw std::invalid_argument("IntegratorOptions: record_stride must be >= 1");
}

}  // namespace detail

/// Integrate from x0 to t_end. Every record_stride-th accepted step is
/// recorded, plus the initial state at t = 0 and the final state exactly at
/// t_end (the last step is shortened to land on it).
inline Trajectory integrate(const ParamSet& p, const State& x0, const IntegratorOptions& opts) {
    detail::validate(opts);

    Trajectory traj{p, {}, {opts.method, 0, 0}};
    traj.samples.push_back({0.0, x0});

    Vec3 y = x0.vec();

    if (opts.method == Method::FixedRK4) {
        const double h = opts.h_init;
        std::uint64_t n_full = static_cast<std::uint64_t>(std::floor(opts.t_end / h + 1e-9));
        while (n_full > 0 && static_cast<double>(n_full) * h >= opts.t_end) --n_full;
        if (n_full + 1 > opts.max_steps)
            throw IntegrationError("integrate: max_steps exceeded", 0.0);

        for (std::uint64_t i = 1; i <= n_full; ++i) {
            y = detail::rk4_kernel(p, y, h);
            const double t = static_cast<double>(i) * h;
            if (!detail::finite(y))
                throw IntegrationError("integrate: non-finite state encountered",
                                       static_cast<double>(i - 1) * h);
            ++traj.meta.accepted_steps;
            if (i % opts.record_stride == 0) traj.samples.push_back({t, State(y)});
        }
        const double t_last = static_cast<double>(n_full) * h;
        y = detail::rk4_kernel(p, y, opts.t_end - t_last);
        if (!detail::finite(y))
            throw IntegrationError("integrate: non-finite state encountered", t_last);
        ++traj.meta.accepted_steps;
        traj.samples.push_back({opts.t_end, State(y)});
        return traj;
    }

    // adaptive
    double t = 0.0;
    double h = std::min(opts.h_init, opts.t_end);
    const double h_floor = 1e-12 * opts.t_end;
    std::uint64_t accepted_count = 0;
    while (t < opts.t_end) {
        if (traj.meta.accepted_steps + traj.meta.rejected_steps >= opts.max_steps)
            throw IntegrationError("integrate: max_steps exceeded", t);
        if (h < h_floor)
            throw IntegrationError("integrate: step size underflow (stiffness or blow-up)", t);

        const bool last = t + h >= opts.t_end;
        const double h_try = last ? opts.t_end - t : h;
        Vec3 y5, diff;
        detail::dopri54_kernel(p, y, h_try, y5, diff);
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            const double scale = opts.abs_tol + opts.rel_tol * std::abs(y[i]);
            const double e = diff[i] / scale;
            sum_sq += e * e;
        }
        const double err = std::sqrt(sum_sq / 3.0);
        if (!detail::finite(y5) || !std::isfinite(err))
            throw IntegrationError("integrate: non-finite state encountered", t);

        double factor = 5.0;
        if (err > 0.0) factor = std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);

        if (err <= 1.0) {
            y = y5;
            t = last ? opts.t_end : t + h_try;
            ++traj.meta.accepted_steps;
            ++accepted_count;
            if (t == opts.t_end)
                traj.samples.push_back({t, State(y)});
            else if (accepted_count % opts.record_stride == 0)
                traj.samples.push_back({t, State(y)});
        } else {
            ++traj.meta.rejected_steps;
        }
        h = h_try * factor;
    }
    return traj;
}

}  // namespace timdyn
