#include "timdyn/integrate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "timdyn/model.hpp"

using namespace timdyn;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Vec3 final_state(const ParamSet& p, const State& x0, const IntegratorOptions& opts) {
    return integrate(p, x0, opts).samples.back().x.vec();
}

double max_abs_diff(const Vec3& a, const Vec3& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

IntegratorOptions rk4_opts(double h, double t_end) {
    IntegratorOptions o;
    o.method = Method::FixedRK4;
    o.h_init = h;
    o.t_end = t_end;
    return o;
}

IntegratorOptions adaptive_opts(double tol, double t_end) {
    IntegratorOptions o;
    o.method = Method::Adaptive54;
    o.h_init = 0.01;
    o.abs_tol = tol;
    o.rel_tol = tol;
    o.t_end = t_end;
    return o;
}

}  // namespace

TEST(Rk4, ConvergenceOrderIsFour) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const State x0(1.0, 1.0, 1.0);
    const Vec3 ref = final_state(p, x0, rk4_opts(1e-5, 2.0));

    // the window matters: for h >~ 0.005 the fifth-order term still dominates
    // on this trajectory, so the asymptotic slope only shows below that
    std::vector<double> hs = {0.005, 0.0025, 0.00125, 0.000625};
    std::vector<double> errs;
    for (double h : hs) errs.push_back(max_abs_diff(final_state(p, x0, rk4_opts(h, 2.0)), ref));

    // least-squares slope of log(err) against log(h)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto n = static_cast<double>(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const double lx = std::log(hs[i]), ly = std::log(errs[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_GT(slope, 3.7);
    EXPECT_LT(slope, 4.3);
}

TEST(Adaptive, AgreesWithFixedStepOnShortHorizon) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const State x0(1.0, 1.0, 1.0);
    const Vec3 a = final_state(p, x0, adaptive_opts(1e-10, 5.0));
    const Vec3 b = final_state(p, x0, rk4_opts(1e-3, 5.0));
    EXPECT_LT(max_abs_diff(a, b), 1e-4);
}

TEST(Adaptive, TighterToleranceGivesSmallerError) {
    // a converging run, so errors are not amplified chaotically
    const ParamSet p(10.0, 20.0, 2.7);
    const State x0(1.0, 1.0, 1.0);
    const Vec3 ref = final_state(p, x0, rk4_opts(1e-4, 10.0));

    const double err_loose = max_abs_diff(final_state(p, x0, adaptive_opts(1e-6, 10.0)), ref);
    const double err_tight = max_abs_diff(final_state(p, x0, adaptive_opts(1e-12, 10.0)), ref);
    EXPECT_LT(err_tight, err_loose);
    EXPECT_LT(err_tight, 1e-8);
}

TEST(Adaptive, StepsAreAcceptedAndRejected) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const Trajectory traj = integrate(p, State(1.0, 1.0, 1.0), adaptive_opts(1e-9, 20.0));
    EXPECT_GT(traj.meta.accepted_steps, 100u);
    // the controller the tableau is tuned for should not reject wildly
    EXPECT_LT(traj.meta.rejected_steps, traj.meta.accepted_steps);
    EXPECT_EQ(traj.meta.method, Method::Adaptive54);
}

TEST(AdaptiveStep, ControllerShrinksOnRejection) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const State x(10.0, 10.0, 30.0);
    const AdaptiveStepResult big = adaptive_step(p, x, 1.0, 1e-12, 1e-12);
    EXPECT_FALSE(big.accepted);
    EXPECT_GT(big.error, 1.0);
    EXPECT_LT(big.h_next, 1.0);
    EXPECT_GE(big.h_next, 0.2);  // clamp floor

    const AdaptiveStepResult small = adaptive_step(p, x, 1e-4, 1e-9, 1e-9);
    EXPECT_TRUE(small.accepted);
    EXPECT_LE(small.error, 1.0);
    EXPECT_GT(small.h_next, 1e-4);  // room to grow
    EXPECT_LE(small.h_next, 5e-4);  // clamp ceiling
}

TEST(Integrate, FinalSampleLandsExactlyOnTEnd) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const State x0(1.0, 1.0, 1.0);

    // h does not divide t_end
    EXPECT_EQ(integrate(p, x0, rk4_opts(0.03, 10.0)).samples.back().t, 10.0);
    // h divides t_end exactly
    EXPECT_EQ(integrate(p, x0, rk4_opts(0.25, 1.0)).samples.back().t, 1.0);
    // single-step run
    EXPECT_EQ(integrate(p, x0, rk4_opts(1.0, 1.0)).samples.back().t, 1.0);
    // adaptive
    EXPECT_EQ(integrate(p, x0, adaptive_opts(1e-9, 7.3)).samples.back().t, 7.3);
}

TEST(Integrate, RecordStrideKeepsEveryNthStepPlusEndpoints) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    IntegratorOptions o = rk4_opts(0.01, 1.0);
    o.record_stride = 10;
    const Trajectory traj = integrate(p, State(1.0, 1.0, 1.0), o);

    // t=0, steps 10..90, final at t=1 (the 100th step is the shortened one)
    ASSERT_EQ(traj.samples.size(), 11u);
    EXPECT_EQ(traj.samples.front().t, 0.0);
    for (std::size_t i = 1; i + 1 < traj.samples.size(); ++i)
        EXPECT_DOUBLE_EQ(traj.samples[i].t, static_cast<double>(i) * 0.1);
    EXPECT_EQ(traj.samples.back().t, 1.0);
    EXPECT_EQ(traj.meta.accepted_steps, 100u);
}

TEST(Integrate, RecordedTimesAreStepMultiples) {
    const ParamSet p(2.0, 0.5, 1.0);
    const Trajectory traj = integrate(p, State(1.0, 1.0, 1.0), rk4_opts(0.1, 2.0));
    ASSERT_EQ(traj.samples.size(), 21u);
    for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i)
        EXPECT_EQ(traj.samples[i].t, static_cast<double>(i) * 0.1);
}

TEST(Integrate, OriginStaysExactlyFixed) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const Trajectory traj = integrate(p, State(0.0, 0.0, 0.0), rk4_opts(0.01, 5.0));
    for (const Sample& s : traj.samples) {
        EXPECT_EQ(s.x.transmission(), 0.0);
        EXPECT_EQ(s.x.perception(), 0.0);
        EXPECT_EQ(s.x.memory(), 0.0);
    }
}

TEST(Integrate, EquilibriaAreFixedToRoundoff) {
    const ParamSet p(10.0, 20.0, 2.7);
    for (const Equilibrium& eq : equilibria(p)) {
        const Vec3 xf = final_state(p, eq.point, rk4_opts(0.01, 10.0));
        EXPECT_LT(max_abs_diff(xf, eq.point.vec()), 1e-10) << branch_name(eq.branch);
    }
}

TEST(Integrate, FlowCommutesWithSymmetryBitExactly) {
    // S(phi_t(x)) = phi_t(S(x)): negation commutes with IEEE rounding, so the
    // fixed-step method preserves the mirror symmetry exactly, not only to
    // truncation order.
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        Vec3 x0;
        for (auto& c : x0) c = uniform(rng, -10.0, 10.0);
        const Trajectory a = integrate(p, State(x0), rk4_opts(0.01, 10.0));
        const Trajectory b = integrate(p, State(symmetry_map(x0)), rk4_opts(0.01, 10.0));
        ASSERT_EQ(a.samples.size(), b.samples.size());
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            const Vec3 mirrored = symmetry_map(a.samples[i].x.vec());
            EXPECT_EQ(mirrored, b.samples[i].x.vec()) << "sample " << i;
        }
    }
}

TEST(Integrate, TrajectoryEntersAbsorbingBallAndStays) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const AbsorbingBall ball = absorbing_ball(p);
    IntegratorOptions o = rk4_opts(0.01, 40.0);
    o.record_stride = 5;
    const Trajectory traj = integrate(p, State(20.0, 20.0, 60.0), o);
    for (const Sample& s : traj.samples) {
        if (s.t < 20.0) continue;
        EXPECT_LE(lyapunov_v(p, s.x), 1.01 * ball.radius_sq) << "t = " << s.t;
    }
}

TEST(Integrate, LyapunovBoundHoldsAlongTrajectory) {
    // V(t) <= (V0 - R^2) e^{-mt} + R^2, the integrated form of the dissipation
    // inequality; allow 2% slack for discretization.
    const ParamSet p(3.0, 5.0, 1.5);
    const AbsorbingBall ball = absorbing_ball(p);
    const State x0(15.0, -10.0, 30.0);
    const double v0 = lyapunov_v(p, x0);
    const Trajectory traj = integrate(p, x0, rk4_opts(0.01, 15.0));
    for (const Sample& s : traj.samples) {
        const double bound =
            std::max(v0 - ball.radius_sq, 0.0) * std::exp(-ball.decay_m * s.t) + ball.radius_sq;
        EXPECT_LE(lyapunov_v(p, s.x), 1.02 * bound + 1e-9) << "t = " << s.t;
    }
}

TEST(Integrate, DeterministicRepeatsAreBitIdentical) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const State x0(1.0, 1.0, 1.0);
    for (const auto& opts : {rk4_opts(0.01, 10.0), adaptive_opts(1e-9, 10.0)}) {
        const Trajectory a = integrate(p, x0, opts);
        const Trajectory b = integrate(p, x0, opts);
        ASSERT_EQ(a.samples.size(), b.samples.size());
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            EXPECT_EQ(a.samples[i].t, b.samples[i].t);
            EXPECT_EQ(a.samples[i].x.vec(), b.samples[i].x.vec());
        }
    }
}

TEST(Integrate, MaxStepsExceededThrows) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    IntegratorOptions o = rk4_opts(1e-4, 100.0);
    o.max_steps = 1000;
    EXPECT_THROW(integrate(p, State(1.0, 1.0, 1.0), o), IntegrationError);

    IntegratorOptions a = adaptive_opts(1e-9, 1000.0);
    a.max_steps = 50;
    try {
        integrate(p, State(1.0, 1.0, 1.0), a);
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError& e) {
        EXPECT_GE(e.last_good_time(), 0.0);
        EXPECT_LT(e.last_good_time(), 1000.0);
        EXPECT_NE(std::string(e.what()).find("max_steps"), std::string::npos);
    }
}

TEST(Integrate, BlowUpReportsLastGoodTime) {
    // gross step size makes RK4 unstable and the state overflows; the error
    // must carry the time of the last finite state rather than just failing
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    try {
        integrate(p, State(1e8, 1e8, 1e8), rk4_opts(0.5, 50.0));
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError& e) {
        EXPECT_TRUE(std::isfinite(e.last_good_time()));
        EXPECT_GE(e.last_good_time(), 0.0);
        EXPECT_LT(e.last_good_time(), 50.0);
        EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    }
}

TEST(Adaptive, StepUnderflowThrows) {
    // tol at the permitted minimum plus a huge horizon: the step the controller
    // wants sits below the underflow floor 1e-12 * t_end
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    IntegratorOptions o = adaptive_opts(1e-14, 1e10);
    try {
        integrate(p, State(1.0, 1.0, 1.0), o);
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError& e) {
        EXPECT_NE(std::string(e.what()).find("underflow"), std::string::npos);
    }
}

TEST(IntegratorOptions, ValidationRejectsBadSetups) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const State x0(1.0, 1.0, 1.0);

    auto expect_invalid = [&](IntegratorOptions o) {
        EXPECT_THROW(integrate(p, x0, o), std::invalid_argument);
    };

    expect_invalid(rk4_opts(0.01, 0.0));     // t_end = 0
    expect_invalid(rk4_opts(0.01, -1.0));    // t_end < 0
    expect_invalid(rk4_opts(0.0, 1.0));      // h = 0
    expect_invalid(rk4_opts(-0.1, 1.0));     // h < 0
    expect_invalid(rk4_opts(2.0, 1.0));      // h > t_end

    IntegratorOptions o = rk4_opts(0.01, 1.0);
    o.record_stride = 0;
    expect_invalid(o);

    o = rk4_opts(0.01, 1.0);
    o.max_steps = 0;
    expect_invalid(o);

    o = adaptive_opts(1e-15, 1.0);  // below the 1e-14 floor
    expect_invalid(o);
}

TEST(Rk4Step, SingleStepMatchesDriver) {
    const ParamSet p(10.0, 28.0, 8.0 / 3.0);
    const State x0(1.0, 1.0, 1.0);
    const State one = rk4_step(p, x0, 0.01);
    const Trajectory traj = integrate(p, x0, rk4_opts(0.01, 0.01));
    EXPECT_EQ(one.vec(), traj.samples.back().x.vec());
    EXPECT_THROW(rk4_step(p, x0, 0.0), std::invalid_argument);
    EXPECT_THROW(rk4_step(p, x0, -1.0), std::invalid_argument);
}
