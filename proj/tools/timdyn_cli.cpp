// Command-line front end: simulate | equilibria | scan | lyapunov | verify.
// Exit codes: 0 success, 2 flag/validation error, 3 numerical failure.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "timdyn/timdyn.hpp"

namespace {

using namespace timdyn;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

Vec3 parse_triple(const std::string& s) {
    Vec3 v;
    char trailing;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &v[0], &v[1], &v[2], &trailing) != 3)
        throw CLI::ValidationError("--x0", "expected three comma-separated numbers, e.g. 1,1,1");
    return v;
}

// Writes either to --out or to stdout.
class OutputSink {
  public:
    explicit OutputSink(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw CLI::ValidationError("--out", "cannot open '" + path + "'");
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

struct SimulateArgs {
    double sigma = 0, r0 = 0, beta = 0;
    std::string x0 = "1,1,1";
    double t_end = 0;
    std::string method = "rk4";
    double h = 0.01;
    double tol = 1e-9;
    std::uint64_t stride = 1;
    std::string format = "csv";
    std::string out;
};

int run_simulate(const SimulateArgs& a) {
    const ParamSet p(a.sigma, a.r0, a.beta);
    const State x0{parse_triple(a.x0)};
    IntegratorOptions opts;
    opts.method = a.method == "rk4" ? Method::FixedRK4 : Method::Adaptive54;
    opts.h_init = a.h;
    opts.abs_tol = a.tol;
    opts.rel_tol = a.tol;
    opts.t_end = a.t_end;
    opts.record_stride = a.stride;

    const Trajectory traj = integrate(p, x0, opts);
    OutputSink sink(a.out);
    if (a.format == "csv")
        write_trajectory_csv(sink.stream(), traj);
    else
        sink.stream() << trajectory_report(traj).dump(2) << '\n';
    return kExitOk;
}

struct EquilibriaArgs {
    double sigma = 0, r0 = 0, beta = 0;
    std::string format = "json";
    std::string out;
};

int run_equilibria(const EquilibriaArgs& a) {
    const ParamSet p(a.sigma, a.r0, a.beta);
    OutputSink sink(a.out);
    sink.stream() << equilibria_report(p).dump(2) << '\n';
    return kExitOk;
}

struct ScanArgs {
    double sigma = 0, beta = 0;
    double r0_min = 0, r0_max = 0;
    std::uint64_t steps = 0;
    std::size_t threads = 0;
    std::string out;
};

int run_scan(const ScanArgs& a) {
    if (!(a.r0_min > 0))
        throw CLI::ValidationError("--r0-min", "must be positive");
    if (!(a.r0_max > a.r0_min))
        throw CLI::ValidationError("--r0-max", "must exceed --r0-min");
    if (a.steps < 2) throw CLI::ValidationError("--steps", "need at least 2 grid points");

    // r0 carried by the base ParamSet is irrelevant to the scan; any valid
    // value will do.
    const ParamSet base(a.sigma, 1.0, a.beta);
    std::vector<double> grid(a.steps);
    const double span = a.r0_max - a.r0_min;
    const auto n1 = static_cast<double>(a.steps - 1);
    for (std::uint64_t i = 0; i < a.steps; ++i)
        grid[i] = a.r0_min + span * static_cast<double>(i) / n1;

    const auto records = bifurcation_scan(base, grid, a.threads);
    OutputSink sink(a.out);
    write_scan_csv(sink.stream(), records);
    return kExitOk;
}

struct LyapunovArgs {
    double sigma = 0, r0 = 0, beta = 0;
    std::string x0 = "1,1,1";
    double horizon = 2000;
    double renorm_dt = 0.5;
    double transient = 50;
    std::string out;
};

int run_lyapunov(const LyapunovArgs& a) {
    const ParamSet p(a.sigma, a.r0, a.beta);
    const State x0{parse_triple(a.x0)};
    const LyapunovResult res = lyapunov_spectrum(p, x0, a.horizon, a.renorm_dt, a.transient);
    OutputSink sink(a.out);
    sink.stream() << lyapunov_report(p, res).dump(2) << '\n';
    return kExitOk;
}

struct VerifyArgs {
    double sigma = 0, r0 = 0, beta = 0;
    std::uint64_t samples = 100000;
    std::uint64_t seed = 42;
    std::size_t threads = 0;
    std::string out;
};

int run_verify(const VerifyArgs& a) {
    const ParamSet p(a.sigma, a.r0, a.beta);
    OutputSink sink(a.out);
    std::ostream& os = sink.stream();
    bool all_pass = true;
    auto report = [&](bool pass, const std::string& line) {
        os << (pass ? "[PASS] " : "[FAIL] ") << line << '\n';
        all_pass = all_pass && pass;
    };

    // 1. Dissipation inequality at random states.
    const AuditReport audit = dissipativity_audit(p, a.samples, a.seed);
    report(audit.passed, "dissipativity: " + std::to_string(audit.n_samples) + " samples, " +
                             std::to_string(audit.violations) + " violations, max slack " +
                             format_g17(audit.max_slack));

    // 2. Equilibrium residuals and RH/eigenvalue agreement across random
    //    parameter sets (deterministic draw, evaluation parallelized).
    constexpr std::size_t kParamSets = 200;
    std::mt19937_64 rng(a.seed ^ 0x9e3779b97f4a7c15ULL);
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    std::vector<ParamSet> params;
    params.reserve(kParamSets);
    for (std::size_t i = 0; i < kParamSets; ++i)
        params.emplace_back(uniform(0.5, 10.0), uniform(0.1, 30.0), uniform(0.5, 10.0));

    std::vector<double> residuals(kParamSets, 0.0);
    std::vector<char> consistent(kParamSets, 1);
    parallel_for(kParamSets, a.threads, [&](std::size_t i) {
        const ParamSet& q = params[i];
        double worst = 0.0;
        for (const Equilibrium& eq : equilibria(q)) {
            const Vec3 f = vector_field(q, eq.point);
            for (double c : f) worst = std::max(worst, std::abs(c));
            try {
                classify_equilibrium(q, eq);
            } catch (const std::logic_error&) {
                consistent[i] = 0;
            }
        }
        residuals[i] = worst;
    });
    const double max_residual = *std::max_element(residuals.begin(), residuals.end());
    const bool residual_ok = max_residual < 1e-12;
    report(residual_ok, "equilibrium residuals: " + std::to_string(kParamSets) +
                            " parameter sets, max |f| = " + format_g17(max_residual));
    const bool agree_ok =
        std::all_of(consistent.begin(), consistent.end(), [](char c) { return c != 0; });
    report(agree_ok, "routh-hurwitz / eigenvalue agreement: " + std::to_string(kParamSets) +
                         " parameter sets");

    os << "overall: " << (all_pass ? "PASS" : "FAIL") << '\n';
    return all_pass ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equilibria, stability, bifurcations and chaos of the T/I/M social-memory model"};
    app.require_subcommand(1);
    // `--h` is the step-size flag, so help must not claim the short `-h`.
    app.set_help_flag("--help", "Print help and exit");

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Integrate a trajectory and write t,T,I,M");
    c_sim->set_help_flag("--help", "Print help and exit");
    c_sim->add_option("--sigma", sim.sigma, "Responsiveness sigma")->required();
    c_sim->add_option("--r0", sim.r0, "Infection potential r0")->required();
    c_sim->add_option("--beta", sim.beta, "Memory decay beta")->required();
    c_sim->add_option("--x0", sim.x0, "Initial state T,I,M (default 1,1,1)");
    c_sim->add_option("--t-end", sim.t_end, "Integration horizon")->required();
    c_sim->add_option("--method", sim.method, "Integrator: rk4 | adaptive54")
        ->check(CLI::IsMember({"rk4", "adaptive54"}));
    c_sim->add_option("--h", sim.h, "Step size (rk4) / initial step (adaptive54)");
    c_sim->add_option("--tol", sim.tol, "Absolute and relative tolerance (adaptive54)");
    c_sim->add_option("--stride", sim.stride, "Record every n-th step");
    c_sim->add_option("--format", sim.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
    c_sim->add_option("--out", sim.out, "Output path (default stdout)");

    EquilibriaArgs eqa;
    auto* c_eq = app.add_subcommand("equilibria", "Classify all equilibrium branches");
    c_eq->set_help_flag("--help", "Print help and exit");
    c_eq->add_option("--sigma", eqa.sigma, "Responsiveness sigma")->required();
    c_eq->add_option("--r0", eqa.r0, "Infection potential r0")->required();
    c_eq->add_option("--beta", eqa.beta, "Memory decay beta")->required();
    c_eq->add_option("--format", eqa.format, "json")->check(CLI::IsMember({"json"}));
    c_eq->add_option("--out", eqa.out, "Output path (default stdout)");

    ScanArgs scan;
    auto* c_scan = app.add_subcommand("scan", "Regime scan over r0 (CSV)");
    c_scan->set_help_flag("--help", "Print help and exit");
    c_scan->add_option("--sigma", scan.sigma, "Responsiveness sigma")->required();
    c_scan->add_option("--beta", scan.beta, "Memory decay beta")->required();
    c_scan->add_option("--r0-min", scan.r0_min, "Grid start")->required();
    c_scan->add_option("--r0-max", scan.r0_max, "Grid end")->required();
    c_scan->add_option("--steps", scan.steps, "Number of grid points (>= 2)")->required();
    c_scan->add_option("--threads", scan.threads, "Worker threads (0 = hardware)");
    c_scan->add_option("--out", scan.out, "Output path (default stdout)");

    LyapunovArgs lya;
    auto* c_lya = app.add_subcommand("lyapunov", "Benettin Lyapunov spectrum (JSON)");
    c_lya->set_help_flag("--help", "Print help and exit");
    c_lya->add_option("--sigma", lya.sigma, "Responsiveness sigma")->required();
    c_lya->add_option("--r0", lya.r0, "Infection potential r0")->required();
    c_lya->add_option("--beta", lya.beta, "Memory decay beta")->required();
    c_lya->add_option("--x0", lya.x0, "Initial state T,I,M (default 1,1,1)");
    c_lya->add_option("--horizon", lya.horizon, "Averaging horizon (default 2000)");
    c_lya->add_option("--renorm-dt", lya.renorm_dt, "Re-orthonormalization interval (default 0.5)");
    c_lya->add_option("--transient", lya.transient, "Discarded transient (default 50)");
    c_lya->add_option("--out", lya.out, "Output path (default stdout)");

    VerifyArgs ver;
    auto* c_ver = app.add_subcommand("verify", "Check proved invariants; exit 0 iff all pass");
    c_ver->set_help_flag("--help", "Print help and exit");
    c_ver->add_option("--sigma", ver.sigma, "Responsiveness sigma")->required();
    c_ver->add_option("--r0", ver.r0, "Infection potential r0")->required();
    c_ver->add_option("--beta", ver.beta, "Memory decay beta")->required();
    c_ver->add_option("--samples", ver.samples, "Random states for the dissipativity audit");
    c_ver->add_option("--seed", ver.seed, "RNG seed (default 42)");
    c_ver->add_option("--threads", ver.threads, "Worker threads (0 = hardware)");
    c_ver->add_option("--out", ver.out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
        if (c_sim->parsed()) return run_simulate(sim);
        if (c_eq->parsed()) return run_equilibria(eqa);
        if (c_scan->parsed()) return run_scan(scan);
        if (c_lya->parsed()) return run_lyapunov(lya);
        return run_verify(ver);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const timdyn::IntegrationError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}
