// Times the OpenMP kernels against their serial reference implementations
// and checks that both produce bit-identical results.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "eobs/model.hpp"
#include "eobs/observability.hpp"
#include "eobs/parallel.hpp"
#include "eobs/simulate.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

template <typename F>
double time_seconds(F&& body) {
    const auto start = clock_type::now();
    body();
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-22s serial %8.3fs   parallel %8.3fs   speedup %5.2fx   %s\n", name, serial_s,
                parallel_s, serial_s / parallel_s, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel benchmark"};
    long realizations = 200;
    long steps = 20000;
    long samples = 20000;
    int threads = 0;
    app.add_option("--realizations", realizations, "Monte Carlo realizations");
    app.add_option("--steps", steps, "time horizon");
    app.add_option("--samples", samples, "observability sample count");
    app.add_option("--threads", threads, "thread count (0 = auto)");
    CLI11_PARSE(app, argc, argv);

    const eobs::BuiltinSystem sys = eobs::builtin("henon");
    const eobs::Vec x0 = eobs::Vec::Constant(2, 0.1);
    const eobs::Vec xhat0 = eobs::Vec::Zero(2);
    const std::uint64_t seed = 20240817;

    std::printf("threads: %d\n", eobs::resolve_threads(threads));

    {
        eobs::MonteCarloReport serial, parallel;
        const double ts = time_seconds([&] {
            serial = eobs::monte_carlo_serial(sys.model, sys.gain, x0, xhat0, 0.7, steps,
                                              realizations, 1e-6, seed);
        });
        const double tp = time_seconds([&] {
            parallel = eobs::monte_carlo(sys.model, sys.gain, x0, xhat0, 0.7, steps, realizations,
                                         1e-6, seed, threads);
        });
        bool identical = serial.mean_sq_error.size() == parallel.mean_sq_error.size();
        for (std::size_t t = 0; identical && t < serial.mean_sq_error.size(); ++t)
            identical = serial.mean_sq_error[t] == parallel.mean_sq_error[t];
        report("monte-carlo", ts, tp, identical);
    }

    {
        const eobs::Trajectory warm = eobs::trajectory(sys.model, x0, 1000 + samples, 0.0, 0);
        const std::vector<eobs::Vec> points(warm.states.begin() + 1000, warm.states.end() - 1);
        eobs::BoundsScan serial, parallel;
        const double ts =
            time_seconds([&] { serial = eobs::bounds_scan_serial(sys.model, points); });
        const double tp = time_seconds(
            [&] { parallel = eobs::bounds_scan(sys.model, points, eobs::default_rank_tol, threads); });
        const bool identical = serial.alpha_theta == parallel.alpha_theta &&
                               serial.beta_theta == parallel.beta_theta &&
                               serial.worst_point == parallel.worst_point;
        report("observability-scan", ts, tp, identical);
    }

    {
        const std::vector<double> grid = {0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.8, 0.9};
        eobs::SweepOptions options;
        options.critical_p = 0.5;  // skip the spectrum estimate; timing only
        options.threads = threads;
        eobs::SweepResult serial, parallel;
        const double ts = time_seconds([&] {
            serial = eobs::sweep_p_serial(sys.model, sys.gain, x0, grid, steps, realizations / 4,
                                          seed, options);
        });
        const double tp = time_seconds([&] {
            parallel = eobs::sweep_p(sys.model, sys.gain, x0, grid, steps, realizations / 4, seed,
                                     options);
        });
        bool identical = serial.points.size() == parallel.points.size();
        for (std::size_t i = 0; identical && i < serial.points.size(); ++i)
            identical = serial.points[i].peak == parallel.points[i].peak &&
                        serial.points[i].diverged == parallel.points[i].diverged;
        report("sweep-linearized", ts, tp, identical);
    }

    return 0;
}
