#include "eobs/simulate.hpp"

#include <cmath>
#include <exception>
#include <ostream>
#include <sstream>

#include "eobs/csv.hpp"
#include "eobs/lyapunov.hpp"
#include "eobs/limits.hpp"
#include "eobs/parallel.hpp"
#include "eobs/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eobs {

ErasureRealization erasure_sequence(double p, long horizon, std::uint64_t seed) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("erasure_sequence: p must be in (0, 1)");
    if (horizon < 0) throw ValidationError("erasure_sequence: horizon must be >= 0");
    ErasureRealization realization;
    realization.p = p;
    realization.seed = seed;
    realization.xi.resize(static_cast<std::size_t>(horizon) + 1);
    for (long t = 0; t <= horizon; ++t)
        realization.xi[static_cast<std::size_t>(t)] =
            rng::uniform01(seed, static_cast<std::uint64_t>(t)) < p ? 1 : 0;
    return realization;
}

ObserverRun observe_run(const SystemModel& model, const ObserverGain& gain, const Vec& x0,
                        const Vec& xhat0, const ErasureRealization& realization,
                        double noise_amplitude, std::uint64_t noise_seed) {
    const int n = model.state_dim;
    if (x0.size() != n || xhat0.size() != n)
        throw ValidationError("observe_run: x0 and xhat0 must have the model's state dimension");
    if (realization.xi.empty()) throw ValidationError("observe_run: empty erasure realization");
    if (noise_amplitude < 0) throw ValidationError("observe_run: noise_amplitude must be >= 0");

    const long horizon = static_cast<long>(realization.xi.size()) - 1;
    ObserverRun run;
    run.realization = realization;
    run.plant_states.reserve(realization.xi.size());
    run.observer_states.reserve(realization.xi.size());
    run.error_norms.reserve(realization.xi.size());

    Vec x = x0;
    Vec xhat = xhat0;
    for (long t = 0;; ++t) {
        run.plant_states.push_back(x);
        run.observer_states.push_back(xhat);
        run.error_norms.push_back((x - xhat).norm());
        if (t == horizon) break;

        Vec x_next = model.map(x);
        if (noise_amplitude > 0) {
            for (int i = 0; i < n; ++i)
                x_next[i] += noise_amplitude * rng::uniform01(noise_seed, static_cast<std::uint64_t>(t),
                                                              static_cast<std::uint64_t>(i));
        }
        Vec xhat_next = model.map(xhat);
        if (realization.xi[static_cast<std::size_t>(t)]) {
            xhat_next += gain.gain(model.output(x)) - gain.gain(model.output(xhat));
        }
        const bool bad_state = !x_next.allFinite() || x_next.norm() > divergence_threshold;
        const bool bad_observer = !xhat_next.allFinite() || xhat_next.norm() > divergence_threshold;
        if (bad_state || bad_observer) {
            run.diverged = true;
            run.divergence_step = t + 1;
            break;
        }
        x = std::move(x_next);
        xhat = std::move(xhat_next);
    }
    return run;
}

CovarianceTrace covariance_propagate(const SystemModel& model, const ObserverGain& gain,
                                     const Vec& x0, const Mat& sigma0,
                                     const ErasureRealization& realization) {
    const int n = model.state_dim;
    if (x0.size() != n) throw ValidationError("covariance_propagate: x0 dimension mismatch");
    if (sigma0.rows() != n || sigma0.cols() != n)
        throw ValidationError("covariance_propagate: Sigma0 must be NxN");
    if ((sigma0 - sigma0.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * (1.0 + sigma0.cwiseAbs().maxCoeff()))
        throw ValidationError("covariance_propagate: Sigma0 must be symmetric");
    if (realization.xi.empty())
        throw ValidationError("covariance_propagate: empty erasure realization");

    const long horizon = static_cast<long>(realization.xi.size()) - 1;
    CovarianceTrace trace;
    trace.sigma.reserve(realization.xi.size());

    Vec x = x0;
    Mat sigma = 0.5 * (sigma0 + sigma0.transpose());
    trace.peak_trace = sigma.trace();
    trace.peak_step = 0;
    for (long t = 0;; ++t) {
        trace.sigma.push_back(sigma);
        const double tr = sigma.trace();
        if (tr > trace.peak_trace) {
            trace.peak_trace = tr;
            trace.peak_step = t;
        }
        if (t == horizon) break;

        Mat closed_loop = jacobian(model, x);
        if (realization.xi[static_cast<std::size_t>(t)]) {
            const Mat ktilde = gain_jacobian(gain, model.output(x), n);
            closed_loop -= ktilde * output_jacobian(model, x);
        }
        Mat next = closed_loop * sigma * closed_loop.transpose();
        next = 0.5 * (next + next.transpose());
        if (!next.allFinite() || next.trace() > divergence_threshold * divergence_threshold) {
            trace.diverged = true;
            trace.divergence_step = t + 1;
            trace.peak_trace = std::numeric_limits<double>::infinity();
            break;
        }
        sigma = std::move(next);
        x = step(model, x);
    }
    return trace;
}

namespace {

// Squared error norms of one Monte Carlo realization, padded with +inf past
// a divergence so the pointwise average reflects the blow-up.
std::vector<double> realization_sq_errors(const SystemModel& model, const ObserverGain& gain,
                                          const Vec& x0, const Vec& xhat0, double p, long horizon,
                                          double noise_amplitude, std::uint64_t master_seed,
                                          long r, bool& diverged) {
    const auto erasure_seed = rng::substream(master_seed, static_cast<std::uint64_t>(r), rng::role_erasure);
    const auto noise_seed = rng::substream(master_seed, static_cast<std::uint64_t>(r), rng::role_noise);
    const ObserverRun run = observe_run(model, gain, x0, xhat0,
                                        erasure_sequence(p, horizon, erasure_seed),
                                        noise_amplitude, noise_seed);
    diverged = run.diverged;
    std::vector<double> sq(static_cast<std::size_t>(horizon) + 1,
                           std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < run.error_norms.size(); ++t)
        sq[t] = run.error_norms[t] * run.error_norms[t];
    return sq;
}

MonteCarloReport reduce_monte_carlo(double p, long horizon, long realizations,
                                    std::uint64_t master_seed,
                                    const std::vector<std::vector<double>>& per_run,
                                    const std::vector<std::uint8_t>& diverged) {
    MonteCarloReport report;
    report.p = p;
    report.realizations = realizations;
    report.master_seed = master_seed;
    report.mean_sq_error.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
    // Fixed reduction order (realization 0, 1, ...) keeps the result
    // bit-identical no matter how the runs were scheduled.
    for (long r = 0; r < realizations; ++r) {
        const auto& sq = per_run[static_cast<std::size_t>(r)];
        for (std::size_t t = 0; t < report.mean_sq_error.size(); ++t)
            report.mean_sq_error[t] += sq[t];
    }
    for (auto& v : report.mean_sq_error) v /= static_cast<double>(realizations);
    report.peak_mean_sq_error = report.mean_sq_error[0];
    report.peak_step = 0;
    for (std::size_t t = 1; t < report.mean_sq_error.size(); ++t) {
        if (report.mean_sq_error[t] > report.peak_mean_sq_error) {
            report.peak_mean_sq_error = report.mean_sq_error[t];
            report.peak_step = static_cast<long>(t);
        }
    }
    for (long r = 0; r < realizations; ++r)
        if (diverged[static_cast<std::size_t>(r)]) report.diverged_realizations.push_back(r);
    return report;
}

void check_monte_carlo_args(const SystemModel& model, const Vec& x0, const Vec& xhat0,
                            long horizon, long realizations) {
    if (realizations < 1) throw ValidationError("monte_carlo: need at least one realization");
    if (horizon < 1) throw ValidationError("monte_carlo: horizon must be >= 1");
    if (x0.size() != model.state_dim || xhat0.size() != model.state_dim)
        throw ValidationError("monte_carlo: x0/xhat0 dimension mismatch");
}

}  // namespace

MonteCarloReport monte_carlo_serial(const SystemModel& model, const ObserverGain& gain,
                                    const Vec& x0, const Vec& xhat0, double p, long horizon,
                                    long realizations, double noise_amplitude,
                                    std::uint64_t master_seed) {
    check_monte_carlo_args(model, x0, xhat0, horizon, realizations);
    std::vector<std::vector<double>> per_run(static_cast<std::size_t>(realizations));
    std::vector<std::uint8_t> diverged(static_cast<std::size_t>(realizations), 0);
    for (long r = 0; r < realizations; ++r) {
        bool d = false;
        per_run[static_cast<std::size_t>(r)] = realization_sq_errors(
            model, gain, x0, xhat0, p, horizon, noise_amplitude, master_seed, r, d);
        diverged[static_cast<std::size_t>(r)] = d ? 1 : 0;
    }
    return reduce_monte_carlo(p, horizon, realizations, master_seed, per_run, diverged);
}

MonteCarloReport monte_carlo(const SystemModel& model, const ObserverGain& gain, const Vec& x0,
                             const Vec& xhat0, double p, long horizon, long realizations,
                             double noise_amplitude, std::uint64_t master_seed, int threads) {
    check_monte_carlo_args(model, x0, xhat0, horizon, realizations);
    const int nthreads = resolve_threads(threads);
    std::vector<std::vector<double>> per_run(static_cast<std::size_t>(realizations));
    std::vector<std::uint8_t> diverged(static_cast<std::size_t>(realizations), 0);
    std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
    for (long r = 0; r < realizations; ++r) {
        try {
            bool d = false;
            per_run[static_cast<std::size_t>(r)] = realization_sq_errors(
                model, gain, x0, xhat0, p, horizon, noise_amplitude, master_seed, r, d);
            diverged[static_cast<std::size_t>(r)] = d ? 1 : 0;
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(eobs_monte_carlo_error)
#endif
            if (!error) error = std::current_exception();
        }
    }
    (void)nthreads;
    if (error) std::rethrow_exception(error);
    return reduce_monte_carlo(p, horizon, realizations, master_seed, per_run, diverged);
}

namespace {

struct SweepSetup {
    Mat sigma0;
    Vec xhat0;
    double critical_p = 0.0;
};

SweepSetup prepare_sweep(const SystemModel& model, const Vec& x0,
                         const std::vector<double>& p_grid, long horizon, long realizations,
                         const SweepOptions& options) {
    if (p_grid.empty()) throw ValidationError("sweep_p: p_grid must be nonempty");
    for (double p : p_grid)
        if (!(p > 0.0 && p < 1.0)) throw ValidationError("sweep_p: grid values must be in (0, 1)");
    if (horizon < 1) throw ValidationError("sweep_p: horizon must be >= 1");
    if (realizations < 1) throw ValidationError("sweep_p: need at least one realization");

    SweepSetup setup;
    setup.sigma0 = options.sigma0.size() > 0
                       ? options.sigma0
                       : Mat(Mat::Identity(model.state_dim, model.state_dim));
    setup.xhat0 = options.xhat0.size() > 0 ? options.xhat0 : Vec(Vec::Zero(model.state_dim));
    if (std::isnan(options.critical_p)) {
        // Mark the closed-form limit computed from this trajectory's spectrum.
        const LyapunovSpectrum spec = spectrum(model, x0, 200000, default_burn_in, 1);
        setup.critical_p = nonlinear_critical_p(spec, model.output_dim).critical_p;
    } else {
        setup.critical_p = options.critical_p;
    }
    return setup;
}

}  // namespace

SweepResult sweep_p_serial(const SystemModel& model, const ObserverGain& gain, const Vec& x0,
                           const std::vector<double>& p_grid, long horizon, long realizations,
                           std::uint64_t master_seed, const SweepOptions& options) {
    const SweepSetup setup = prepare_sweep(model, x0, p_grid, horizon, realizations, options);
    SweepResult result;
    result.mode = options.mode;
    result.master_seed = master_seed;
    result.critical_p = setup.critical_p;
    for (double p : p_grid) {
        SweepPoint point;
        point.p = p;
        if (options.mode == SweepMode::full) {
            const MonteCarloReport report =
                monte_carlo_serial(model, gain, x0, setup.xhat0, p, horizon, realizations,
                                   options.noise_amplitude, master_seed);
            point.peak = report.peak_mean_sq_error;
            point.diverged = !report.diverged_realizations.empty();
        } else {
            double sum = 0.0;
            for (long r = 0; r < realizations; ++r) {
                const auto seed =
                    rng::substream(master_seed, static_cast<std::uint64_t>(r), rng::role_erasure);
                const CovarianceTrace trace = covariance_propagate(
                    model, gain, x0, setup.sigma0, erasure_sequence(p, horizon, seed));
                if (trace.diverged) point.diverged = true;
                sum += trace.peak_trace;
            }
            point.peak = sum / static_cast<double>(realizations);
        }
        result.points.push_back(point);
    }
    std::sort(result.points.begin(), result.points.end(),
              [](const SweepPoint& a, const SweepPoint& b) { return a.p < b.p; });
    return result;
}

SweepResult sweep_p(const SystemModel& model, const ObserverGain& gain, const Vec& x0,
                    const std::vector<double>& p_grid, long horizon, long realizations,
                    std::uint64_t master_seed, const SweepOptions& options) {
    const SweepSetup setup = prepare_sweep(model, x0, p_grid, horizon, realizations, options);
    const int nthreads = resolve_threads(options.threads);
    const long grid_size = static_cast<long>(p_grid.size());

    SweepResult result;
    result.mode = options.mode;
    result.master_seed = master_seed;
    result.critical_p = setup.critical_p;
    result.points.resize(p_grid.size());

    std::exception_ptr error;
    if (options.mode == SweepMode::full) {
        // Realizations already run in parallel inside monte_carlo; the grid
        // loop stays sequential to avoid nested teams.
        for (long i = 0; i < grid_size; ++i) {
            const double p = p_grid[static_cast<std::size_t>(i)];
            const MonteCarloReport report =
                monte_carlo(model, gain, x0, setup.xhat0, p, horizon, realizations,
                            options.noise_amplitude, master_seed, options.threads);
            auto& point = result.points[static_cast<std::size_t>(i)];
            point.p = p;
            point.peak = report.peak_mean_sq_error;
            point.diverged = !report.diverged_realizations.empty();
        }
    } else {
        // Flatten (grid point, realization) into one index space and gather
        // peaks per pair; the averaging below is sequential in r.
        const long tasks = grid_size * realizations;
        std::vector<double> peaks(static_cast<std::size_t>(tasks), 0.0);
        std::vector<std::uint8_t> task_diverged(static_cast<std::size_t>(tasks), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
        for (long task = 0; task < tasks; ++task) {
            try {
                const long i = task / realizations;
                const long r = task % realizations;
                const auto seed =
                    rng::substream(master_seed, static_cast<std::uint64_t>(r), rng::role_erasure);
                const CovarianceTrace trace = covariance_propagate(
                    model, gain, x0, setup.sigma0,
                    erasure_sequence(p_grid[static_cast<std::size_t>(i)], horizon, seed));
                peaks[static_cast<std::size_t>(task)] = trace.peak_trace;
                task_diverged[static_cast<std::size_t>(task)] = trace.diverged ? 1 : 0;
            } catch (...) {
#ifdef _OPENMP
#pragma omp critical(eobs_sweep_error)
#endif
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
        for (long i = 0; i < grid_size; ++i) {
            auto& point = result.points[static_cast<std::size_t>(i)];
            point.p = p_grid[static_cast<std::size_t>(i)];
            double sum = 0.0;
            for (long r = 0; r < realizations; ++r) {
                const long task = i * realizations + r;
                sum += peaks[static_cast<std::size_t>(task)];
                if (task_diverged[static_cast<std::size_t>(task)]) point.diverged = true;
            }
            point.peak = sum / static_cast<double>(realizations);
        }
    }
    (void)nthreads;
    std::sort(result.points.begin(), result.points.end(),
              [](const SweepPoint& a, const SweepPoint& b) { return a.p < b.p; });
    return result;
}

EnvelopeFit fit_exponential_envelope(const std::vector<double>& values, long t_begin, long t_end) {
    if (t_begin < 0 || t_end > static_cast<long>(values.size()) || t_begin >= t_end)
        throw ValidationError("fit_exponential_envelope: invalid window");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long count = 0;
    for (long t = t_begin; t < t_end; ++t) {
        const double v = values[static_cast<std::size_t>(t)];
        if (!(v > 0.0) || !std::isfinite(v)) continue;
        const double y = std::log(v);
        const double x = static_cast<double>(t);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count < 2)
        throw NumericalError("fit_exponential_envelope: fewer than two positive finite samples");
    const double denom = static_cast<double>(count) * sxx - sx * sx;
    if (denom == 0.0) throw NumericalError("fit_exponential_envelope: degenerate window");
    EnvelopeFit fit;
    fit.log_rate = (static_cast<double>(count) * sxy - sx * sy) / denom;
    fit.log_level = (sy - fit.log_rate * sx) / static_cast<double>(count);
    fit.points_used = count;
    return fit;
}

void write_csv(const MonteCarloReport& report, std::ostream& out) {
    out << "t,mean_sq_error\n";
    for (std::size_t t = 0; t < report.mean_sq_error.size(); ++t)
        out << t << ',' << format_number(report.mean_sq_error[t]) << '\n';
}

void write_csv(const SweepResult& result, std::ostream& out) {
    out << "p,peak,diverged_flag,critical_p\n";
    for (const auto& point : result.points)
        out << format_number(point.p) << ',' << format_number(point.peak) << ','
            << (point.diverged ? 1 : 0) << ',' << format_number(result.critical_p) << '\n';
}

}  // namespace eobs
