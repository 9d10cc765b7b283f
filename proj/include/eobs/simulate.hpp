#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "eobs/model.hpp"
#include "eobs/types.hpp"

namespace eobs {

// Bernoulli(p) reception bits xi_0 .. xi_T; bit t depends only on (seed, t),
// so realizations with the same seed are coupled monotonically across p
// (common random numbers: raising p only turns erasures into receptions).
struct ErasureRealization {
    double p = 0.0;
    std::vector<std::uint8_t> xi;
    std::uint64_t seed = 0;
};

[[nodiscard]] ErasureRealization erasure_sequence(double p, long horizon, std::uint64_t seed);

// Plant and observer trajectories under one erasure realization.  On a
// received step the observer applies the output-injection correction
// K(y_t) - K(y_hat_t); on an erased step it predicts openly (K(0) = 0).
struct ObserverRun {
    std::vector<Vec> plant_states;
    std::vector<Vec> observer_states;
    std::vector<double> error_norms;
    ErasureRealization realization;
    bool diverged = false;
    long divergence_step = -1;
};

[[nodiscard]] ObserverRun observe_run(const SystemModel& model, const ObserverGain& gain,
                                      const Vec& x0, const Vec& xhat0,
                                      const ErasureRealization& realization,
                                      double noise_amplitude, std::uint64_t noise_seed);

// Second-moment propagation of the linearized error along the noise-free
// nominal trajectory: Sigma' = (A - xi K~ C) Sigma (A - xi K~ C)', with
// K~(x) the gain Jacobian at h(x).
struct CovarianceTrace {
    std::vector<Mat> sigma;
    double peak_trace = 0.0;
    long peak_step = 0;
    bool diverged = false;
    long divergence_step = -1;
};

[[nodiscard]] CovarianceTrace covariance_propagate(const SystemModel& model,
                                                   const ObserverGain& gain, const Vec& x0,
                                                   const Mat& sigma0,
                                                   const ErasureRealization& realization);

struct MonteCarloReport {
    double p = 0.0;
    long realizations = 0;
    std::vector<double> mean_sq_error;  // pointwise average of ||e_t||^2
    double peak_mean_sq_error = 0.0;
    long peak_step = 0;
    std::uint64_t master_seed = 0;
    std::vector<long> diverged_realizations;
};

// Averages ||e_t||^2 over R realizations; realization r derives its erasure
// and plant-noise streams from (master_seed, r), and the average is reduced
// in realization order, so the report is identical for any thread count.
[[nodiscard]] MonteCarloReport monte_carlo(const SystemModel& model, const ObserverGain& gain,
                                           const Vec& x0, const Vec& xhat0, double p, long horizon,
                                           long realizations, double noise_amplitude,
                                           std::uint64_t master_seed, int threads = 0);
[[nodiscard]] MonteCarloReport monte_carlo_serial(const SystemModel& model,
                                                  const ObserverGain& gain, const Vec& x0,
                                                  const Vec& xhat0, double p, long horizon,
                                                  long realizations, double noise_amplitude,
                                                  std::uint64_t master_seed);

enum class SweepMode { full, linearized };

struct SweepPoint {
    double p = 0.0;
    double peak = 0.0;  // +inf when diverged
    bool diverged = false;
};

struct SweepResult {
    std::vector<SweepPoint> points;  // ordered by p
    double critical_p = 0.0;
    SweepMode mode = SweepMode::linearized;
    std::uint64_t master_seed = 0;
};

struct SweepOptions {
    SweepMode mode = SweepMode::linearized;
    double noise_amplitude = 1e-6;  // full mode only
    Vec xhat0;                      // full mode only; empty: zero vector
    Mat sigma0;                     // linearized mode only; empty: identity
    // Critical probability to mark in the output; NaN computes it from the
    // model's Lyapunov spectrum along the trajectory from x0.
    double critical_p = std::numeric_limits<double>::quiet_NaN();
    int threads = 0;
};

// Peak statistic vs p over the grid, sharing erasure streams across grid
// points (common random numbers).  Full mode averages Monte Carlo
// mean-square-error peaks; linearized mode averages covariance-trace peaks.
[[nodiscard]] SweepResult sweep_p(const SystemModel& model, const ObserverGain& gain,
                                  const Vec& x0, const std::vector<double>& p_grid, long horizon,
                                  long realizations, std::uint64_t master_seed,
                                  const SweepOptions& options = {});
[[nodiscard]] SweepResult sweep_p_serial(const SystemModel& model, const ObserverGain& gain,
                                         const Vec& x0, const std::vector<double>& p_grid,
                                         long horizon, long realizations,
                                         std::uint64_t master_seed, const SweepOptions& options = {});

// Least-squares fit of log(values[t]) ~ log_level + t * log_rate over
// [t_begin, t_end); entries <= 0 are skipped.  Used for empirical
// mean-square-exponential-stability readouts.
struct EnvelopeFit {
    double log_level = 0.0;
    double log_rate = 0.0;
    long points_used = 0;
};

[[nodiscard]] EnvelopeFit fit_exponential_envelope(const std::vector<double>& values, long t_begin,
                                                   long t_end);

void write_csv(const MonteCarloReport& report, std::ostream& out);
void write_csv(const SweepResult& result, std::ostream& out);

}  // namespace eobs
