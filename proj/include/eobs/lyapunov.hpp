#pragma once

#include <json.hpp>
#include <vector>

#include "eobs/model.hpp"
#include "eobs/types.hpp"

namespace eobs {

struct LyapunovSpectrum {
    std::vector<double> exponents;  // sorted non-increasing, nats per step
    long horizon = 0;
    long burn_in = 0;
    long renorm_period = 1;
    // Max change of any exponent estimate over the last 10% of the run.
    double convergence_residual = 0.0;

    [[nodiscard]] double sum() const;
    [[nodiscard]] double positive_sum() const;
    [[nodiscard]] bool converged(double threshold) const;
};

inline constexpr long default_burn_in = 1000;
inline constexpr double default_convergence_threshold = 1e-2;

// Benettin QR method: propagates an orthonormal frame through the Jacobian
// cocycle along the noise-free trajectory, re-orthonormalizing every
// renorm_period steps and averaging the log diagonal of the triangular
// factor (Kahan-compensated) over the steps after burn_in.
[[nodiscard]] LyapunovSpectrum spectrum(const SystemModel& model, const Vec& x0, long horizon,
                                        long burn_in = default_burn_in, long renorm_period = 1);

// |time-average of log|det A(x_t)| - sum of exponents| over the same
// horizon (determinant-sum identity).
[[nodiscard]] double det_sum_check(const SystemModel& model, const Vec& x0, long horizon);

[[nodiscard]] nlohmann::json to_json(const LyapunovSpectrum& spectrum);

}  // namespace eobs
