#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "eobs/lyapunov.hpp"

namespace eobs {

// Closed-form critical erasure probability: below critical_p no gain can
// make the observation error mean-square-exponentially stable.
struct CriticalProbability {
    double critical_p = 0.0;       // p*; q* = 1 - p* is the critical dropout rate
    int output_dim = 1;            // M
    double log_expansion = 0.0;    // sum of log eigenvalue moduli / positive exponents
    std::string note;

    [[nodiscard]] double critical_q() const { return 1.0 - critical_p; }
    // Log-domain left-hand side M log(1-p) + 2 * log_expansion at a given p.
    [[nodiscard]] double lhs(double p) const;
};

struct LimitVerdict {
    double p = 0.0;
    int output_dim = 1;
    double lhs = 0.0;  // log-domain condition value
    double critical_p = 0.0;
    bool satisfied = false;  // lhs < 0, i.e. p above the critical probability
};

// Linear systems with all eigenvalue moduli > 1: critical_p = 1 - prod^(-2/M).
[[nodiscard]] CriticalProbability linear_critical_p(const std::vector<double>& eigenvalue_moduli,
                                                    int output_dim);

// Nonlinear systems on a compact attractor; uses only the positive
// exponents (negative ones are truncated, matching how the Henon case is
// handled despite its contracting direction).  Requires a converged
// spectrum.
[[nodiscard]] CriticalProbability nonlinear_critical_p(
    const LyapunovSpectrum& spectrum, int output_dim,
    double convergence_threshold = default_convergence_threshold);

[[nodiscard]] LimitVerdict verdict_at(const CriticalProbability& limit, double p);

// Entropy form: lhs = M log(1-p) + 2 H, where H is the measure-theoretic
// entropy or its Ruelle upper bound (sum of positive exponents).
[[nodiscard]] LimitVerdict entropy_condition(double p, int output_dim, double entropy);

[[nodiscard]] nlohmann::json to_json(const CriticalProbability& limit);
[[nodiscard]] nlohmann::json to_json(const LimitVerdict& verdict);

}  // namespace eobs
