#include "eobs/limits.hpp"

#include <cmath>
#include <sstream>

namespace eobs {

double CriticalProbability::lhs(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("lhs: p must be in (0, 1)");
    return output_dim * std::log1p(-p) + 2.0 * log_expansion;
}

CriticalProbability linear_critical_p(const std::vector<double>& eigenvalue_moduli,
                                      int output_dim) {
    if (eigenvalue_moduli.empty())
        throw ValidationError("linear_critical_p: need at least one eigenvalue modulus");
    if (output_dim < 1) throw ValidationError("linear_critical_p: M must be >= 1");
    double log_prod = 0.0;
    for (double m : eigenvalue_moduli) {
        if (!(m > 1.0)) {
            std::ostringstream msg;
            msg << "linear_critical_p: eigenvalue modulus " << m
                << " violates the hypothesis that every eigenvalue has modulus > 1";
            throw ValidationError(msg.str());
        }
        log_prod += std::log(m);
    }
    CriticalProbability limit;
    limit.output_dim = output_dim;
    limit.log_expansion = log_prod;
    limit.critical_p = 1.0 - std::exp(-2.0 * log_prod / output_dim);
    limit.note = "all eigenvalue moduli > 1";
    return limit;
}

CriticalProbability nonlinear_critical_p(const LyapunovSpectrum& spectrum, int output_dim,
                                         double convergence_threshold) {
    if (output_dim < 1) throw ValidationError("nonlinear_critical_p: M must be >= 1");
    if (!spectrum.converged(convergence_threshold)) {
        std::ostringstream msg;
        msg << "nonlinear_critical_p: spectrum not converged (residual "
            << spectrum.convergence_residual << " >= threshold " << convergence_threshold << ")";
        throw ValidationError(msg.str());
    }
    CriticalProbability limit;
    limit.output_dim = output_dim;
    limit.log_expansion = spectrum.positive_sum();
    if (limit.log_expansion == 0.0) {
        limit.critical_p = 0.0;
        limit.note = "no positive exponents: stable system, no limitation";
    } else {
        limit.critical_p = 1.0 - std::exp(-2.0 * limit.log_expansion / output_dim);
        limit.note = "negative exponents truncated (positive-part convention)";
    }
    return limit;
}

LimitVerdict verdict_at(const CriticalProbability& limit, double p) {
    LimitVerdict v;
    v.p = p;
    v.output_dim = limit.output_dim;
    v.lhs = limit.lhs(p);
    v.critical_p = limit.critical_p;
    v.satisfied = v.lhs < 0.0;
    return v;
}

LimitVerdict entropy_condition(double p, int output_dim, double entropy) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("entropy_condition: p must be in (0, 1)");
    if (output_dim < 1) throw ValidationError("entropy_condition: M must be >= 1");
    if (entropy < 0) throw ValidationError("entropy_condition: entropy must be >= 0");
    LimitVerdict v;
    v.p = p;
    v.output_dim = output_dim;
    v.lhs = output_dim * std::log1p(-p) + 2.0 * entropy;
    // Boundary probability implied by the same entropy value.
    v.critical_p = 1.0 - std::exp(-2.0 * entropy / output_dim);
    v.satisfied = v.lhs < 0.0;
    return v;
}

nlohmann::json to_json(const CriticalProbability& limit) {
    nlohmann::json j;
    j["critical_p"] = limit.critical_p;
    j["critical_q"] = limit.critical_q();
    j["output_dim"] = limit.output_dim;
    j["log_expansion"] = limit.log_expansion;
    j["note"] = limit.note;
    return j;
}

nlohmann::json to_json(const LimitVerdict& verdict) {
    nlohmann::json j;
    j["p"] = verdict.p;
    j["output_dim"] = verdict.output_dim;
    j["lhs"] = verdict.lhs;
    j["critical_p"] = verdict.critical_p;
    j["satisfied"] = verdict.satisfied;
    return j;
}

}  // namespace eobs
