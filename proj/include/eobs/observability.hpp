#pragma once

#include <json.hpp>
#include <vector>

#include "eobs/model.hpp"
#include "eobs/types.hpp"

namespace eobs {

// Rank test of the stacked output map theta(x) = (h(x), h(f(x)), ..., h(f^{N-1}(x))).
struct ObservabilityReport {
    Vec point;
    Mat theta_jacobian;  // (N*M) x N, chain rule along the N-step trajectory
    Mat gram;            // theta_jacobian' * theta_jacobian
    int rank = 0;
    double min_eig = 0.0;  // local estimate of the lower Gram bound
    double max_eig = 0.0;  // local estimate of the upper Gram bound
    bool satisfied = false;
};

struct BoundsScan {
    double alpha_theta = 0.0;  // min over samples of the smallest Gram eigenvalue
    double beta_theta = 0.0;   // max over samples of the largest Gram eigenvalue
    Vec worst_point;           // sample attaining alpha_theta (first such index)
    bool all_satisfied = true;
    long first_failed = -1;  // index of the first sample failing the rank test
};

inline constexpr double default_rank_tol = 1e-8;

[[nodiscard]] ObservabilityReport rank_condition(const SystemModel& model, const Vec& x,
                                                 double tol = default_rank_tol);

// Scans sample points for the Gram eigenvalue bounds.  The parallel version
// gathers per-sample eigenvalues first and reduces sequentially, so it
// returns exactly the serial result for any thread count.
[[nodiscard]] BoundsScan bounds_scan(const SystemModel& model, const std::vector<Vec>& samples,
                                     double tol = default_rank_tol, int threads = 0);
[[nodiscard]] BoundsScan bounds_scan_serial(const SystemModel& model,
                                            const std::vector<Vec>& samples,
                                            double tol = default_rank_tol);

[[nodiscard]] nlohmann::json to_json(const ObservabilityReport& report);
[[nodiscard]] nlohmann::json to_json(const BoundsScan& scan);

}  // namespace eobs
