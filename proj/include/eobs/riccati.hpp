#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "eobs/model.hpp"
#include "eobs/types.hpp"

namespace eobs {

// One step of the covariance-style recursion
//   Q' = A Q A' + R - A Q C' (I_M + C Q C')^-1 C Q A',
// returned symmetrized.  The unit output-noise term I_M is baked in: the
// recursion is used in its normalized form.
[[nodiscard]] Mat riccati_step(const Mat& Q0, const Mat& A, const Mat& C, const Mat& R);

// Trace-minimizing gain A Q C' (C Q C')^-1.
[[nodiscard]] Mat optimal_gain(const Mat& Q, const Mat& A, const Mat& C);

struct RiccatiOptions {
    // R = epsilon * I.  epsilon = 0 selects the exact determinant-identity
    // path: the condition value reduces to (1-p)^M det(I_M + C Q C'), which
    // stays well-conditioned even as Q flattens along contracting
    // directions, and the small-eigenvalue stop is disabled (the flat
    // directions are deliberate, not a failure).
    double epsilon = 1e-3;
    Mat q_init;  // empty: identity
};

struct RiccatiTrace {
    std::vector<Vec> states;                // x_0 .. x_T
    std::vector<Mat> q0;                    // Q0(x_0) .. Q0(x_T)
    std::vector<Mat> gains;                 // trace-minimizing gain at each state
    std::vector<double> condition_values;   // (1-p)^M (det A_t)^2 det Q_t / det Q_{t+1}
    std::vector<double> running_log_mean;   // running mean of log condition_values
    double min_eig_seen = 0.0;
    double max_eig_seen = 0.0;
    double p = 0.0;
    double epsilon = 0.0;
    bool flagged = false;  // Q0 eigenvalue left [1e-12, 1e12]: stopped early
    long flag_step = -1;
    std::string flag_reason;

    // Sign of the mean log condition value at the horizon: negative means
    // the pointwise necessary condition is satisfiable along this trajectory.
    [[nodiscard]] double final_log_mean() const;
    [[nodiscard]] bool satisfied() const { return final_log_mean() < 0.0; }
};

// Iterates riccati_step along the noise-free trajectory from x0 and records
// the per-step condition values whose running log-mean at the horizon gives
// the stability verdict.
[[nodiscard]] RiccatiTrace condition_trace(const SystemModel& model, const Vec& x0, long horizon,
                                           double p, const RiccatiOptions& options = {});

// CSV columns: t, det_Q0, condition_value, running_log_mean.
void write_csv(const RiccatiTrace& trace, std::ostream& out);

}  // namespace eobs
