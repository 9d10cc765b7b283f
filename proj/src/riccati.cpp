#include "eobs/riccati.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "eobs/csv.hpp"

namespace eobs {

namespace {

constexpr double eig_floor = 1e-12;
constexpr double eig_ceiling = 1e12;

void check_symmetric(const Mat& m, const char* name) {
    const double scale = 1.0 + m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        std::ostringstream msg;
        msg << name << " must be symmetric";
        throw ValidationError(msg.str());
    }
}

// log det of a symmetric positive-(semi)definite matrix via Cholesky-style
// factorization; -inf for a singular PSD matrix.
double logdet_psd(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(m);
    double s = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double v = eig.eigenvalues()(i);
        if (v <= 0.0) return -std::numeric_limits<double>::infinity();
        s += std::log(v);
    }
    return s;
}

}  // namespace

Mat riccati_step(const Mat& Q0, const Mat& A, const Mat& C, const Mat& R) {
    const auto n = Q0.rows();
    const auto m = C.rows();
    if (Q0.cols() != n || A.rows() != n || A.cols() != n || C.cols() != n || R.rows() != n ||
        R.cols() != n)
        throw ValidationError("riccati_step: dimension mismatch (need Q0,A,R NxN and C MxN)");
    check_symmetric(Q0, "riccati_step: Q0");
    check_symmetric(R, "riccati_step: R");

    const Mat innovation = Mat::Identity(m, m) + C * Q0 * C.transpose();
    Eigen::LLT<Mat> llt(innovation);
    if (llt.info() != Eigen::Success)
        throw NumericalError(
            "riccati_step: I + C Q0 C' is not positive definite (corrupted input)");

    const Mat aqc = A * Q0 * C.transpose();  // N x M
    Mat next = A * Q0 * A.transpose() + R - aqc * llt.solve(aqc.transpose());
    return 0.5 * (next + next.transpose());
}

Mat optimal_gain(const Mat& Q, const Mat& A, const Mat& C) {
    const Mat s = C * Q * C.transpose();
    Eigen::LLT<Mat> llt(s);
    if (llt.info() != Eigen::Success)
        throw NumericalError("optimal_gain: C Q C' singular (output map rank-deficient here)");
    const Mat aqc = A * Q * C.transpose();
    return llt.solve(aqc.transpose()).transpose();
}

double RiccatiTrace::final_log_mean() const {
    if (running_log_mean.empty())
        throw NumericalError("riccati trace is empty; no verdict available");
    return running_log_mean.back();
}

RiccatiTrace condition_trace(const SystemModel& model, const Vec& x0, long horizon, double p,
                             const RiccatiOptions& options) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("condition_trace: p must be in (0, 1)");
    if (horizon < 1) throw ValidationError("condition_trace: horizon must be >= 1");
    if (options.epsilon < 0) throw ValidationError("condition_trace: epsilon must be >= 0");
    const int n = model.state_dim;
    const int m = model.output_dim;
    const bool exact_mode = options.epsilon == 0.0;

    Mat q = options.q_init.size() > 0 ? options.q_init : Mat::Identity(n, n);
    if (q.rows() != n || q.cols() != n)
        throw ValidationError("condition_trace: Q_init must be NxN");
    check_symmetric(q, "condition_trace: Q_init");
    const Mat r_mat = options.epsilon * Mat::Identity(n, n);

    RiccatiTrace trace;
    trace.p = p;
    trace.epsilon = options.epsilon;
    trace.states.reserve(static_cast<std::size_t>(horizon) + 1);
    trace.q0.reserve(static_cast<std::size_t>(horizon) + 1);
    trace.gains.reserve(static_cast<std::size_t>(horizon) + 1);
    trace.condition_values.reserve(static_cast<std::size_t>(horizon));
    trace.running_log_mean.reserve(static_cast<std::size_t>(horizon));

    const double m_log_1mp = m * std::log1p(-p);
    double log_sum = 0.0, log_carry = 0.0;  // Kahan over log condition values
    bool first = true;
    Vec x = x0;

    for (long t = 0; t <= horizon; ++t) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(q);
        const double min_eig = eig.eigenvalues().minCoeff();
        const double max_eig = eig.eigenvalues().maxCoeff();
        if (first) {
            trace.min_eig_seen = min_eig;
            trace.max_eig_seen = max_eig;
            first = false;
        } else {
            trace.min_eig_seen = std::min(trace.min_eig_seen, min_eig);
            trace.max_eig_seen = std::max(trace.max_eig_seen, max_eig);
        }
        if (max_eig > eig_ceiling) {
            trace.flagged = true;
            trace.flag_step = t;
            trace.flag_reason = "Q0 eigenvalue above 1e12 (unbounded)";
        } else if (!exact_mode && min_eig < eig_floor) {
            trace.flagged = true;
            trace.flag_step = t;
            trace.flag_reason = "Q0 eigenvalue below 1e-12 (degenerate)";
        }
        if (exact_mode && min_eig < 0.0) {
            // Rounding can push the deliberately flat direction fractionally
            // negative; clamp so Q stays positive semi-definite.
            Mat clamped = eig.eigenvalues().cwiseMax(0.0).asDiagonal();
            q = eig.eigenvectors() * clamped * eig.eigenvectors().transpose();
            q = 0.5 * (q + q.transpose());
        }

        trace.states.push_back(x);
        trace.q0.push_back(q);
        try {
            trace.gains.push_back(optimal_gain(q, jacobian(model, x), output_jacobian(model, x)));
        } catch (const NumericalError&) {
            // Rank-deficient output map at this state: the trace-minimizing
            // gain is undefined, but the condition values are still valid.
            trace.gains.push_back(Mat::Constant(n, m, std::numeric_limits<double>::quiet_NaN()));
        }
        if (trace.flagged) break;
        if (t == horizon) break;

        const Mat a = jacobian(model, x);
        const Mat c = output_jacobian(model, x);
        const Mat next_q = riccati_step(q, a, c, r_mat);

        double log_cond;
        if (exact_mode) {
            // With R = 0, det Q' = (det A)^2 det Q / det(I + C Q C'), so the
            // condition value collapses to (1-p)^M det(I + C Q C') exactly.
            log_cond = m_log_1mp + logdet_psd(Mat::Identity(m, m) + c * q * c.transpose());
        } else {
            log_cond = m_log_1mp + 2.0 * std::log(std::abs(a.determinant())) + logdet_psd(q) -
                       logdet_psd(next_q);
        }
        const double y = log_cond - log_carry;
        const double s = log_sum + y;
        log_carry = (s - log_sum) - y;
        log_sum = s;
        trace.condition_values.push_back(std::exp(log_cond));
        trace.running_log_mean.push_back(log_sum / static_cast<double>(t + 1));

        q = next_q;
        x = step(model, x);
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "condition_trace: trajectory diverged to non-finite values at step " << t + 1;
            throw NumericalError(msg.str());
        }
    }
    return trace;
}

void write_csv(const RiccatiTrace& trace, std::ostream& out) {
    out << "t,det_Q0,condition_value,running_log_mean\n";
    for (std::size_t t = 0; t < trace.condition_values.size(); ++t) {
        const double det_q = std::exp(logdet_psd(trace.q0[t]));
        out << t << ',' << format_number(det_q) << ',' << format_number(trace.condition_values[t])
            << ',' << format_number(trace.running_log_mean[t]) << '\n';
    }
}

}  // namespace eobs
