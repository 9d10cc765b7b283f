#include "eobs/observability.hpp"

#include <exception>
#include <sstream>

#include "eobs/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eobs {

ObservabilityReport rank_condition(const SystemModel& model, const Vec& x, double tol) {
    if (tol <= 0) throw ValidationError("rank_condition: tol must be > 0");
    const int n = model.state_dim;
    const int m = model.output_dim;

    ObservabilityReport report;
    report.point = x;
    report.theta_jacobian.resize(n * m, n);

    // Chain rule along the noise-free N-step trajectory:
    // d/dx h(f^k(x)) = C(x_k) * A(x_{k-1}) * ... * A(x_0).
    Vec xk = x;
    Mat phi = Mat::Identity(n, n);
    for (int k = 0; k < n; ++k) {
        if (!xk.allFinite()) {
            std::ostringstream msg;
            msg << "rank_condition: trajectory left finite range at iterate " << k;
            throw NumericalError(msg.str());
        }
        report.theta_jacobian.middleRows(k * m, m) = output_jacobian(model, xk) * phi;
        if (k + 1 < n) {
            phi = jacobian(model, xk) * phi;
            xk = step(model, xk);
        }
    }

    report.gram = report.theta_jacobian.transpose() * report.theta_jacobian;

    Eigen::JacobiSVD<Mat> svd(report.theta_jacobian);
    const double sigma_max = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    report.rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > tol * sigma_max) ++report.rank;

    Eigen::SelfAdjointEigenSolver<Mat> eig(report.gram);
    report.min_eig = eig.eigenvalues().minCoeff();
    report.max_eig = eig.eigenvalues().maxCoeff();
    report.satisfied = (report.rank == n);
    return report;
}

namespace {

BoundsScan reduce_scan(const std::vector<Vec>& samples, const std::vector<ObservabilityReport>& reports) {
    BoundsScan scan;
    scan.alpha_theta = reports[0].min_eig;
    scan.beta_theta = reports[0].max_eig;
    scan.worst_point = samples[0];
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports[i].min_eig < scan.alpha_theta) {
            scan.alpha_theta = reports[i].min_eig;
            scan.worst_point = samples[i];
        }
        if (reports[i].max_eig > scan.beta_theta) scan.beta_theta = reports[i].max_eig;
        if (!reports[i].satisfied && scan.first_failed < 0) {
            scan.first_failed = static_cast<long>(i);
            scan.all_satisfied = false;
        }
    }
    return scan;
}

}  // namespace

BoundsScan bounds_scan_serial(const SystemModel& model, const std::vector<Vec>& samples, double tol) {
    if (samples.empty()) throw ValidationError("bounds_scan: samples must be nonempty");
    std::vector<ObservabilityReport> reports(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        reports[i] = rank_condition(model, samples[i], tol);
    return reduce_scan(samples, reports);
}

BoundsScan bounds_scan(const SystemModel& model, const std::vector<Vec>& samples, double tol,
                       int threads) {
    if (samples.empty()) throw ValidationError("bounds_scan: samples must be nonempty");
    const int nthreads = resolve_threads(threads);
    std::vector<ObservabilityReport> reports(samples.size());
    const auto count = static_cast<long>(samples.size());
    std::exception_ptr error;  // exceptions must not cross the parallel region
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
    for (long i = 0; i < count; ++i) {
        try {
            reports[static_cast<std::size_t>(i)] =
                rank_condition(model, samples[static_cast<std::size_t>(i)], tol);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(eobs_bounds_scan_error)
#endif
            if (!error) error = std::current_exception();
        }
    }
    (void)nthreads;
    if (error) std::rethrow_exception(error);
    return reduce_scan(samples, reports);
}

nlohmann::json to_json(const ObservabilityReport& report) {
    nlohmann::json j;
    j["point"] = std::vector<double>(report.point.begin(), report.point.end());
    auto matrix_rows = [](const Mat& m) {
        std::vector<std::vector<double>> rows;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            rows.emplace_back();
            for (Eigen::Index c = 0; c < m.cols(); ++c) rows.back().push_back(m(r, c));
        }
        return rows;
    };
    j["theta_jacobian"] = matrix_rows(report.theta_jacobian);
    j["gram"] = matrix_rows(report.gram);
    j["rank"] = report.rank;
    j["min_eig"] = report.min_eig;
    j["max_eig"] = report.max_eig;
    j["satisfied"] = report.satisfied;
    return j;
}

nlohmann::json to_json(const BoundsScan& scan) {
    nlohmann::json j;
    j["alpha_theta"] = scan.alpha_theta;
    j["beta_theta"] = scan.beta_theta;
    j["worst_point"] = std::vector<double>(scan.worst_point.begin(), scan.worst_point.end());
    j["all_satisfied"] = scan.all_satisfied;
    j["first_failed"] = scan.first_failed;
    return j;
}

}  // namespace eobs
