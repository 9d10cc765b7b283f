#include "eobs/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace eobs {

double LyapunovSpectrum::sum() const {
    double s = 0.0;
    for (double e : exponents) s += e;
    return s;
}

double LyapunovSpectrum::positive_sum() const {
    double s = 0.0;
    for (double e : exponents) s += std::max(e, 0.0);
    return s;
}

bool LyapunovSpectrum::converged(double threshold) const {
    return convergence_residual < threshold;
}

namespace {

// Kahan-compensated accumulator, one per exponent.
struct Compensated {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace

LyapunovSpectrum spectrum(const SystemModel& model, const Vec& x0, long horizon, long burn_in,
                          long renorm_period) {
    if (burn_in < 0) throw ValidationError("spectrum: burn_in must be >= 0");
    if (horizon < std::max<long>(10 * burn_in, 1))
        throw ValidationError("spectrum: horizon must be >= max(10*burn_in, 1)");
    if (renorm_period < 1) throw ValidationError("spectrum: renorm_period must be >= 1");

    const int n = model.state_dim;
    LyapunovSpectrum result;
    result.horizon = horizon;
    result.burn_in = burn_in;
    result.renorm_period = renorm_period;

    Vec x = x0;
    Mat frame = Mat::Identity(n, n);
    std::vector<Compensated> logs(static_cast<std::size_t>(n));
    long accumulated = 0;  // steps contributing to the averages

    const long accumulation_steps = horizon - burn_in;
    const long snapshot_at = burn_in + (9 * accumulation_steps) / 10;
    std::vector<double> snapshot(static_cast<std::size_t>(n), 0.0);
    bool have_snapshot = false;

    long t = 0;
    while (t < horizon) {
        const long block = std::min(renorm_period, horizon - t);
        Mat z = frame;
        for (long s = 0; s < block; ++s) {
            z = jacobian(model, x) * z;
            x = step(model, x);
            if (!x.allFinite()) {
                std::ostringstream msg;
                msg << "spectrum: trajectory diverged to non-finite values at step " << t + s + 1;
                throw NumericalError(msg.str());
            }
        }
        Eigen::HouseholderQR<Mat> qr(z);
        frame = qr.householderQ() * Mat::Identity(n, n);
        const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        // Blocks starting before burn_in are transient; only magnitudes of the
        // triangular diagonal enter the exponents, so R's sign convention is
        // irrelevant.
        const bool accumulate = t >= burn_in;
        for (int i = 0; i < n; ++i) {
            const double d = std::abs(r(i, i));
            if (d == 0.0) {
                std::ostringstream msg;
                msg << "spectrum: degenerate cocycle (zero QR diagonal) at step " << t + block;
                throw NumericalError(msg.str());
            }
            if (accumulate) logs[static_cast<std::size_t>(i)].add(std::log(d));
        }
        if (accumulate) accumulated += block;
        t += block;
        if (!have_snapshot && t >= snapshot_at && accumulated > 0) {
            for (int i = 0; i < n; ++i)
                snapshot[static_cast<std::size_t>(i)] =
                    logs[static_cast<std::size_t>(i)].sum / static_cast<double>(accumulated);
            have_snapshot = true;
        }
    }

    result.exponents.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        result.exponents[static_cast<std::size_t>(i)] =
            logs[static_cast<std::size_t>(i)].sum / static_cast<double>(std::max<long>(accumulated, 1));

    result.convergence_residual = 0.0;
    if (have_snapshot) {
        for (int i = 0; i < n; ++i)
            result.convergence_residual =
                std::max(result.convergence_residual,
                         std::abs(result.exponents[static_cast<std::size_t>(i)] -
                                  snapshot[static_cast<std::size_t>(i)]));
    }

    std::sort(result.exponents.begin(), result.exponents.end(), std::greater<double>());
    return result;
}

double det_sum_check(const SystemModel& model, const Vec& x0, long horizon) {
    if (horizon < 1) throw ValidationError("det_sum_check: horizon must be >= 1");
    // Spectrum over the identical window (no burn-in) so both sides of the
    // identity average over the same Jacobians.
    const LyapunovSpectrum spec = spectrum(model, x0, horizon, 0, 1);

    Vec x = x0;
    Compensated log_det;
    for (long t = 0; t < horizon; ++t) {
        const double d = jacobian(model, x).determinant();
        if (d == 0.0) {
            std::ostringstream msg;
            msg << "det_sum_check: singular Jacobian at step " << t;
            throw NumericalError(msg.str());
        }
        log_det.add(std::log(std::abs(d)));
        x = step(model, x);
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "det_sum_check: trajectory diverged to non-finite values at step " << t + 1;
            throw NumericalError(msg.str());
        }
    }
    const double avg_log_det = log_det.sum / static_cast<double>(horizon);
    return std::abs(avg_log_det - spec.sum());
}

nlohmann::json to_json(const LyapunovSpectrum& spectrum) {
    nlohmann::json j;
    j["exponents"] = spectrum.exponents;
    j["horizon"] = spectrum.horizon;
    j["burn_in"] = spectrum.burn_in;
    j["renorm_period"] = spectrum.renorm_period;
    j["convergence_residual"] = spectrum.convergence_residual;
    return j;
}

}  // namespace eobs
