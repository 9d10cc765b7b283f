#include <doctest.h>

#include <cmath>
#include <sstream>

#include "eobs/model.hpp"
#include "eobs/riccati.hpp"
#include "eobs/rng.hpp"

using namespace eobs;

namespace {

Mat m1(double v) { return Mat::Constant(1, 1, v); }

Mat random_spd(int n, std::uint64_t counter) {
    Mat b(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            b(r, c) = 2.0 * rng::uniform01(31337, counter, static_cast<std::uint64_t>(r * n + c)) - 1.0;
    return Mat(b * b.transpose() + 0.1 * Mat::Identity(n, n));
}

Mat random_matrix(int rows, int cols, std::uint64_t counter, std::uint64_t salt) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = 2.0 * rng::uniform01(salt, counter,
                                           static_cast<std::uint64_t>(r * cols + c)) - 1.0;
    return m;
}

// A one-state model with zero output map: nothing is ever observable, so the
// recursion reduces to pure expansion.
SystemModel blind_doubling() {
    SystemModel model;
    model.state_dim = 1;
    model.output_dim = 1;
    model.description = "x' = 2x with zero output";
    model.map = [](const Vec& x) { return Vec(2.0 * x); };
    model.output = [](const Vec&) { return Vec(Vec::Zero(1)); };
    model.map_jacobian = [](const Vec&) { return Mat::Constant(1, 1, 2.0); };
    model.output_jacobian = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
    return model;
}

SystemModel scalar_contraction() {
    SystemModel model;
    model.state_dim = 1;
    model.output_dim = 1;
    model.description = "x' = x/4, y = x";
    model.map = [](const Vec& x) { return Vec(0.25 * x); };
    model.output = [](const Vec& x) { return x; };
    model.map_jacobian = [](const Vec&) { return Mat::Constant(1, 1, 0.25); };
    model.output_jacobian = [](const Vec&) { return Mat::Constant(1, 1, 1.0); };
    return model;
}

}  // namespace

TEST_CASE("riccati_step scalar oracle") {
    // Q' = a^2 q + r - a^2 q^2 c^2 / (1 + c^2 q): for q=1, a=2, c=1, r=0 the
    // update gives 2 (to rounding of the internal factorization).
    const Mat next = riccati_step(m1(1.0), m1(2.0), m1(1.0), m1(0.0));
    CHECK(next(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("riccati_step matches a direct dense evaluation") {
    for (std::uint64_t c = 0; c < 50; ++c) {
        const int n = 2 + static_cast<int>(c % 2);
        const int m = 1 + static_cast<int>(c % 2);
        const Mat q = random_spd(n, c);
        const Mat a = random_matrix(n, n, c, 1001);
        const Mat cmat = random_matrix(m, n, c, 2002);
        const Mat r = random_spd(n, c + 500);

        const Mat innovation = Mat::Identity(m, m) + cmat * q * cmat.transpose();
        const Mat expected = a * q * a.transpose() + r -
                             a * q * cmat.transpose() * innovation.inverse() * cmat * q *
                                 a.transpose();
        const Mat got = riccati_step(q, a, cmat, r);
        CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("riccati_step validates shapes and symmetry") {
    CHECK_THROWS_AS((void)riccati_step(Mat::Identity(2, 2), Mat::Identity(3, 3),
                                       Mat::Ones(1, 2), Mat::Zero(2, 2)),
                    ValidationError);
    Mat asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_WITH_AS((void)riccati_step(asym, Mat::Identity(2, 2), Mat::Ones(1, 2),
                                            Mat::Zero(2, 2)),
                         doctest::Contains("symmetric"), ValidationError);
}

TEST_CASE("determinant identity: det Q' = (det A)^2 det Q / det(I + C Q C') when R = 0") {
    for (std::uint64_t c = 0; c < 100; ++c) {
        const int n = 1 + static_cast<int>(c % 3);
        const int m = 1 + static_cast<int>(c % static_cast<std::uint64_t>(n));
        const Mat q = random_spd(n, c);
        Mat a = random_matrix(n, n, c, 31);
        if (std::abs(a.determinant()) < 0.1) a += Mat::Identity(n, n);
        const Mat cmat = random_matrix(m, n, c, 47);

        const Mat next = riccati_step(q, a, cmat, Mat::Zero(n, n));
        const double det_a = a.determinant();
        const double innovation_det =
            (Mat::Identity(m, m) + cmat * q * cmat.transpose()).determinant();
        const double expected = det_a * det_a * q.determinant() / innovation_det;
        CHECK(next.determinant() == doctest::Approx(expected).epsilon(1e-8));
    }
}

TEST_CASE("Sylvester pairing: det(I_M + C Q C') = det(I_N + Q C' C)") {
    for (std::uint64_t c = 0; c < 100; ++c) {
        const int n = 1 + static_cast<int>(c % 3);
        const int m = 1 + static_cast<int>(c % static_cast<std::uint64_t>(n));
        const Mat q = random_spd(n, c + 900);
        const Mat cmat = random_matrix(m, n, c, 77);
        const double lhs = (Mat::Identity(m, m) + cmat * q * cmat.transpose()).determinant();
        const double rhs = (Mat::Identity(n, n) + q * cmat.transpose() * cmat).determinant();
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("optimal_gain scalar oracle and singularity report") {
    const Mat k = optimal_gain(m1(3.0), m1(2.0), m1(1.0));
    CHECK(k(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_WITH_AS((void)optimal_gain(m1(1.0), m1(2.0), m1(0.0)),
                         doctest::Contains("singular"), NumericalError);
}

TEST_CASE("scalar linear trace converges to the regularized fixed point") {
    const SystemModel model = builtin("linear-scalar").model;
    RiccatiOptions options;
    options.epsilon = 1e-3;
    const RiccatiTrace trace = condition_trace(model, Vec::Zero(1), 200, 0.5, options);
    // Fixed point of q -> 4q/(1+q) + eps.
    const double eps = 1e-3;
    const double q_star = (3.0 + eps + std::sqrt((3.0 + eps) * (3.0 + eps) + 4.0 * eps)) / 2.0;
    CHECK(trace.q0.back()(0, 0) == doctest::Approx(q_star).epsilon(1e-12));
    CHECK(trace.min_eig_seen > 0.0);
    CHECK(trace.max_eig_seen <= q_star * (1.0 + 1e-12));
}

TEST_CASE("scalar linear condition value settles at (det A)^2 (1-p)") {
    const SystemModel model = builtin("linear-scalar").model;
    for (double p : {0.5, 0.8}) {
        RiccatiOptions options;
        options.epsilon = 0.0;
        const RiccatiTrace trace = condition_trace(model, Vec::Zero(1), 500, p, options);
        CHECK(trace.condition_values.back() == doctest::Approx(4.0 * (1.0 - p)).epsilon(1e-12));
    }
    // Boundary p* = 3/4: below it the mean log stays positive (violated),
    // above it negative (satisfiable).
    RiccatiOptions exact;
    exact.epsilon = 0.0;
    CHECK_FALSE(condition_trace(model, Vec::Zero(1), 500, 0.70, exact).satisfied());
    CHECK(condition_trace(model, Vec::Zero(1), 500, 0.80, exact).satisfied());
}

TEST_CASE("condition values can be recomputed from the stored trace") {
    const SystemModel model = builtin("henon").model;
    Vec x0(2);
    x0 << 0.1, 0.1;
    const double p = 0.55;

    SUBCASE("regularized mode: determinant ratios") {
        RiccatiOptions options;
        options.epsilon = 1e-3;
        const RiccatiTrace trace = condition_trace(model, x0, 200, p, options);
        REQUIRE(trace.q0.size() == trace.condition_values.size() + 1);
        for (std::size_t t = 0; t < trace.condition_values.size(); ++t) {
            const Mat a = jacobian(model, trace.states[t]);
            const double expected = (1.0 - p) * a.determinant() * a.determinant() *
                                    trace.q0[t].determinant() / trace.q0[t + 1].determinant();
            CHECK(trace.condition_values[t] == doctest::Approx(expected).epsilon(1e-8));
        }
    }

    SUBCASE("exact mode: innovation determinants") {
        RiccatiOptions options;
        options.epsilon = 0.0;
        const RiccatiTrace trace = condition_trace(model, x0, 200, p, options);
        for (std::size_t t = 0; t < trace.condition_values.size(); ++t) {
            const Mat c = output_jacobian(model, trace.states[t]);
            const double expected =
                (1.0 - p) *
                (Mat::Identity(1, 1) + c * trace.q0[t] * c.transpose()).determinant();
            CHECK(trace.condition_values[t] == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("blind expansion is flagged as unbounded") {
    const RiccatiTrace trace = condition_trace(blind_doubling(), Vec::Zero(1), 100, 0.5, {});
    CHECK(trace.flagged);
    CHECK(trace.flag_reason == "Q0 eigenvalue above 1e12 (unbounded)");
    // Q_t = 4^t (+ eps terms): first above 1e12 at t = 20.
    CHECK(trace.flag_step == 20);
    CHECK(trace.condition_values.size() == static_cast<std::size_t>(trace.flag_step));
    // The trace-minimizing gain is undefined with a zero output map.
    CHECK(!trace.gains.front().allFinite());
}

TEST_CASE("vanishing regularization under contraction is flagged as degenerate") {
    RiccatiOptions options;
    options.epsilon = 1e-13;
    const RiccatiTrace trace = condition_trace(scalar_contraction(), Vec::Zero(1), 100, 0.5, options);
    CHECK(trace.flagged);
    CHECK(trace.flag_reason == "Q0 eigenvalue below 1e-12 (degenerate)");
}

TEST_CASE("exact mode tolerates flat directions instead of flagging them") {
    RiccatiOptions options;
    options.epsilon = 0.0;
    const RiccatiTrace trace = condition_trace(scalar_contraction(), Vec::Zero(1), 100, 0.5, options);
    CHECK_FALSE(trace.flagged);
    // A strictly contracting observed system imposes no limitation.
    CHECK(trace.satisfied());
}

TEST_CASE("condition_trace argument validation") {
    const SystemModel model = builtin("linear-scalar").model;
    CHECK_THROWS_AS((void)condition_trace(model, Vec::Zero(1), 10, 0.0, {}), ValidationError);
    CHECK_THROWS_AS((void)condition_trace(model, Vec::Zero(1), 10, 1.0, {}), ValidationError);
    CHECK_THROWS_AS((void)condition_trace(model, Vec::Zero(1), 0, 0.5, {}), ValidationError);
    RiccatiOptions bad;
    bad.epsilon = -1.0;
    CHECK_THROWS_AS((void)condition_trace(model, Vec::Zero(1), 10, 0.5, bad), ValidationError);
    RiccatiOptions wrong_q;
    wrong_q.q_init = Mat::Identity(2, 2);
    CHECK_THROWS_AS((void)condition_trace(model, Vec::Zero(1), 10, 0.5, wrong_q), ValidationError);
}

TEST_CASE("riccati CSV: pinned header and one row per condition value") {
    const RiccatiTrace trace =
        condition_trace(builtin("linear-scalar").model, Vec::Zero(1), 5, 0.5, {});
    std::ostringstream out;
    write_csv(trace, out);
    std::istringstream in(out.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "t,det_Q0,condition_value,running_log_mean");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == trace.condition_values.size());
    CHECK(out.str().substr(out.str().size() - 1) == "\n");
}
