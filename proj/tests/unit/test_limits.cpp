#include <doctest.h>

#include <cmath>

#include "eobs/limits.hpp"

using namespace eobs;

namespace {

LyapunovSpectrum spectrum_of(std::vector<double> exponents, double residual = 0.0) {
    LyapunovSpectrum s;
    s.exponents = std::move(exponents);
    s.convergence_residual = residual;
    return s;
}

}  // namespace

TEST_CASE("linear critical probability: scalar doubling gives 3/4") {
    const CriticalProbability limit = linear_critical_p({2.0}, 1);
    CHECK(limit.critical_p == 0.75);
    CHECK(limit.critical_q() == 0.25);
    CHECK(limit.log_expansion == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("linear critical probability scales with the output dimension") {
    const CriticalProbability m1 = linear_critical_p({2.0, 3.0}, 1);
    const CriticalProbability m2 = linear_critical_p({2.0, 3.0}, 2);
    CHECK(m1.critical_p == doctest::Approx(1.0 - 1.0 / 36.0).epsilon(1e-14));
    CHECK(m2.critical_p == doctest::Approx(1.0 - 1.0 / 6.0).epsilon(1e-14));
    CHECK(m1.critical_p > m2.critical_p);  // more outputs tolerate more loss
}

TEST_CASE("linear critical probability rejects non-expanding moduli") {
    CHECK_THROWS_WITH_AS((void)linear_critical_p({2.0, 0.9}, 1), doctest::Contains("modulus"),
                         ValidationError);
    CHECK_THROWS_AS((void)linear_critical_p({1.0}, 1), ValidationError);
    CHECK_THROWS_AS((void)linear_critical_p({}, 1), ValidationError);
    CHECK_THROWS_AS((void)linear_critical_p({2.0}, 0), ValidationError);
}

TEST_CASE("nonlinear critical probability keeps only expanding exponents") {
    const CriticalProbability mild = nonlinear_critical_p(spectrum_of({0.5, -0.2}), 1);
    const CriticalProbability strong = nonlinear_critical_p(spectrum_of({0.5, -2.0}), 1);
    CHECK(mild.critical_p == strong.critical_p);
    CHECK(mild.log_expansion == 0.5);
    CHECK(mild.critical_p == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
    CHECK(mild.note == "negative exponents truncated (positive-part convention)");
}

TEST_CASE("contracting systems report no limitation") {
    const CriticalProbability limit = nonlinear_critical_p(spectrum_of({-0.1, -2.0}), 1);
    CHECK(limit.critical_p == 0.0);
    CHECK(limit.note == "no positive exponents: stable system, no limitation");
}

TEST_CASE("unconverged spectra are refused with the residual in the message") {
    CHECK_THROWS_WITH_AS((void)nonlinear_critical_p(spectrum_of({0.5}, 0.5), 1),
                         doctest::Contains("not converged"), ValidationError);
    // A caller may relax the threshold explicitly.
    const CriticalProbability limit = nonlinear_critical_p(spectrum_of({0.5}, 0.5), 1, 1.0);
    CHECK(limit.log_expansion == 0.5);
}

TEST_CASE("verdicts flip sign exactly at the critical probability") {
    const CriticalProbability limit = linear_critical_p({2.0}, 1);
    const LimitVerdict below = verdict_at(limit, 0.75 - 1e-6);
    const LimitVerdict above = verdict_at(limit, 0.75 + 1e-6);
    CHECK_FALSE(below.satisfied);
    CHECK(above.satisfied);
    CHECK(below.lhs > 0.0);
    CHECK(above.lhs < 0.0);
    // lhs = M log(1-p) + 2 * expansion, recomputed independently.
    const double p = 0.6;
    const LimitVerdict v = verdict_at(limit, p);
    CHECK(v.lhs == doctest::Approx(std::log1p(-p) + 2.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(v.critical_p == limit.critical_p);
}

TEST_CASE("entropy form matches the eigenvalue form when H = log of the expansion") {
    const LimitVerdict entropy = entropy_condition(0.6, 2, std::log(6.0));
    const CriticalProbability linear = linear_critical_p({2.0, 3.0}, 2);
    CHECK(entropy.critical_p == doctest::Approx(linear.critical_p).epsilon(1e-15));
    CHECK(entropy.lhs == doctest::Approx(verdict_at(linear, 0.6).lhs).epsilon(1e-15));
    CHECK_THROWS_AS((void)entropy_condition(0.0, 1, 0.5), ValidationError);
    CHECK_THROWS_AS((void)entropy_condition(0.5, 0, 0.5), ValidationError);
    CHECK_THROWS_AS((void)entropy_condition(0.5, 1, -0.1), ValidationError);
}

TEST_CASE("lhs validates its probability argument") {
    const CriticalProbability limit = linear_critical_p({2.0}, 1);
    CHECK_THROWS_AS((void)limit.lhs(0.0), ValidationError);
    CHECK_THROWS_AS((void)limit.lhs(1.0), ValidationError);
}

TEST_CASE("limit serialization carries the verdict fields") {
    const CriticalProbability limit = linear_critical_p({2.0}, 1);
    const nlohmann::json j = to_json(limit);
    CHECK(j["critical_p"] == 0.75);
    CHECK(j["critical_q"] == 0.25);
    CHECK(j["output_dim"] == 1);
    CHECK(j["note"] == "all eigenvalue moduli > 1");

    const nlohmann::json v = to_json(verdict_at(limit, 0.8));
    CHECK(v["p"] == 0.8);
    CHECK(v["satisfied"] == true);
}
