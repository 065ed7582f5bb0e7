#include "doctest.h"

#include "eventcorr/errors.hpp"
#include "eventcorr/truncnorm.hpp"

#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace ecc;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_SUITE("truncnorm") {

TEST_CASE("normal cdf matches reference values") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(1.96) == doctest::Approx(0.975002104852).epsilon(1e-10));
    CHECK(normal_cdf(-1.0) + normal_cdf(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * oracle::kPi)).epsilon(1e-15));
}

TEST_CASE("ppf inverts the cdf across the open unit interval") {
    for (double p : {1e-6, 1e-3, 0.025, 0.1, 0.5, 0.9, 0.975, 1.0 - 1e-3, 1.0 - 1e-6}) {
        CHECK(normal_cdf(normal_ppf(p)) == doctest::Approx(p).epsilon(1e-12));
        CHECK(normal_ppf(p) == doctest::Approx(oracle::normal_ppf(p)).epsilon(1e-9));
    }
    CHECK(normal_ppf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("ppf rejects arguments outside (0,1)") {
    CHECK_THROWS_AS(normal_ppf(0.0), DegenerateConditioningError);
    CHECK_THROWS_AS(normal_ppf(1.0), DegenerateConditioningError);
    CHECK_THROWS_AS(normal_ppf(-0.1), DegenerateConditioningError);
}

TEST_CASE("closed-form truncated moments agree with quadrature") {
    struct Case {
        double mu, sigma, lo, hi;
    };
    for (const Case& c : {Case{0, 1, 0, kInf}, Case{0, 1, -1, 1}, Case{2, 3, -kInf, 1},
                          Case{0, 1, 1.2815515655446004, kInf}, Case{-1, 0.5, -1.2, -0.8}}) {
        const TruncatedMoments m = truncated_normal_moments(c.mu, c.sigma, c.lo, c.hi);
        const oracle::TruncMoments ref = oracle::trunc_moments(c.mu, c.sigma, c.lo, c.hi);
        CHECK(m.mean == doctest::Approx(ref.mean).epsilon(1e-9));
        CHECK(m.var == doctest::Approx(ref.var).epsilon(1e-8));
        CHECK(m.mass == doctest::Approx(ref.mass).epsilon(1e-9));
    }
}

TEST_CASE("half-line truncation reproduces the closed constants") {
    const TruncatedMoments m = truncated_normal_moments(0.0, 1.0, 0.0, kInf);
    CHECK(m.mean == doctest::Approx(std::sqrt(2.0 / oracle::kPi)).epsilon(1e-12));
    CHECK(m.var == doctest::Approx(1.0 - 2.0 / oracle::kPi).epsilon(1e-12));
    CHECK(m.mass == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("library quadrature route cross-checks the closed forms") {
    const TruncatedMoments closed = truncated_normal_moments(0.3, 1.7, -0.5, 2.0);
    const TruncatedMoments quad = truncated_normal_moments_quadrature(0.3, 1.7, -0.5, 2.0);
    CHECK(quad.mean == doctest::Approx(closed.mean).epsilon(1e-9));
    CHECK(quad.var == doctest::Approx(closed.var).epsilon(1e-9));
    CHECK(quad.mass == doctest::Approx(closed.mass).epsilon(1e-9));
}

TEST_CASE("degenerate truncation inputs are rejected") {
    CHECK_THROWS_AS(truncated_normal_moments(0, -1, 0, 1), DegenerateConditioningError);
    CHECK_THROWS_AS(truncated_normal_moments(0, 1, 2, 2), DegenerateConditioningError);
    CHECK_THROWS_AS(truncated_normal_moments(0, 1, 50, 60), DegenerateConditioningError);
}

TEST_CASE("mle recovers the generating parameters from a tail sample") {
    const double mu = 0.3, sigma = 1.4, lo = -0.5;
    std::mt19937_64 eng(20260816);
    std::normal_distribution<double> normal(mu, sigma);
    std::vector<double> kept;
    while (kept.size() < 20000) {
        const double z = normal(eng);
        if (z >= lo) kept.push_back(z);
    }
    Eigen::VectorXd z = Eigen::Map<Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));

    const TruncatedNormalFit fit = fit_truncated_normal(z, lo, kInf);
    CHECK(fit.mu == doctest::Approx(mu).epsilon(0.15));       // |mu_hat - mu| small
    CHECK(fit.sigma == doctest::Approx(sigma).epsilon(0.05)); // relative
    CHECK(std::abs(fit.mu - mu) < 0.06);
    CHECK(std::abs(fit.sigma - sigma) < 0.06);
    CHECK(fit.grad_norm <= 1e-8);
    CHECK(fit.iterations < 500);
}

TEST_CASE("mle input validation") {
    Eigen::VectorXd two(2);
    two << 0.1, 0.2;
    CHECK_THROWS_AS(fit_truncated_normal(two, 0, 1), InsufficientEventSampleError);
    Eigen::VectorXd constant = Eigen::VectorXd::Constant(50, 0.5);
    CHECK_THROWS_AS(fit_truncated_normal(constant, 0, 1), DegenerateConditioningError);
}

} // TEST_SUITE
