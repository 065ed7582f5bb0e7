#include "doctest.h"

#include "eventcorr/errors.hpp"
#include "eventcorr/estimators.hpp"
#include "eventcorr/mc.hpp"
#include "eventcorr/synth.hpp"

#include "oracles.hpp"

#include <cmath>
#include <limits>

using namespace ecc;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_SUITE("synth") {

TEST_CASE("generation is deterministic in the seed") {
    const GenSpec spec{GenSpec::Family::student_t, 0.4, 0.5, 0.6, 5.0, 500, 12345};
    const Sample a = generate(spec);
    const Sample b = generate(spec);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() == 0.0);

    GenSpec other = spec;
    other.seed = 54321;
    CHECK((generate(other).data - a.data).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("family names round trip") {
    for (auto f : {GenSpec::Family::gaussian_scale, GenSpec::Family::student_t,
                   GenSpec::Family::gaussian_chisq_mixture})
        CHECK(family_from_string(to_string(f)) == f);
    CHECK_THROWS_AS(family_from_string("weibull"), ParseError);
}

TEST_CASE("gaussian family hits the requested second moments") {
    const double eta = 2.5;
    const Sample s = generate({GenSpec::Family::gaussian_scale, 0.2, 0.4, 0.6, eta, 200000, 2026});
    const Eigen::MatrixXd cov = covariance_matrix(s.data);
    for (int j = 0; j < 3; ++j) CHECK(cov(j, j) == doctest::Approx(eta).epsilon(0.03));
    CHECK(pearson(s.x(), s.y()) == doctest::Approx(0.2).epsilon(0.05));
    CHECK(pearson(s.x(), s.data.col(2)) == doctest::Approx(0.4).epsilon(0.03));
    CHECK(pearson(s.y(), s.data.col(2)) == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("heavy-tail families keep the correlation structure and stated variance") {
    const Sample t5 = generate({GenSpec::Family::student_t, 0.4, 0.5, 0.6, 5.0, 200000, 31});
    CHECK(covariance_matrix(t5.data)(2, 2) ==
          doctest::Approx(family_z_variance(GenSpec::Family::student_t, 5.0)).epsilon(0.06));
    CHECK(pearson(t5.x(), t5.data.col(2)) == doctest::Approx(0.5).epsilon(0.05));

    const Sample mix =
        generate({GenSpec::Family::gaussian_chisq_mixture, 0.2, 0.6, 0.6, 10.0, 200000, 32});
    CHECK(covariance_matrix(mix.data)(2, 2) ==
          doctest::Approx(family_z_variance(GenSpec::Family::gaussian_chisq_mixture, 10.0))
              .epsilon(0.05));
    CHECK(pearson(mix.x(), mix.data.col(2)) == doctest::Approx(0.6).epsilon(0.05));
}

TEST_CASE("invalid correlation targets are rejected") {
    CHECK_THROWS_AS(generate({GenSpec::Family::gaussian_scale, 0.9, 0.9, -0.9, 1.0, 100, 1}),
                    DegenerateConditioningError);
    CHECK_THROWS_AS(generate({GenSpec::Family::student_t, 0.1, 0.2, 0.3, 2.0, 100, 1}),
                    DegenerateConditioningError); // t variance needs eta > 2
}

TEST_CASE("exact oracle route matches the independent quadrature route") {
    const GenSpec spec{GenSpec::Family::gaussian_scale, 0.5, 0.6, 0.7, 1.0, 0, 1};
    const OracleValue v = oracle_ecc(spec, EventSpec::above("z", 0.0));
    CHECK(v.se == 0.0);
    CHECK(v.value == doctest::Approx(oracle::gaussian_interval_ecc(0.5, 0.6, 0.7, 0.0, kInf))
                         .epsilon(1e-9));

    // scale invariance: the same event in quantile form, variance eta != 1
    const GenSpec scaled{GenSpec::Family::gaussian_scale, 0.5, 0.6, 0.7, 4.0, 0, 1};
    const OracleValue vs = oracle_ecc(scaled, EventSpec::band("z", 1.0, 0.5));
    CHECK(vs.se == 0.0);
    CHECK(vs.value == doctest::Approx(v.value).epsilon(1e-9));
}

TEST_CASE("decile oracle curve matches quadrature on every band") {
    const GenSpec spec{GenSpec::Family::gaussian_scale, 0.6, 0.7, 0.8, 1.0, 0, 1};
    const std::vector<OracleValue> curve = oracle_curve(spec);
    const std::vector<double> want = oracle::gaussian_decile_curve(0.6, 0.7, 0.8);
    REQUIRE(curve.size() == 10);
    const std::vector<double> frozen{0.2557, 0.1117, 0.1031, 0.1005, 0.0996,
                                     0.0996, 0.1005, 0.1031, 0.1117, 0.2557};
    for (int b = 0; b < 10; ++b) {
        CHECK(curve[b].se == 0.0);
        CHECK(curve[b].value == doctest::Approx(want[b]).epsilon(1e-9));
        CHECK(curve[b].value == doctest::Approx(frozen[b]).epsilon(5e-4));
    }
}

TEST_CASE("monte carlo oracle route agrees with a closed form on an x-event") {
    // conditioning on the tail of x itself: only var(x) shifts, so the
    // conditional correlation has a one-line closed form.
    const double rho = 0.55;
    const GenSpec spec{GenSpec::Family::gaussian_scale, rho, 0.3, 0.4, 1.0, 0, 2};
    const OracleValue v = oracle_ecc(spec, EventSpec::above("x", 0.0), 400000);
    CHECK(v.se > 0.0);
    const double vx = 1.0 - 2.0 / oracle::kPi;
    const double want = rho * std::sqrt(vx) / std::sqrt(rho * rho * vx + 1.0 - rho * rho);
    CHECK(std::abs(v.value - want) <= 4.0 * v.se + 0.005);

    const OracleValue again = oracle_ecc(spec, EventSpec::above("x", 0.0), 400000);
    CHECK(again.value == v.value); // the truth draw set is seed-determined
}

TEST_CASE("vanishing-mass events make the oracle refuse") {
    // mass ~3e-5 puts the expected event count near 6, far below the 1e-4
    // floor of the monte carlo route
    const GenSpec spec{GenSpec::Family::gaussian_scale, 0.4, 0.5, 0.6, 1.0, 0, 3};
    CHECK_THROWS_AS(oracle_ecc(spec, EventSpec::above("x", 4.0), 200000), OracleUnstableError);
}

} // TEST_SUITE
