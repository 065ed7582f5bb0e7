#include "doctest.h"

#include "eventcorr/deptest.hpp"
#include "eventcorr/errors.hpp"
#include "eventcorr/estimators.hpp"
#include "eventcorr/synth.hpp"

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace ecc;

namespace {

Eigen::VectorXd standard_normal(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(eng);
    return v;
}

const TestResult& find(const std::vector<TestResult>& results, TestResult::Test which) {
    for (const TestResult& r : results)
        if (r.test == which) return r;
    throw std::logic_error("missing test result");
}

} // namespace

TEST_SUITE("deptest") {

TEST_CASE("mid ranks resolve ties by averaging") {
    Eigen::VectorXd v(4);
    v << 3, 1, 3, 2;
    const Eigen::VectorXd r = average_ranks(v);
    CHECK(r(0) == 3.5);
    CHECK(r(1) == 1.0);
    CHECK(r(2) == 3.5);
    CHECK(r(3) == 2.0);
    CHECK((average_ranks(v) - oracle::ranks_brute(v)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fast rank statistics equal the quadratic-time references") {
    const Eigen::Index n = 60;
    const Eigen::VectorXd x = standard_normal(n, 21);
    const Eigen::VectorXd noise = standard_normal(n, 22);
    const Eigen::VectorXd y = (0.6 * x.array() + 0.8 * noise.array()).matrix();

    CHECK(spearman_rho(x, y) == doctest::Approx(oracle::spearman_brute(x, y)).epsilon(1e-12));
    CHECK(kendall_tau(x, y) == doctest::Approx(oracle::kendall_brute(x, y)).epsilon(1e-12));
    CHECK(hoeffding_d(x, y) == doctest::Approx(oracle::hoeffding_brute(x, y)).epsilon(1e-12));

    const Eigen::VectorXd y_neg = -y;
    CHECK(kendall_tau(x, y_neg) == doctest::Approx(oracle::kendall_brute(x, y_neg)).epsilon(1e-12));
    CHECK(spearman_rho(x, y_neg) == doctest::Approx(oracle::spearman_brute(x, y_neg)).epsilon(1e-12));
    CHECK(hoeffding_d(x, y_neg) == doctest::Approx(oracle::hoeffding_brute(x, y_neg)).epsilon(1e-12));

    // nonmonotone dependence that correlation misses but the joint-rank
    // statistic sees
    const Eigen::VectorXd y_sq = x.array().square().matrix();
    CHECK(hoeffding_d(x, y_sq) == doctest::Approx(oracle::hoeffding_brute(x, y_sq)).epsilon(1e-12));
    CHECK(hoeffding_d(x, y_sq) > 0.05);
    CHECK(std::abs(pearson(x, y_sq)) < 0.3);
}

TEST_CASE("perfect dependence is detected by all five tests") {
    const Eigen::Index n = 50;
    const Eigen::VectorXd x = standard_normal(n, 23);
    const Eigen::VectorXd z = standard_normal(n, 24);
    const Sample s = Sample::xyz(x, x, z);

    const auto results = run_tests(s, 1.0, 200, 99);
    REQUIRE(results.size() == 5);
    for (const TestResult& r : results) {
        CHECK(!r.failed);
        CHECK(r.p_value < 0.05);
    }
    CHECK(find(results, TestResult::Test::pearson).statistic == doctest::Approx(1.0));
    CHECK(find(results, TestResult::Test::kendall).statistic == doctest::Approx(1.0));
    CHECK(find(results, TestResult::Test::pearson).p_value == doctest::Approx(1.0 / 201.0));
    CHECK(find(results, TestResult::Test::spearman).p_value == doctest::Approx(1.0 / 201.0));
    CHECK(find(results, TestResult::Test::kendall).p_value == doctest::Approx(1.0 / 201.0));
}

TEST_CASE("independent data is not flagged") {
    const Eigen::Index n = 300;
    const Sample s =
        Sample::xyz(standard_normal(n, 25), standard_normal(n, 26), standard_normal(n, 27));
    const auto results = run_tests(s, 1.0, 500, 7);
    int comfortable = 0;
    for (const TestResult& r : results) {
        CHECK(!r.failed);
        CHECK(r.p_value >= 0.01);
        comfortable += r.p_value >= 0.05 ? 1 : 0;
    }
    CHECK(comfortable >= 4);
}

TEST_CASE("p-values are deterministic and thread-count independent") {
    const Eigen::Index n = 80;
    const Eigen::VectorXd x = standard_normal(n, 28);
    const Eigen::VectorXd y =
        (0.5 * x.array() + standard_normal(n, 29).array()).matrix();
    const Sample s = Sample::xyz(x, y, standard_normal(n, 30));

    const auto a = run_tests(s, 1.0, 300, 4242, 1);
    const auto b = run_tests(s, 1.0, 300, 4242, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].p_value == b[i].p_value);
        CHECK(a[i].statistic == b[i].statistic);
    }
}

TEST_CASE("the implied statistic matches the standalone inverse estimator") {
    const Sample full = generate({GenSpec::Family::gaussian_scale, 0.5, 0.6, 0.7, 1.0, 4000, 31});
    const Sample a = select_rows(full, event_mask(full, EventSpec::above("z", 0.5)));
    const auto results = run_tests(a, 1.0, 50, 1);
    const double stat = find(results, TestResult::Test::ecc_implied).statistic;
    const double direct = implied_unconditional(a, MomentSource::asserted_scalar(1.0)).rho;
    CHECK(stat == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("constant columns fail the affected tests but not the others") {
    const Eigen::Index n = 60;
    const Eigen::VectorXd x = standard_normal(n, 32);
    const Eigen::VectorXd y = (0.7 * x.array() + 0.3 * standard_normal(n, 33).array()).matrix();

    // constant covariate: only the implied statistic needs z
    const Sample const_z = Sample::xyz(x, y, Eigen::VectorXd::Zero(n));
    const auto rz = run_tests(const_z, 1.0, 100, 2);
    CHECK(find(rz, TestResult::Test::ecc_implied).failed);
    CHECK(!find(rz, TestResult::Test::ecc_implied).error.empty());
    CHECK(std::isnan(find(rz, TestResult::Test::ecc_implied).p_value));
    CHECK(!find(rz, TestResult::Test::pearson).failed);
    CHECK(!find(rz, TestResult::Test::hoeffding).failed);
    CHECK(find(rz, TestResult::Test::pearson).p_value < 0.05);

    // constant response: everything that looks at y fails
    const Sample const_y = Sample::xyz(x, Eigen::VectorXd::Constant(n, 1.0), standard_normal(n, 34));
    const auto ry = run_tests(const_y, 1.0, 100, 3);
    for (const TestResult& r : ry) CHECK(r.failed);
}

TEST_CASE("input validation") {
    const Eigen::Index n = 10;
    const Sample tiny =
        Sample::xyz(standard_normal(n, 35), standard_normal(n, 36), standard_normal(n, 37));
    CHECK_THROWS_AS(run_tests(tiny, 1.0, 100, 1), Error);

    const Sample ok =
        Sample::xyz(standard_normal(30, 38), standard_normal(30, 39), standard_normal(30, 40));
    CHECK_THROWS_AS(run_tests(ok, 1.0, 0, 1), ParseError);
}

} // TEST_SUITE
