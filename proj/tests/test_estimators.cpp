#include "doctest.h"

#include "eventcorr/errors.hpp"
#include "eventcorr/estimators.hpp"
#include "eventcorr/rng.hpp"
#include "eventcorr/synth.hpp"

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace ecc;

namespace {

// Random correlation triple from a random Gram matrix, bounded away from
// singular cases.
CorrelationParams random_params(std::mt19937_64& eng, double delta) {
    std::normal_distribution<double> normal;
    for (;;) {
        Eigen::Matrix3d a;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = normal(eng);
        Eigen::Matrix3d s = a * a.transpose();
        Eigen::Vector3d d = s.diagonal().cwiseSqrt();
        CorrelationParams p{s(0, 1) / (d(0) * d(1)), s(0, 2) / (d(0) * d(2)),
                            s(1, 2) / (d(1) * d(2)), delta};
        if (std::abs(p.rho_xz) < 0.95 && std::abs(p.rho_yz) < 0.95 && std::abs(p.rho_xy) < 0.95)
            return p;
    }
}

} // namespace

TEST_SUITE("estimators") {

TEST_CASE("sample validation catches malformed role assignments") {
    Sample s = Sample::xyz(Eigen::VectorXd::LinSpaced(5, 0, 1), Eigen::VectorXd::LinSpaced(5, 1, 2),
                           Eigen::VectorXd::LinSpaced(5, -1, 1));
    CHECK(s.columns == std::vector<std::string>{"x", "y", "z"});
    CHECK_NOTHROW(s.validate());

    Sample bad = s;
    bad.roles.x = 7;
    CHECK_THROWS_AS(bad.validate(), DimensionMismatchError);

    Sample tiny = s;
    tiny.data = s.data.topRows(2);
    CHECK_THROWS_AS(tiny.validate(), DimensionMismatchError);

    Sample uneven = s;
    uneven.roles.z2 = {1, 2};
    CHECK_THROWS_AS(uneven.validate(), DimensionMismatchError);
}

TEST_CASE("column means and covariance match hand values") {
    Eigen::MatrixXd m(4, 2);
    m << 1, 2, 3, 4, 5, 6, 7, 9;
    const Eigen::VectorXd mu = column_mean(m);
    CHECK(mu(0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(mu(1) == doctest::Approx(5.25).epsilon(1e-15));
    const Eigen::MatrixXd c = covariance_matrix(m);
    CHECK(c(0, 0) == doctest::Approx(20.0 / 3.0).epsilon(1e-14));
    CHECK(c(0, 1) == doctest::Approx(23.0 / 3.0).epsilon(1e-14));
    CHECK(c(1, 1) == doctest::Approx(8.9166666666666667).epsilon(1e-14));

    const std::vector<bool> mask{true, false, true, true};
    const Eigen::VectorXd mum = column_mean(m, mask);
    CHECK(mum(0) == doctest::Approx(13.0 / 3.0).epsilon(1e-14));
    const Eigen::MatrixXd cm = covariance_matrix(m, mask);
    Eigen::MatrixXd sub(3, 2);
    sub << 1, 2, 5, 6, 7, 9;
    CHECK((cm - covariance_matrix(sub)).norm() == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("select_rows keeps columns and roles") {
    Sample s = Sample::xyz(Eigen::VectorXd::LinSpaced(6, 0, 5), Eigen::VectorXd::LinSpaced(6, 5, 0),
                           Eigen::VectorXd::LinSpaced(6, -1, 1));
    const std::vector<bool> mask{true, false, true, false, true, true};
    const Sample sub = select_rows(s, mask);
    CHECK(sub.n() == 4);
    CHECK(sub.columns == s.columns);
    CHECK(sub.roles.x == s.roles.x);
    CHECK(sub.data(1, 0) == s.data(2, 0));
}

TEST_CASE("pearson handles exact and degenerate inputs") {
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(50, -2, 2);
    CHECK(pearson(x, (2.0 * x.array() + 1.0).matrix()) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pearson(x, (-x).eval()) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK_THROWS_AS(pearson(x, Eigen::VectorXd::Constant(50, 3.0)), UndefinedStatisticError);
}

TEST_CASE("population conditional correlation: identity and partial limits") {
    std::mt19937_64 eng(11);
    CHECK(ecc_population({0.6, 0.7, 0.8, -1.0}) == doctest::Approx(0.0933520056).epsilon(1e-9));
    for (int k = 0; k < 200; ++k) {
        CorrelationParams p = random_params(eng, 0.0);
        CHECK(ecc_population(p) == p.rho_xy); // zero shift changes nothing

        p.delta = -1.0;
        const double want = oracle::partial_corr(p.rho_xy, p.rho_xz, p.rho_yz);
        CHECK(std::abs(ecc_population(p) - want) <= 1e-12);
    }
}

TEST_CASE("whole-space event reduces the estimator to the plain correlation") {
    const Sample s = generate({GenSpec::Family::gaussian_scale, 0.45, 0.3, 0.5, 1.0, 4000, 99});
    const EccEstimate est = ecc_estimate(s, EventSpec::all());
    CHECK(std::abs(est.rho - pearson(s.x(), s.y())) <= 1e-12);
    CHECK(est.n_event == est.n_total);
    CHECK(est.method == EstimateMethod::full_sample_corrected);
    CHECK(!est.clamped);
}

TEST_CASE("corrected estimate tracks the truncated-moment truth on a tail event") {
    const Sample s = generate({GenSpec::Family::gaussian_scale, 0.6, 0.7, 0.8, 1.0, 100000, 5});
    const EventSpec event = EventSpec::above("z", 0.5);
    const double truth = oracle::gaussian_interval_ecc(
        0.6, 0.7, 0.8, 0.5, std::numeric_limits<double>::infinity());
    CHECK(std::abs(ecc_estimate(s, event).rho - truth) <= 0.02);
    CHECK(std::abs(ecc_subsample(s, event).rho - truth) <= 0.03);
    CHECK(ecc_subsample(s, event).method == EstimateMethod::subsample);
    // the model-integrated covariate moments agree with the empirical ones here
    CHECK(std::abs(ecc_estimate(s, event, MomentStrategy::gaussian_model).rho - truth) <= 0.02);
}

TEST_CASE("delta_shift: no event means no shift; tail and band shrink the variance") {
    const Sample s = generate({GenSpec::Family::gaussian_scale, 0.2, 0.4, 0.6, 1.0, 100000, 17});
    const std::vector<Eigen::Index> zc{2};

    const DeltaShift none = delta_shift(s, EventSpec::all(), zc, zc);
    CHECK(none.delta.norm() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(none.event_mass == 1.0);

    const double var_z = covariance_matrix(s.data)(2, 2);
    const DeltaShift tail = delta_shift(s, EventSpec::above("z", 0.0), zc, zc);
    CHECK(tail.delta(0, 0) / var_z == doctest::Approx(-2.0 / oracle::kPi).epsilon(0.02));
    CHECK(tail.event_mass == doctest::Approx(0.5).epsilon(0.02));

    const DeltaShift central = delta_shift(s, EventSpec::band("z", 0.55, 0.1), zc, zc);
    CHECK(central.delta(0, 0) / var_z == doctest::Approx(-0.99475).epsilon(0.005));
}

TEST_CASE("implied unconditional with the restricted moments returns the restricted correlation") {
    const Sample s = generate({GenSpec::Family::gaussian_scale, 0.5, 0.6, 0.7, 1.0, 5000, 23});
    const Sample a = select_rows(s, event_mask(s, EventSpec::above("z", 0.3)));
    const double var_z_a = covariance_matrix(a.data)(2, 2);
    const EccEstimate rec = implied_unconditional(a, MomentSource::asserted_scalar(var_z_a));
    CHECK(std::abs(rec.rho - pearson(a.x(), a.y())) <= 1e-12);
}

TEST_CASE("implied unconditional recovers the generating correlation from a tail sample") {
    const Sample s = generate({GenSpec::Family::gaussian_scale, 0.5, 0.6, 0.7, 1.0, 200000, 29});
    const Sample a = select_rows(s, event_mask(s, EventSpec::band("z", 1.0, 0.3)));
    const EccEstimate rec = implied_unconditional(a, MomentSource::asserted_scalar(1.0));
    CHECK(rec.rho == doctest::Approx(0.5).epsilon(0.04));
    CHECK(rec.n_event == a.n());

    const double z_lo = quantile_type7(s.data.col(2), 0.7);
    const EccEstimate mle = implied_unconditional(
        a, MomentSource::truncated_mle(z_lo, std::numeric_limits<double>::infinity()));
    CHECK(mle.rho == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("implied unconditional is exact for a correlated covariate block") {
    // (x, y, z1, z2) with correlated two-dimensional covariates and an event
    // on z1 + z2, which no per-component route captures.
    Eigen::Matrix4d corr;
    corr << 1.0, 0.3, 0.5, 0.3, //
        0.3, 1.0, 0.4, 0.45,    //
        0.5, 0.4, 1.0, 0.6,     //
        0.3, 0.45, 0.6, 1.0;
    const Eigen::Matrix4d chol = corr.llt().matrixL();

    const Eigen::Index n = 1000000;
    Eigen::MatrixXd data(n, 4);
    std::mt19937_64 eng = derived_engine(31, 0);
    std::normal_distribution<double> normal;
    Eigen::Vector4d g;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < 4; ++j) g(j) = normal(eng);
        data.row(i) = (chol * g).transpose();
    }

    Sample s;
    s.data = std::move(data);
    s.columns = {"x", "y", "z1", "z2"};
    s.roles.x = 0;
    s.roles.y = 1;
    s.roles.z1 = {2, 3};
    s.roles.z2 = {2, 3};

    std::vector<bool> mask(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        mask[static_cast<std::size_t>(i)] = s.data(i, 2) + s.data(i, 3) > 0.5;
    const Sample a = select_rows(s, mask);

    const EccEstimate rec = implied_unconditional(a, MomentSource::asserted(corr.block<2, 2>(2, 2)));
    CHECK(rec.rho == doctest::Approx(0.3).epsilon(0.015));
}

TEST_CASE("standardized conditional correlations follow the closed display") {
    Eigen::VectorXd rho(2), vc(2), vu(2);
    rho << 0.4, -0.3;
    vc << 0.2, 1.5;
    vu << 1.0, 1.0;
    const Eigen::VectorXd r = r_vector(rho, vc, vu);
    for (int i = 0; i < 2; ++i) {
        const double want =
            rho(i) / std::sqrt(1.0 + (vc(i) / vu(i) - 1.0) * (1.0 - rho(i) * rho(i)));
        CHECK(r(i) == doctest::Approx(want).epsilon(1e-14));
    }
    Eigen::VectorXd bad_vc(1), bad_rho(1), bad_vu(1);
    bad_rho << 0.0;
    bad_vc << 0.0; // bracket collapses to zero exactly
    bad_vu << 1.0;
    CHECK_THROWS_AS(r_vector(bad_rho, bad_vc, bad_vu), DegenerateConditioningError);
}

TEST_CASE("transport is the identity at zero shift and the inverse at its own shift") {
    std::mt19937_64 eng(13);
    for (int k = 0; k < 200; ++k) {
        std::uniform_real_distribution<double> du(-0.9, 3.0);
        const double delta = du(eng);
        CorrelationParams uncond = random_params(eng, delta);

        // forward to the event, then back with the reciprocal variance ratio
        const double cond_xy = ecc_population(uncond);
        const double scale = std::sqrt(1.0 + delta);
        CorrelationParams cond{
            cond_xy,
            uncond.rho_xz * scale /
                std::sqrt(1.0 + uncond.rho_xz * uncond.rho_xz * delta),
            uncond.rho_yz * scale /
                std::sqrt(1.0 + uncond.rho_yz * uncond.rho_yz * delta),
            0.0};
        CHECK(transport(cond, 0.0) == cond_xy); // bitwise identity
        const double back = transport(cond, 1.0 / (1.0 + delta) - 1.0);
        CHECK(std::abs(back - uncond.rho_xy) <= 1e-12);
    }
}

TEST_CASE("ols recovers exact coefficients and names singular designs") {
    const Eigen::Index n = 200;
    Eigen::MatrixXd d(n, 3);
    std::mt19937_64 eng(3);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, 1) = normal(eng);
        d(i, 2) = normal(eng);
        d(i, 0) = 2.0 * d(i, 1) - 0.5 * d(i, 2);
    }
    Sample s;
    s.data = d;
    s.columns = {"resp", "u", "v"};
    s.roles.x = 0;
    s.roles.y = 1;
    s.roles.z1 = {1, 2};
    s.roles.z2 = {1, 2};
    const RegressionFit fit = ols_fit(s, 0, {1, 2});
    CHECK(fit.beta(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.beta(1) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(fit.residuals.norm() <= 1e-10);

    Sample dup = s;
    dup.data.col(2) = dup.data.col(1);
    try {
        ols_fit(dup, 0, {1, 2});
        FAIL("expected SingularDesignError");
    } catch (const SingularDesignError& e) {
        CHECK(std::string(e.what()).find("u") != std::string::npos);
    }
}

TEST_CASE("assumption gaps are small for the Gaussian model") {
    const Sample s = generate({GenSpec::Family::gaussian_scale, 0.6, 0.7, 0.8, 1.0, 100000, 41});
    const AssumptionDiagnostics d = assumption_diagnostics(s, EventSpec::above("z", 0.5));
    CHECK(std::abs(d.a1_gap) <= 0.02);
    CHECK(std::abs(d.a2_gap) <= 0.02);
    CHECK(d.bias_bound_scale > 0.1); // the covariate variance does shift
}

TEST_CASE("covariance shift of a constructed pair has exact low rank") {
    // loadings M: (x, y) on (z1, z2), plus idiosyncratic noise
    Eigen::MatrixXd m(2, 4);
    m << 0.7, 0.2, 1, 0, //
        -0.3, 0.5, 0, 1;
    Eigen::Matrix2d sigma_z;
    sigma_z << 1.0, 0.4, 0.4, 1.0;
    Eigen::Matrix2d sigma_z_a;
    sigma_z_a << 0.45, 0.1, 0.1, 0.7;
    Eigen::Matrix4d noise = Eigen::Vector4d(0.5, 0.6, 0, 0).asDiagonal();

    const Eigen::Matrix4d sigma = m.transpose() * sigma_z * m + noise;
    const Eigen::Matrix4d sigma_a = m.transpose() * sigma_z_a * m + noise;
    const CovarianceShiftSummary sh = covariance_shift(sigma, sigma_a);
    REQUIRE(sh.singular_values.size() == 4);
    CHECK(sh.effective_rank == 2);
    CHECK(sh.singular_values(2) <= 1e-12);
    CHECK(sh.singular_values(3) <= 1e-12);
    CHECK((sh.delta - (sigma - sigma_a)).norm() <= 1e-14);
}

} // TEST_SUITE
