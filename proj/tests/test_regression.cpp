#include "doctest.h"

#include "eventcorr/errors.hpp"
#include "eventcorr/regression.hpp"

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

} // namespace

TEST_SUITE("regression") {

TEST_CASE("exactly linear data reproduces the line in every bin") {
    // Uniform grid keeps every equal-width bin above the occupancy floor.
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(2000, -2.0, 2.0);
    const Eigen::VectorXd y = 3.0 * x.array() - 1.0;
    const PiecewiseAffineFit fit = fit_piecewise(x, y, 10);
    CHECK(fit.requested_bins == 10);
    CHECK(fit.merges == 0);
    for (const auto& bin : fit.bins) {
        CHECK(std::abs(bin.slope - 3.0) <= 1e-9);
        CHECK(bin.count >= 10);
        CHECK(bin.mean_y == doctest::Approx(3.0 * bin.mean_x - 1.0).epsilon(1e-12));
    }
    // slope spread across bins
    double lo = fit.bins.front().slope, hi = lo;
    for (const auto& bin : fit.bins) {
        lo = std::min(lo, bin.slope);
        hi = std::max(hi, bin.slope);
    }
    CHECK(hi - lo <= 1e-9);

    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(101, -2.0, 2.0);
    CHECK(fit_rmse(fit, [](double v) { return 3.0 * v - 1.0; }, grid) <= 1e-9);
}

TEST_CASE("bins partition the observed range with anchored predictions") {
    const Eigen::VectorXd x = standard_normal(1500, 2);
    const Eigen::VectorXd y =
        (x.array().tanh() + 0.1 * standard_normal(1500, 3).array()).matrix();
    const PiecewiseAffineFit fit = fit_piecewise(x, y, 15);
    REQUIRE(!fit.bins.empty());
    CHECK(fit.bins.front().lo == doctest::Approx(x.minCoeff()).epsilon(1e-14));
    CHECK(fit.bins.back().hi == doctest::Approx(x.maxCoeff()).epsilon(1e-14));
    for (std::size_t i = 1; i < fit.bins.size(); ++i)
        CHECK(fit.bins[i].lo == doctest::Approx(fit.bins[i - 1].hi).epsilon(1e-14));

    for (const auto& bin : fit.bins) {
        bool extra = true;
        CHECK(predict(fit, bin.mean_x, &extra) == doctest::Approx(bin.mean_y).epsilon(1e-12));
        CHECK(!extra);
    }

    Eigen::Index total = 0;
    for (const auto& bin : fit.bins) total += bin.count;
    CHECK(total == x.size());
}

TEST_CASE("constant response gives a flat fit") {
    const Eigen::VectorXd x = standard_normal(400, 4);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(400, 2.5);
    const PiecewiseAffineFit fit = fit_piecewise(x, y, 8);
    for (const auto& bin : fit.bins) CHECK(bin.slope == 0.0);
    CHECK(predict(fit, 0.0) == 2.5);
    CHECK(predict(fit, x.minCoeff()) == 2.5);
}

TEST_CASE("under-occupied bins merge until every bin clears the floor") {
    // two tight clusters leave most equal-width bins nearly empty
    Eigen::VectorXd x(60);
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> du(0.0, 0.1);
    for (Eigen::Index i = 0; i < 30; ++i) x(i) = du(eng);
    for (Eigen::Index i = 30; i < 60; ++i) x(i) = 10.0 + du(eng);
    const Eigen::VectorXd y = 2.0 * x.array() + 1.0;

    const PiecewiseAffineFit fit = fit_piecewise(x, y, 12, 10);
    CHECK(fit.merges > 0);
    CHECK(fit.bins.size() >= 2);
    for (const auto& bin : fit.bins) CHECK(bin.count >= 10);

    // demanding more occupancy than the data has collapses the binning
    CHECK_THROWS_AS(fit_piecewise(x, y, 12, 50), Error);
    CHECK_THROWS_AS(fit_piecewise(x, y, 1), ParseError);
}

TEST_CASE("saturating data beats the best global line and flattens in the tails") {
    const Eigen::Index n = 10000;
    const Eigen::VectorXd x = standard_normal(n, 6);
    const Eigen::VectorXd y =
        (x.array().tanh() + 0.1 * standard_normal(n, 7).array()).matrix();

    const PiecewiseAffineFit fit = fit_piecewise(x, y, 20);
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(501, -2.5, 2.5);
    auto truth = [](double v) { return std::tanh(v); };

    const double rmse_fit = fit_rmse(fit, truth, grid);
    const auto [b0, b1] = oracle::best_line(truth, grid);
    double line_sq = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double e = b0 + b1 * grid(i) - std::tanh(grid(i));
        line_sq += e * e;
    }
    const double rmse_line = std::sqrt(line_sq / static_cast<double>(grid.size()));

    CHECK(rmse_fit < 0.1);
    CHECK(rmse_fit < rmse_line);

    const double first = std::abs(fit.bins.front().slope);
    const double last = std::abs(fit.bins.back().slope);
    double central = 0.0;
    for (const auto& bin : fit.bins)
        if (bin.lo <= 0.0 && 0.0 < bin.hi) central = std::abs(bin.slope);
    CHECK(first < central);
    CHECK(last < central);
}

TEST_CASE("rmse improves with more data at fixed bins") {
    auto rmse_at = [](Eigen::Index n, std::uint64_t sx, std::uint64_t se) {
        const Eigen::VectorXd x = standard_normal(n, sx);
        const Eigen::VectorXd y =
            (x.array().tanh() + 0.1 * standard_normal(n, se).array()).matrix();
        const PiecewiseAffineFit fit = fit_piecewise(x, y, 20);
        const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(501, -2.5, 2.5);
        return fit_rmse(fit, [](double v) { return std::tanh(v); }, grid);
    };
    CHECK(rmse_at(10000, 8, 9) < rmse_at(1000, 10, 11));
}

TEST_CASE("out-of-range points extend the nearest piece and are flagged") {
    const Eigen::VectorXd x = standard_normal(500, 12);
    const Eigen::VectorXd y = 2.0 * x.array() + 0.5;
    const PiecewiseAffineFit fit = fit_piecewise(x, y, 5);

    bool extra = false;
    const double far_right = x.maxCoeff() + 3.0;
    const double value = predict(fit, far_right, &extra);
    CHECK(extra);
    CHECK(value == doctest::Approx(2.0 * far_right + 0.5).epsilon(1e-9));

    extra = false;
    predict(fit, x.minCoeff() - 1.0, &extra);
    CHECK(extra);
}

} // TEST_SUITE
