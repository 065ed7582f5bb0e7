#include "eventcorr/inference.hpp"

#include "eventcorr/rng.hpp"
#include "eventcorr/truncnorm.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace ecc {

double phi(const Eigen::Vector4d& t) {
    const double dx = 1.0 + t(1) * t(1) * t(3);
    const double dy = 1.0 + t(2) * t(2) * t(3);
    if (!(dx > 0.0) || !(dy > 0.0))
        throw DegenerateConditioningError("conditional variance factor is not positive");
    return (t(0) + t(1) * t(2) * t(3)) / std::sqrt(dx * dy);
}

Eigen::Vector4d phi_gradient(const Eigen::Vector4d& t) {
    const double b = t(1), c = t(2), d = t(3);
    const double dx = 1.0 + b * b * d;
    const double dy = 1.0 + c * c * d;
    if (!(dx > 0.0) || !(dy > 0.0))
        throw DegenerateConditioningError("conditional variance factor is not positive");
    const double root = std::sqrt(dx * dy);
    const double f = phi(t);
    Eigen::Vector4d g;
    g(0) = 1.0 / root;
    g(1) = c * d / root - f * b * d / dx;
    g(2) = b * d / root - f * c * d / dy;
    g(3) = b * c / root - 0.5 * f * (b * b / dx + c * c / dy);
    return g;
}

namespace {

// Per-row moment vector whose mean determines theta:
// (x, y, z, x^2, y^2, z^2, xy, xz, yz, 1_A, z 1_A, z^2 1_A).
constexpr int kMoments = 12;

Eigen::Vector4d theta_from_moments(const Eigen::VectorXd& m, double n) {
    const double var_x = m(3) - m(0) * m(0);
    const double var_y = m(4) - m(1) * m(1);
    const double var_z = m(5) - m(2) * m(2);
    if (!(var_x > 0.0) || !(var_y > 0.0) || !(var_z > 0.0))
        throw DegenerateConditioningError("moment map: nonpositive variance");
    const double mass = m(9);
    if (!(mass > 0.0)) throw DegenerateConditioningError("moment map: zero event mass");
    const double n_event = mass * n;
    if (!(n_event > 1.0)) throw DegenerateConditioningError("moment map: event keeps fewer than 2 rows");
    const double mean_z_a = m(10) / mass;
    const double var_z_a = m(11) / mass - mean_z_a * mean_z_a;
    Eigen::Vector4d t;
    t(0) = (m(6) - m(0) * m(1)) / std::sqrt(var_x * var_y);
    t(1) = (m(7) - m(0) * m(2)) / std::sqrt(var_x * var_z);
    t(2) = (m(8) - m(1) * m(2)) / std::sqrt(var_y * var_z);
    // Bessel factors put the variance shift on the same footing as
    // delta_shift, so phi(theta) reproduces the direct point estimate.
    t(3) = (var_z_a * n_event / (n_event - 1.0)) / (var_z * n / (n - 1.0)) - 1.0;
    return t;
}

} // namespace

ThetaBundle theta_bundle(const Sample& sample, const EventSpec& event) {
    sample.validate();
    if (sample.roles.z1.size() != 1 || sample.roles.z1 != sample.roles.z2)
        throw DimensionMismatchError("theta bundle requires a shared scalar covariate");
    const std::vector<bool> mask = event_mask(sample, event);
    if (count_mask(mask) < 3)
        throw InsufficientEventSampleError("event selects fewer than 3 rows", count_mask(mask));

    const Eigen::Index n = sample.n();
    Eigen::MatrixXd u(n, kMoments);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = sample.data(i, sample.roles.x);
        const double y = sample.data(i, sample.roles.y);
        const double z = sample.data(i, sample.roles.z1[0]);
        const double a = mask[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        u(i, 0) = x;
        u(i, 1) = y;
        u(i, 2) = z;
        u(i, 3) = x * x;
        u(i, 4) = y * y;
        u(i, 5) = z * z;
        u(i, 6) = x * y;
        u(i, 7) = x * z;
        u(i, 8) = y * z;
        u(i, 9) = a;
        u(i, 10) = z * a;
        u(i, 11) = z * z * a;
    }
    const Eigen::VectorXd mbar = column_mean(u);
    const Eigen::MatrixXd sigma_u = covariance_matrix(u);

    // Jacobian of the moment-to-theta map by central differences.
    const auto nd = static_cast<double>(n);
    Eigen::Matrix<double, 4, kMoments> jac;
    for (int k = 0; k < kMoments; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(mbar(k)));
        Eigen::VectorXd mp = mbar, mm = mbar;
        mp(k) += h;
        mm(k) -= h;
        jac.col(k) = (theta_from_moments(mp, nd) - theta_from_moments(mm, nd)) / (2.0 * h);
    }

    ThetaBundle bundle;
    bundle.theta = theta_from_moments(mbar, nd);
    bundle.sigma_theta = jac * sigma_u * jac.transpose();
    // Symmetrize away the numerical skew from the finite differences.
    bundle.sigma_theta = 0.5 * (bundle.sigma_theta + bundle.sigma_theta.transpose());
    bundle.n = n;
    return bundle;
}

double delta_method_se(const ThetaBundle& bundle, bool* clipped) {
    const Eigen::Vector4d g = phi_gradient(bundle.theta);
    double quad = g.dot(bundle.sigma_theta * g);
    if (clipped) *clipped = quad < 0.0;
    if (quad < 0.0) quad = 0.0;
    return std::sqrt(quad / static_cast<double>(bundle.n));
}

CI delta_ci(const ThetaBundle& bundle, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ParseError("confidence level must lie in (0,1)");
    const double center = phi(bundle.theta);
    const double se = delta_method_se(bundle);
    const double zq = normal_ppf(0.5 + 0.5 * level);
    return CI{level, center - zq * se, center + zq * se, CI::Method::delta};
}

CI bootstrap_ci(const Sample& sample, const EventSpec& event,
                const std::function<double(const Sample&, const EventSpec&)>& estimator, int B,
                double level, std::uint64_t seed, unsigned threads) {
    sample.validate();
    if (B < 100) throw ParseError("bootstrap needs at least 100 replicates");
    if (!(level > 0.0 && level < 1.0)) throw ParseError("confidence level must lie in (0,1)");

    const Eigen::Index n = sample.n();
    std::vector<std::optional<double>> draws(static_cast<std::size_t>(B));
    parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
        auto eng = derived_engine(seed, static_cast<std::uint64_t>(b));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        Sample res = sample;
        for (Eigen::Index i = 0; i < n; ++i) res.data.row(i) = sample.data.row(pick(eng));
        try {
            draws[b] = estimator(res, event);
        } catch (const Error&) {
            draws[b] = std::nullopt;
        }
    });

    std::vector<double> ok;
    ok.reserve(draws.size());
    for (const auto& d : draws)
        if (d) ok.push_back(*d);
    const int failures = B - static_cast<int>(ok.size());
    if (failures > B / 10)
        throw UnstableBootstrapError("estimator failed in " + std::to_string(failures) + " of " +
                                         std::to_string(B) + " bootstrap replicates",
                                     failures, B);

    Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(ok.data(), static_cast<Eigen::Index>(ok.size()));
    const double alpha = 0.5 * (1.0 - level);
    return CI{level, quantile_type7(v, alpha), quantile_type7(v, 1.0 - alpha),
              CI::Method::bootstrap_percentile};
}

} // namespace ecc
