#pragma once

#include "eventcorr/estimators.hpp"

#include <functional>

namespace ecc {

/// Parameter vector theta = (rho_xy, rho_xz, rho_yz, delta) for a scalar
/// covariate, with an estimate of its asymptotic covariance.
struct ThetaBundle {
    Eigen::Vector4d theta;
    Eigen::Matrix4d sigma_theta;
    Eigen::Index n = 0;
};

/// phi(theta) maps the unconditional parameters to the event conditional
/// correlation: (a + b c d)/sqrt((1+b^2 d)(1+c^2 d)).
double phi(const Eigen::Vector4d& theta);
Eigen::Vector4d phi_gradient(const Eigen::Vector4d& theta);

/// Builds theta-hat and its covariance from the sample and a scalar-covariate
/// event. The covariance comes from the empirical covariance of the
/// per-observation moment vector (the raw moments theta is a smooth function
/// of), pushed through the moment-to-theta Jacobian.
ThetaBundle theta_bundle(const Sample& sample, const EventSpec& event);

/// sqrt(grad phi' Sigma_theta grad phi / n). A negative quadratic form
/// (numerical) is clipped to zero and flagged.
double delta_method_se(const ThetaBundle& bundle, bool* clipped = nullptr);

struct CI {
    double level;
    double lo;
    double hi;
    enum class Method { delta, bootstrap_percentile } method;
};

/// Normal-approximation interval phi(theta) +- z * se.
CI delta_ci(const ThetaBundle& bundle, double level = 0.95);

/// Percentile interval over B row-resampled re-estimates. Rows are resampled
/// jointly so the event (including quantile bands) is recomputed per
/// resample. Replicates use engines derived from (seed, replicate) and run in
/// parallel; the result does not depend on the thread count. Estimator
/// failures are tolerated up to 10% of B, beyond which
/// UnstableBootstrapError is thrown.
CI bootstrap_ci(const Sample& sample, const EventSpec& event,
                const std::function<double(const Sample&, const EventSpec&)>& estimator, int B,
                double level, std::uint64_t seed, unsigned threads = 0);

} // namespace ecc
